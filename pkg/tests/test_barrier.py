import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from entire_sublinear.barrier import (AntiderivativeG, BarrierError, build_barrier, choose_scale, compute_K,
                                      eval_v, eval_w, w_integral_by_parts, w_integral_nested)
from entire_sublinear.problem import NonlinearitySpec, PotentialSpec, ProblemSpec


def quartic(N=3):
    return PotentialSpec.rational(N, 4.0)


@pytest.mark.parametrize("N, expected", [(3, math.pi / 4), (4, math.pi / 8)])
def test_compute_K_closed_form(N, expected):
    res = compute_K(quartic(N).majorant(), N)
    assert res.K == pytest.approx(expected, abs=1e-7)
    assert abs(res.K_nested - res.K) <= 1e-6 * res.K


@pytest.mark.parametrize("N", [3, 4])
@pytest.mark.parametrize("r", [1.0, 10.0, 100.0])
def test_nested_matches_by_parts(N, r):
    phi = quartic(N).majorant()
    a = w_integral_nested(phi, N, r)
    b = w_integral_by_parts(phi, N, r)
    assert abs(a - b) <= 1e-8 * abs(b)


def test_compute_K_rejects_slow_decay():
    with pytest.raises(BarrierError):
        compute_K(PotentialSpec.rational(3, 2.0).majorant(), 3)


def test_compute_K_zero_potential_degenerate():
    res = compute_K(PotentialSpec.zero(3).majorant(), 3)
    assert res.K == 0.0
    assert res.degenerate


def _w_oracle(r):
    # complementary form, independent single quadratures
    inner, _ = integrate.quad(lambda s: s**2 / (1 + s**4), 0, r, limit=200)
    tail, _ = integrate.quad(lambda s: s / (1 + s**4), r, np.inf)
    return inner / r + tail


def test_eval_w_values():
    pb = ProblemSpec(quartic(), NonlinearitySpec.power(0.5), 0.0)
    b = build_barrier(pb)
    assert eval_w(b, 0.0) == b.K
    vals = [eval_w(b, r) for r in (1.0, 10.0, 100.0, 1000.0)]
    assert all(x > y > 0 for x, y in zip(vals, vals[1:]))
    for r, v in zip((1.0, 10.0, 100.0, 1000.0), vals):
        assert v == pytest.approx(_w_oracle(r), rel=1e-7, abs=1e-12)


def test_w_at_one_identity():
    phi = quartic().majorant()
    K = math.pi / 4
    a, _ = integrate.quad(lambda s: s**2 / (1 + s**4), 0, 1)
    b, _ = integrate.quad(lambda s: s / (1 + s**4), 0, 1)
    direct = K - (-1.0 * a + b)
    pb = ProblemSpec(quartic(), NonlinearitySpec.power(0.5), 0.0)
    assert eval_w(build_barrier(pb), 1.0) == pytest.approx(direct, rel=1e-8)
    assert w_integral_nested(phi, 3, 1.0) == pytest.approx(K - direct, rel=1e-8)


def test_choose_scale_ell_zero():
    K = math.pi / 4
    f = NonlinearitySpec.power(0.5)
    c, x1, degenerate = choose_scale(f, 0.0, K)
    assert not degenerate
    # G(x) = (2/3) x^{3/2}; crossing G(x) = Kx at x = (3K/2)^2
    assert x1 == pytest.approx((1.5 * K) ** 2, rel=1e-6)
    assert c == 2 * x1


def test_antiderivative_closed_form_ell_one():
    G = AntiderivativeG(NonlinearitySpec.power(0.5), 1.0)
    x = np.array([0.0, 0.5, 2.0, 10.0, 100.0])
    closed = (2 / 3) * (x + 1) ** 1.5 - 2 * (x + 1) ** 0.5 + 4 / 3
    assert np.allclose(G(x), closed, rtol=1e-10, atol=1e-13)
    c, x1, _ = choose_scale(NonlinearitySpec.power(0.5), 1.0, math.pi / 4)
    assert G.scalar(x1) == pytest.approx(math.pi / 4 * x1, rel=1e-6)


def test_choose_scale_degenerate():
    c, x1, degenerate = choose_scale(NonlinearitySpec.power(0.5), 0.0, 0.0)
    assert degenerate
    assert c == 1e-6


@pytest.fixture(scope="module")
def barriers():
    out = {}
    for ell in (0.0, 1.0):
        out[ell] = build_barrier(ProblemSpec(quartic(), NonlinearitySpec.power(0.5), ell))
    return out


@pytest.mark.parametrize("ell", [0.0, 1.0])
def test_barrier_invariants(barriers, ell):
    b = barriers[ell]
    assert b.K * b.c <= b.G.scalar(b.c)
    r = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 60)])
    w = b.w_profile(r)
    v = b.v_profile(r)
    assert w[0] == pytest.approx(b.K, rel=1e-12)
    assert np.all(np.diff(w) < 0) and np.all(w[1:] > 0) and np.all(w < b.K + 1e-15)
    assert np.all(np.diff(v) < 0)
    assert np.all(v[1:] > ell) and np.all(v <= b.c + ell)
    assert v[-1] - ell < 1e-2 * (v[0] - ell)
    # scalar and vectorized evaluators agree
    for i in (5, 30, 55):
        assert v[i] == pytest.approx(eval_v(b, r[i]), abs=1e-10)
        assert w[i] == pytest.approx(eval_w(b, r[i]), rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1e3), st.sampled_from([0.0, 1.0]))
def test_G_inverse_round_trip(barriers, r, ell):
    b = barriers[ell]
    y = b.c * eval_w(b, r)
    assert abs(b.G.scalar(eval_v(b, r) - ell) - y) <= 1e-10


def test_G_increasing(barriers):
    x = np.geomspace(1e-6, 1e3, 50)
    for b in barriers.values():
        g = b.G(x)
        assert np.all(np.diff(g) > 0)
        assert b.G.scalar(0.0) == 0.0
