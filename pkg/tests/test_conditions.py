import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from entire_sublinear.conditions import (check_rho1, check_rho2, kato_profile, newton_potential_bound,
                                         sphere_area)
from entire_sublinear.problem import PotentialSpec


def phi_of(p, N=3):
    return PotentialSpec.rational(N, p).majorant()


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


def test_rho1_closed_form_cubic():
    v = check_rho1(phi_of(3.0))
    assert v.verdict == "finite"
    closed = 2 * math.pi / (3 * math.sqrt(3))
    # independent oracle: quadrature over [0, inf) split at 1
    a, _ = integrate.quad(lambda r: r / (1 + r**3), 0, 1)
    b, _ = integrate.quad(lambda r: r / (1 + r**3), 1, np.inf)
    assert a + b == pytest.approx(closed, rel=1e-10)
    assert abs(v.value - closed) <= max(1e-8, 1e-6 * closed)


def test_rho1_harmonic_tail_divergent():
    assert check_rho1(phi_of(1.0)).verdict == "divergent"


def test_rho1_zero_potential():
    v = check_rho1(PotentialSpec.zero(3).majorant())
    assert v.verdict == "finite"
    assert v.value == 0.0


@pytest.mark.parametrize("p, verdict", [(1.0, "divergent"), (1.5, "divergent"), (1.8, "divergent"),
                                        (2.2, "finite"), (3.0, "finite"), (4.0, "finite"), (6.0, "finite")])
def test_rho1_threshold_sweep(p, verdict):
    assert check_rho1(phi_of(p)).verdict == verdict


@pytest.mark.parametrize("p, verdict", [(2.0, "divergent"), (2.5, "divergent"), (2.8, "divergent"),
                                        (3.2, "finite"), (4.0, "finite"), (6.0, "finite")])
def test_rho2_threshold_sweep(p, verdict):
    assert check_rho2(phi_of(p), 3).verdict == verdict


def test_rho2_examples():
    assert check_rho2(phi_of(5.0), 3).verdict == "finite"
    assert check_rho2(phi_of(3.0), 3).verdict != "finite"
    expo = PotentialSpec(4, radial=lambda r: np.exp(-np.asarray(r))).majorant()
    v = check_rho2(expo, 4)
    assert v.verdict == "finite"
    # ∫ r^3 e^{-r} dr = 3!
    assert v.value == pytest.approx(6.0, rel=1e-8)


def test_verdict_band_invariant():
    for p in (1.0, 2.0, 2.2, 4.0):
        v = check_rho1(phi_of(p))
        if v.verdict == "finite":
            assert v.tail_exponent < -1.1
        elif v.verdict == "divergent":
            assert v.tail_exponent >= -0.9
        assert v.value >= 0


@settings(max_examples=10, deadline=None)
@given(st.floats(2.3, 6.0), st.floats(1e3, 1e5))
def test_rmax_monotone(p, r_small):
    phi = phi_of(p)
    lo = check_rho1(phi, r_max=r_small)
    hi = check_rho1(phi, r_max=10 * r_small)
    # quadrature of the added panel is positive; allow the adaptive error estimates
    assert hi.value >= lo.value - 1e-9


def test_kato_rho1_closed_form():
    alphas = np.geomspace(1.0, 1e-3, 7)
    prof = kato_profile(phi_of(4.0), 3, "rho1", alphas=alphas, centers=[0.0])
    expected = 0.5 * np.arctan(alphas**2)
    assert np.allclose(prof.sup_estimates, expected, rtol=1e-8, atol=1e-14)
    assert prof.trend == "vanishing"


def test_kato_rho2_constant_potential():
    phi = PotentialSpec(3, radial=lambda r: np.ones_like(np.asarray(r, dtype=float))).majorant()
    alphas = np.geomspace(1.0, 1e-4, 9)
    prof = kato_profile(phi, 3, "rho2", alphas=alphas, centers=[0.0])
    assert np.allclose(prof.sup_estimates, alphas, rtol=1e-8)
    assert prof.trend == "vanishing"


def test_kato_zero_potential():
    prof = kato_profile(PotentialSpec.zero(3).majorant(), 3, "rho1")
    assert np.all(np.asarray(prof.sup_estimates) == 0)
    assert prof.trend == "vanishing"


def test_kato_translated_kernel_at_origin_matches_printed():
    alphas = [0.5, 0.1]
    printed = kato_profile(phi_of(4.0), 3, "rho1", alphas=alphas, centers=[0.0])
    translated = kato_profile(phi_of(4.0), 3, "rho1", alphas=alphas, centers=[0.0], kernel="translated")
    # both kernels coincide when the center is the origin
    assert np.allclose(printed.sup_estimates, translated.sup_estimates, rtol=1e-6)


def test_newton_bound_closed_form_quartic():
    res = newton_potential_bound(PotentialSpec.rational(3, 4.0))
    assert res.verdict == "bounded"
    # sup at the origin: 4π ∫ s/(1+s^4) ds = π²
    assert res.sup_estimate == pytest.approx(math.pi**2, rel=1e-7)


@pytest.mark.parametrize("p, verdict", [(3.0, "bounded"), (2.0, "unbounded"), (1.0, "unbounded")])
def test_newton_threshold(p, verdict):
    assert newton_potential_bound(PotentialSpec.rational(3, p)).verdict == verdict


def test_newton_zero():
    res = newton_potential_bound(PotentialSpec.zero(3))
    assert res.verdict == "bounded"
    assert res.sup_estimate == 0.0
