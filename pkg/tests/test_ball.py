import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import spherical_jn

from entire_sublinear.ball import (ConvergenceError, MaskedBoundaryWarning, RadialGrid, assemble_radial_operator,
                                   check_brezis_oswald, first_eigenvalue, radial_laplacian, solve_ball,
                                   solve_ball_3d)
from entire_sublinear.barrier import build_barrier
from entire_sublinear.problem import NonlinearitySpec, PotentialSpec, ProblemSpec

from conftest import u_star


def test_grid_invariants():
    g = RadialGrid(5.0, 64)
    assert g.r[0] == 0.0 and g.r[-1] == 5.0 and g.r.size == 65
    with pytest.raises(ValueError):
        RadialGrid(5.0, 4)


@pytest.mark.parametrize("N", [3, 4, 6])
def test_operator_annihilates_constants(N):
    g = RadialGrid(3.0, 32)
    op = assemble_radial_operator(g, N)
    # row entries are O(1/h^2); cancellation leaves round-off only
    assert np.allclose(op.apply(np.ones(33))[:-1], 0.0, rtol=0, atol=1e-13 / g.h**2)


def test_operator_on_quadratic():
    g = RadialGrid(2.0, 40)
    op = assemble_radial_operator(g, 3)
    out = op.apply(g.r**2)
    assert np.allclose(out[:-1], -6.0, atol=1e-9)
    # radial_laplacian is the same stencil with the sign flipped
    assert np.allclose(radial_laplacian(g.r**2, g.h, 3), 6.0, atol=1e-9)


def test_operator_order_on_smooth_profile():
    errs = []
    for M in (64, 128, 256):
        g = RadialGrid(5.0, M)
        u = (1 + g.r**2) ** -0.5
        exact = 3 * (1 + g.r**2) ** -2.5
        errs.append(np.max(np.abs(assemble_radial_operator(g, 3).apply(u)[:-1] - exact[:-1])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_zero_potential_gives_constant():
    pb = ProblemSpec(PotentialSpec.zero(3), NonlinearitySpec.power(0.5), 1.0)
    sol = solve_ball(pb, 4.0, RadialGrid(4.0, 64), initial=np.full(65, 1.5))
    assert np.allclose(sol.u, 1.0, atol=1e-8)
    assert sol.u[-1] == 1.0


def test_manufactured_single_ball(manufactured_problem, manufactured_barrier):
    g = RadialGrid(8.0, 512)
    sol = solve_ball(manufactured_problem, 8.0, g, barrier=manufactured_barrier, boundary_value=u_star(8.0))
    assert np.max(np.abs(sol.u - u_star(g.r))) <= 1e-3
    assert sol.u[-1] == u_star(8.0)


@pytest.fixture(scope="module")
def quartic_balls(quartic_problem):
    b = build_barrier(quartic_problem)
    return b, {M: solve_ball(quartic_problem, 5.0, RadialGrid(5.0, M), barrier=b) for M in (128, 256, 512)}


def test_ell_zero_ball_shape(quartic_balls):
    _, sols = quartic_balls
    sol = sols[256]
    assert sol.u[-1] == 0.0
    assert np.all(sol.u[:-1] > 0)
    assert np.argmax(sol.u) == 0
    assert sol.monotone_certificate and sol.direction == "non-increasing"
    assert sol.residual_sup <= 1e-8 * (1 + np.max(np.sqrt(sol.u) / (1 + sol.r**4)))


def test_ell_zero_richardson(quartic_balls):
    _, sols = quartic_balls
    # compare at the coarse nodes: coarse vs medium, medium vs fine
    d1 = np.max(np.abs(sols[128].u - sols[256].u[::2]))
    d2 = np.max(np.abs(sols[256].u[::2] - sols[512].u[::4]))
    assert math.log2(d1 / d2) >= 1.9


def test_uniqueness_at_fixed_k(quartic_problem, quartic_balls):
    b, sols = quartic_balls
    g = RadialGrid(5.0, 256)
    other = solve_ball(quartic_problem, 5.0, g, initial=np.full(257, b.c))
    assert np.max(np.abs(other.u - sols[256].u)) <= 1e-7


@settings(max_examples=8, deadline=None)
@given(st.floats(1.0, 4.0))
def test_discrete_comparison(scale):
    f = NonlinearitySpec.power(0.5)
    small = ProblemSpec(PotentialSpec.rational(3, 4.0), f, 0.0)
    big = ProblemSpec(PotentialSpec.rational(3, 4.0, scale=scale), f, 0.0)
    g = RadialGrid(5.0, 128)
    u1 = solve_ball(small, 5.0, g).u
    u2 = solve_ball(big, 5.0, g).u
    assert np.all(u1 <= u2 + 1e-7)


def test_non_convergence_reports_residual(quartic_problem):
    with pytest.raises(ConvergenceError) as info:
        solve_ball(quartic_problem, 5.0, RadialGrid(5.0, 64), max_iters=2)
    assert info.value.last_residual is not None


def test_first_eigenvalue_ball_pi():
    rep = first_eigenvalue(RadialGrid(math.pi, 256), 3, 0.0)
    assert rep.lambda1 == pytest.approx(1.0, rel=1e-2)
    assert rep.eigvec_positive


def test_first_eigenvalue_higher_dimension():
    # oracle: first zero of the spherical Bessel function j_1 is the first Dirichlet mode for N = 5
    z = np.linspace(4.4, 4.6, 200001)
    root = z[np.argmin(np.abs(spherical_jn(1, z)))]
    rep = first_eigenvalue(RadialGrid(math.pi, 256), 5, 0.0)
    assert rep.lambda1 == pytest.approx((root / math.pi) ** 2, rel=1e-3)
    assert rep.eigvec_positive


@settings(max_examples=20, deadline=None)
@given(st.floats(-5.0, 5.0))
def test_eigen_shift_identity(gamma):
    g = RadialGrid(3.0, 128)
    a = 1.0 / (1 + g.r**2)
    l0 = first_eigenvalue(g, 3, a).lambda1
    l1 = first_eigenvalue(g, 3, a + gamma).lambda1
    assert abs(l1 - (l0 - gamma)) <= 1e-10


def test_eigen_shift_past_zero():
    g = RadialGrid(math.pi, 128)
    l0 = first_eigenvalue(g, 3, 0.0).lambda1
    assert first_eigenvalue(g, 3, 2 * l0).lambda1 < 0


def test_brezis_oswald_power(quartic_problem):
    res = check_brezis_oswald(quartic_problem, 5.0, 1e-2)
    assert res["passed"]
    assert res["c108"].lambda1 < 0 and res["c108"].trail[-1][0] <= 1e-2
    assert res["c109"].lambda1 > 0


def test_brezis_oswald_zero_potential():
    pb = ProblemSpec(PotentialSpec.zero(3), NonlinearitySpec.power(0.5), 0.0)
    res = check_brezis_oswald(pb, 5.0, 1e-2)
    base = first_eigenvalue(RadialGrid(5.0, 256), 3, 0.0).lambda1
    assert not res["c108"].sign_reached
    assert all(lam == pytest.approx(base, rel=1e-12) for _, lam in res["c108"].trail)
    assert len(res["c108"].trail) == 9


def test_brezis_oswald_superlinear_small_potential():
    pb = ProblemSpec(PotentialSpec.rational(3, 4.0, scale=0.01), NonlinearitySpec.power(1.5), 0.0)
    res = check_brezis_oswald(pb, 5.0, 1e-2)
    assert not res["c108"].sign_reached
    assert "sign not reached" in res["c108"].note


def test_solve_ball_3d_matches_radial(quartic_problem, quartic_balls):
    b, sols = quartic_balls
    with pytest.warns(MaskedBoundaryWarning):
        sol = solve_ball_3d(quartic_problem, 5.0, 49, barrier=b)
    r = sol.grid.r.ravel()
    radial = np.where(r < 5.0, np.interp(r, sols[512].r, sols[512].u), 0.0)
    assert np.max(np.abs(sol.values.ravel() - radial)) <= 5e-2


def test_solve_ball_3d_anisotropic_below_majorant():
    def rho(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            ang = np.where(r2 > 0, np.asarray(x)[..., 0] ** 2 / r2, 0.0)
        return (1 + ang) / (1 + r2**2)

    pb = ProblemSpec(PotentialSpec(3, anisotropic=rho), NonlinearitySpec.power(0.5), 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaskedBoundaryWarning)
        sol = solve_ball_3d(pb, 5.0, 33)
    radial = solve_ball(pb, 5.0, RadialGrid(5.0, 512))
    r = sol.grid.r.ravel()
    bound = np.where(r < 5.0, np.interp(r, radial.r, radial.u), 0.0)
    assert np.all(sol.values.ravel() <= bound + 5e-2)


def test_solve_ball_3d_zero_potential():
    pb = ProblemSpec(PotentialSpec.zero(3), NonlinearitySpec.power(0.5), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaskedBoundaryWarning)
        sol = solve_ball_3d(pb, 3.0, 17, initial=np.full((17, 17, 17), 1.2))
    assert np.allclose(sol.values, 1.0, atol=1e-6)
