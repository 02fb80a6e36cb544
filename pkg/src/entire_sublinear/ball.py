"""Dirichlet problems on balls |x| < k and first-eigenvalue diagnostics.

Radial problems use the centered finite-difference form of the radial
Laplacian with a ghost-node center row; the nonlinearity is handled by a
shifted Picard iteration whose linear solves are tridiagonal.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .problem import ProblemSpec

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
MAX_ITERS = 500
REFRESH_EVERY = 25
SHIFT_FLOOR = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class MaskedBoundaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RadialGrid:
    k: float
    M: int

    def __post_init__(self):
        if self.M < 8:
            raise ValueError("radial grid needs M >= 8")
        if not self.k > 0:
            raise ValueError("ball radius must be positive")

    @property
    def h(self) -> float:
        return self.k / self.M

    @property
    def r(self) -> np.ndarray:
        r = np.arange(self.M + 1) * self.h
        r[-1] = self.k
        return r


@dataclass
class RadialOperator:
    """Tridiagonal -Δ_h with an identity boundary row; lower[i] multiplies u[i-1]."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def banded(self, shift=0.0) -> np.ndarray:
        """(3, n) layout for scipy.linalg.solve_banded, shift added to the non-boundary rows."""
        n = self.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper[:-1]
        ab[1] = self.diag
        ab[1, :-1] = ab[1, :-1] + shift
        ab[2, :-1] = self.lower[1:]
        return ab

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper[:-1], 1) + np.diag(self.lower[1:], -1)


def assemble_radial_operator(grid: RadialGrid, N: int) -> RadialOperator:
    """Radial -Δ on [0, k]: centered interior rows, -2N(u1-u0)/h^2 at the center, Dirichlet at r = k."""
    if N < 3:
        raise ValueError("N must be >= 3")
    M, h = grid.M, grid.h
    i = np.arange(M + 1, dtype=float)
    lower = np.zeros(M + 1)
    upper = np.zeros(M + 1)
    diag = np.full(M + 1, 2.0 / h**2)
    with np.errstate(divide="ignore"):
        drift = (N - 1) / (2.0 * i)
    lower[1:M] = -(1.0 - drift[1:M]) / h**2
    upper[1:M] = -(1.0 + drift[1:M]) / h**2
    diag[0] = 2.0 * N / h**2
    upper[0] = -2.0 * N / h**2
    diag[M] = 1.0
    return RadialOperator(lower, diag, upper)


def radial_laplacian(u: np.ndarray, h: float, N: int) -> np.ndarray:
    """Δ_h u at nodes 0..len(u)-2 (same stencil as the operator, sign flipped)."""
    u = np.asarray(u, dtype=float)
    out = np.empty(u.size - 1)
    out[0] = 2.0 * N * (u[1] - u[0]) / h**2
    i = np.arange(1, u.size - 1, dtype=float)
    out[1:] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2 + (N - 1) / (2 * i * h**2) * (u[2:] - u[:-2])
    return out


@dataclass
class BallSolution:
    grid: object
    values: np.ndarray
    residual_sup: float
    iterations: int
    monotone_certificate: bool
    direction: str
    boundary_value: float
    shift: float
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> float:
        return self.grid.k

    @property
    def u(self) -> np.ndarray:
        return self.values

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def to_dict(self) -> dict:
        return {"k": float(self.grid.k), "M": int(getattr(self.grid, "M", 0)), "iterations": self.iterations,
                "residual_sup": float(self.residual_sup), "monotone_certificate": self.monotone_certificate,
                "direction": self.direction, "shift": float(self.shift)}


def _source(problem: ProblemSpec, rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return rho * problem.nonlinearity(u)


def estimate_shift(problem: ProblemSpec, rho: np.ndarray, lo: float, hi: float, samples: int = 64) -> float:
    """Smallest λ >= 0 making u -> ρ f(u) + λu nondecreasing on [lo, hi] (sampled difference quotients)."""
    lo = max(lo, SHIFT_FLOOR)
    if not hi > lo:
        hi = lo * 2.0
    us = np.geomspace(lo, hi, samples)
    fu = problem.nonlinearity(us)
    slopes = np.diff(fu) / np.diff(us)
    worst = float(slopes.min())
    rmax = float(rho.max()) if rho.size else 0.0
    return max(0.0, -worst * rmax)


def _floor_check(u: np.ndarray, floor: float, tol: float) -> np.ndarray:
    low = u < floor
    if np.any(low):
        if np.min(u) < floor - 10 * tol:
            raise ConvergenceError(f"iterate dropped to {np.min(u):.3e}, below the admissible floor {floor}")
        u = np.where(low, floor, u)
    return u


def solve_ball(problem: ProblemSpec, k: float, grid: RadialGrid | None = None, tol: float = DEFAULT_TOL, *,
               initial=None, barrier=None, boundary_value: float | None = None,
               max_iters: int = MAX_ITERS, rho: np.ndarray | None = None) -> BallSolution:
    """Solve -Δu = ρ f(u) on |x| < k, u = ℓ on |x| = k (radial, Φ as the coefficient).

    Iteration: (-Δ_h + λ)u_{n+1} = ρ f(u_n) + λu_n, started from the barrier
    v on the grid unless ``initial`` is given. ``boundary_value`` replaces ℓ
    at r = k (manufactured-solution tests only).
    """
    grid = grid or RadialGrid(k, 256)
    if abs(grid.k - k) > 1e-12 * max(1.0, k):
        raise ValueError("grid radius does not match k")
    N, ell = problem.N, problem.ell
    r = grid.r
    if rho is None:
        rho = problem.potential.majorant()(r)
    bval = ell if boundary_value is None else float(boundary_value)
    floor = ell if boundary_value is None else min(ell, bval)
    op = assemble_radial_operator(grid, N)

    if initial is None:
        if barrier is None:
            from .barrier import build_barrier
            barrier = build_barrier(problem)
        initial = barrier.v_profile(r) if not barrier.degenerate else np.full(r.size, ell)
    u = np.array(initial, dtype=float, copy=True)
    if u.shape != r.shape:
        raise ValueError("initial iterate does not match the grid")
    u[-1] = bval
    u = _floor_check(u, floor, tol)

    lam = 0.0
    ab = None
    history = []
    signs = set()
    scale = max(1.0, float(np.max(np.abs(u))))
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if (it - 1) % REFRESH_EVERY == 0:
            new_lam = estimate_shift(problem, rho, max(float(u[:-1].min()), ell), float(u.max()))
            if ab is None or new_lam != lam:
                lam = new_lam
                ab = op.banded(lam)
        rhs = _source(problem, rho, u) + lam * u
        rhs[-1] = bval
        u_new = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
        u_new[-1] = bval
        u_new = _floor_check(u_new, floor, tol)
        step = u_new - u
        eps = 1e-13 * scale
        if np.any(step > eps):
            signs.add(+1)
        if np.any(step < -eps):
            signs.add(-1)
        diff = float(np.max(np.abs(step)))
        history.append(diff)
        u = u_new
        if diff < tol:
            res = _residual(op, problem, rho, u)
            if res <= tol * (1.0 + float(np.max(_source(problem, rho, u)))):
                converged = True
                break
    residual = _residual(op, problem, rho, u)
    if not converged:
        raise ConvergenceError(f"ball k={k} did not converge in {max_iters} iterations", residual)
    direction = "constant" if not signs else ("non-increasing" if signs == {-1} else
                                              "non-decreasing" if signs == {+1} else "mixed")
    return BallSolution(grid=grid, values=u, residual_sup=residual, iterations=it,
                        monotone_certificate=len(signs) <= 1, direction=direction,
                        boundary_value=bval, shift=lam, history=history)


def _residual(op: RadialOperator, problem: ProblemSpec, rho: np.ndarray, u: np.ndarray) -> float:
    r = op.apply(u)[:-1] - _source(problem, rho, u)[:-1]
    return float(np.max(np.abs(r))) if r.size else 0.0


@dataclass(frozen=True)
class CubeGrid:
    k: float
    n: int

    @property
    def h(self) -> float:
        return 2.0 * self.k / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.k, self.k, self.n)

    def points(self) -> np.ndarray:
        a = self.axis
        X, Y, Z = np.meshgrid(a, a, a, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    @property
    def r(self) -> np.ndarray:
        return np.linalg.norm(self.points(), axis=-1)


def _laplacian_3d(n: int, h: float) -> sparse.csr_matrix:
    one = sparse.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h**2
    eye = sparse.identity(n)
    return (sparse.kron(sparse.kron(one, eye), eye) + sparse.kron(sparse.kron(eye, one), eye)
            + sparse.kron(sparse.kron(eye, eye), one)).tocsr()


def solve_ball_3d(problem: ProblemSpec, k: float, resolution: int = 49, tol: float = 1e-7, *,
                  initial=None, barrier=None, max_iters: int = MAX_ITERS, inner_tol: float = 1e-8) -> BallSolution:
    """7-point solve on [-k, k]^3 with nodes outside the open ball held at ℓ.

    The masked boundary is first-order accurate. Inner linear solves use
    conjugate gradients warm-started from the previous iterate.
    """
    if problem.N != 3:
        raise ValueError("the 3-D solver supports N = 3 only")
    if resolution > 65 or resolution < 5:
        raise ValueError("resolution must lie in [5, 65]")
    warnings.warn("masked-boundary 3-D solve is first-order accurate near |x| = k",
                  MaskedBoundaryWarning, stacklevel=2)
    grid = CubeGrid(k, int(resolution))
    pts = grid.points()
    rr = np.linalg.norm(pts, axis=-1).ravel()
    inside = rr < k - 1e-12 * k
    ell = problem.ell
    rho = problem.potential(pts).ravel()[inside]
    L = _laplacian_3d(grid.n, grid.h)
    A_ii = L[inside][:, inside]
    # outside nodes are fixed at ℓ; their coupling moves to the right-hand side
    b_out = -(L[inside][:, ~inside] @ np.full((~inside).sum(), ell))

    if initial is None:
        if barrier is None:
            from .barrier import build_barrier
            barrier = build_barrier(problem)
        if barrier.degenerate:
            u = np.full(inside.sum(), ell)
        else:
            u = barrier.v_profile(rr[inside])
    else:
        u = np.asarray(initial, dtype=float).ravel()[inside].copy()

    lam = 0.0
    A = None
    history = []
    signs = set()
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if (it - 1) % REFRESH_EVERY == 0:
            new_lam = estimate_shift(problem, rho, max(float(u.min()), ell), float(u.max()))
            if A is None or new_lam != lam:
                lam = new_lam
                A = (A_ii + lam * sparse.identity(A_ii.shape[0])).tocsr()
        rhs = rho * problem.nonlinearity(u) + lam * u + b_out
        u_new, info = splinalg.cg(A, rhs, x0=u, rtol=inner_tol, atol=0.0, maxiter=5000)
        if info != 0:
            raise ConvergenceError("inner conjugate-gradient solve did not converge")
        u_new = _floor_check(u_new, ell, max(tol, inner_tol * 10))
        step = u_new - u
        if np.any(step > 1e-12):
            signs.add(+1)
        if np.any(step < -1e-12):
            signs.add(-1)
        diff = float(np.max(np.abs(step))) if step.size else 0.0
        history.append(diff)
        u = u_new
        if diff < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"3-D ball k={k} did not converge in {max_iters} iterations")
    residual = float(np.max(np.abs(A_ii @ u - b_out - rho * problem.nonlinearity(u)))) if u.size else 0.0
    field_values = np.full(rr.size, ell)
    field_values[inside] = u
    direction = "constant" if not signs else ("non-increasing" if signs == {-1} else
                                              "non-decreasing" if signs == {+1} else "mixed")
    return BallSolution(grid=grid, values=field_values.reshape((grid.n,) * 3), residual_sup=residual,
                        iterations=it, monotone_certificate=len(signs) <= 1, direction=direction,
                        boundary_value=ell, shift=lam, history=history)


@dataclass
class EigenReport:
    lambda1: float
    eigvec_positive: bool
    condition: str | None = None
    note: str = ""
    iterations: int = 0
    trail: list = field(default_factory=list)
    sign_reached: bool | None = None

    def to_dict(self) -> dict:
        return {"lambda1": float(self.lambda1), "eigvec_positive": self.eigvec_positive,
                "condition": self.condition, "note": self.note, "iterations": self.iterations,
                "trail": [[float(a), float(b)] for a, b in self.trail], "sign_reached": self.sign_reached}


def _sturm_count(d: np.ndarray, e2: np.ndarray, x: float) -> int:
    """Number of eigenvalues below x of the symmetric tridiagonal (d, off-diagonal squares e2)."""
    count = 0
    q = 1.0
    tiny = 1e-300
    for i in range(d.size):
        q = d[i] - x - (e2[i - 1] / q if i > 0 else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0:
            count += 1
    return count


def first_eigenvalue(grid: RadialGrid, N: int, a, max_iters: int = 200, tol: float = 1e-14) -> EigenReport:
    """Smallest eigenvalue of -Δ_h - a with Dirichlet data at r = k.

    Shifted inverse iteration; the shift is placed just below λ1 by Sturm
    bisection on the symmetrized tridiagonal when the off-diagonal products
    are nonnegative (always for N = 3), else from a dense eigenvalue sweep.
    A final Sturm count guards against convergence to a higher eigenpair.
    """
    op = assemble_radial_operator(grid, N)
    M = grid.M
    a = np.broadcast_to(np.asarray(a, dtype=float), (M + 1,))[:M]
    d = op.diag[:M] - a
    lo_off = op.lower[1:M]
    up_off = op.upper[:M - 1]
    e2 = up_off * lo_off
    symmetrizable = bool(np.all(e2 >= 0))
    radius = np.abs(np.concatenate([[0.0], lo_off])) + np.abs(np.concatenate([up_off, [0.0]]))
    gersh = float(np.min(d - radius))
    scale = max(1.0, float(np.max(np.abs(d))))

    if symmetrizable:
        lo, hi = gersh - 1e-9 * scale, float(np.min(d)) + 1e-9 * scale
        while _sturm_count(d, e2, hi) == 0:
            hi += (hi - lo)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _sturm_count(d, e2, mid) >= 1:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-6 * max(1.0, abs(hi)):
                break
        sigma = lo - 1e-6 * max(1.0, abs(lo))
    else:
        # sign-indefinite off-diagonal products near the center (N >= 4): locate λ1 densely
        dense = np.diag(d) + np.diag(up_off, 1) + np.diag(lo_off, -1)
        ev = np.linalg.eigvals(dense)
        lam = float(np.min(ev.real))
        sigma = lam - 1e-6 * max(1.0, abs(lam))

    ab = np.zeros((3, M))
    ab[0, 1:] = up_off
    ab[1] = d - sigma
    ab[2, :-1] = lo_off
    x = np.ones(M) / math.sqrt(M)
    mu_prev = math.inf
    mu = math.nan
    it = 0
    for it in range(1, max_iters + 1):
        y = linalg.solve_banded((1, 1), ab, x, check_finite=False)
        mu = sigma + float(x @ x) / float(x @ y)
        x = y / np.linalg.norm(y)
        if it >= 3 and abs(mu - mu_prev) <= tol * max(1.0, abs(mu)):
            break
        mu_prev = mu
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {max_iters} steps")
    x = x * np.sign(x[np.argmax(np.abs(x))])
    positive = bool(np.all(x > -1e-10 * np.max(np.abs(x))))
    note = ""
    if symmetrizable and _sturm_count(d, e2, mu - 1e-8 * max(1.0, abs(mu))) > 0:
        note = "a lower eigenvalue exists below the inverse-iteration limit"
        positive = False
    return EigenReport(lambda1=mu, eigvec_positive=positive, note=note, iterations=it)


def check_brezis_oswald(problem: ProblemSpec, k: float, delta: float = 1e-2, U: float = 1e6,
                        grid: RadialGrid | None = None, halvings: int = 8) -> dict:
    """Sign tests λ1(-Δ - a0) < 0 and λ1(-Δ - a∞) > 0 on the ball of radius k.

    a0 is replaced by the finite surrogate ρ f(δ + ℓ)/δ, halving δ until the
    sign turns negative; a∞ by ρ f(U + ℓ)/U.
    """
    grid = grid or RadialGrid(k, 256)
    rho = problem.potential.majorant()(grid.r)
    f, ell = problem.nonlinearity, problem.ell
    trail = []
    rep108 = None
    dlt = float(delta)
    for _ in range(halvings + 1):
        rep108 = first_eigenvalue(grid, problem.N, rho * f(dlt + ell) / dlt)
        trail.append((dlt, rep108.lambda1))
        if rep108.lambda1 < 0:
            break
        dlt *= 0.5
    rep108.condition = "bo_108"
    rep108.trail = trail
    rep108.sign_reached = rep108.lambda1 < 0
    rep108.note = (rep108.note + "; " if rep108.note else "") + (
        f"a0 surrogate rho*f(delta+ell)/delta, delta={trail[-1][0]:.6g}"
        + ("" if rep108.sign_reached else "; sign not reached"))
    rep109 = first_eigenvalue(grid, problem.N, rho * f(U + ell) / U)
    rep109.condition = "bo_109"
    rep109.trail = [(U, rep109.lambda1)]
    rep109.sign_reached = rep109.lambda1 > 0
    rep109.note = (rep109.note + "; " if rep109.note else "") + (
        f"a_inf surrogate rho*f(U+ell)/U, U={U:.6g}" + ("" if rep109.sign_reached else "; sign not reached"))
    return {"c108": rep108, "c109": rep109, "passed": bool(rep108.sign_reached and rep109.sign_reached),
            "k": float(k), "M": grid.M}
