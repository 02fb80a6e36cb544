"""Radial supersolution built from -Δw = Φ(r), w -> 0 at infinity.

w(r) = K - ∫_0^r ζ^{1-N} ∫_0^ζ σ^{N-1}Φ(σ) dσ dζ and v solves
G(v - ℓ) = c·w(r) with G(x) = ∫_0^x t / f(t + ℓ) dt, where the scale c
satisfies K·c <= G(c).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .conditions import R_MAX, check_rho1
from .problem import NonlinearitySpec, ProblemSpec, RadialMajorant
from .quadrature import decade_edges, loglog_slope, panel_integrals, power_tail, quad_panels

TIGHT_ABS = 1e-14
TIGHT_REL = 1e-12
K_AGREEMENT = 1e-6
BOUNDARY_TERM_RATIO = 1e-6
SCALE_GRID = np.geomspace(1e-6, 1e12, 73)

_GRADE = 4
_GN, _GW = np.polynomial.legendre.leggauss(80)
_GU = 0.5 * (_GN + 1.0)
_GWU = 0.5 * _GW


class BarrierError(RuntimeError):
    pass


def _quad(g, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return quad_panels(g, a, b, epsabs=TIGHT_ABS, epsrel=TIGHT_REL, limit=400)[0]


def w_integral_by_parts(phi: RadialMajorant, N: int, r: float) -> float:
    """(1/(N-2)) (-r^{2-N} ∫_0^r σ^{N-1}Φ + ∫_0^r ζΦ): single quadratures only."""
    if r == 0:
        return 0.0
    mass = _quad(lambda s: s ** (N - 1) * phi(s), 0.0, r)
    first = _quad(lambda s: s * phi(s), 0.0, r)
    return (-(r ** (2 - N)) * mass + first) / (N - 2)


class _NestedIntegrand:
    """ζ^{1-N} ∫_0^ζ σ^{N-1}Φ, with the inner integral restarted from cached panel edges."""

    def __init__(self, phi, N, edges):
        self.phi, self.N = phi, N
        self.edges = list(edges)
        self.mass_at = [0.0]
        for a, b in zip(self.edges[:-1], self.edges[1:]):
            self.mass_at.append(self.mass_at[-1] + self._inner(a, b))

    def _inner(self, a, b):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return integrate.quad(lambda s: s ** (self.N - 1) * self.phi(s), a, b,
                                  epsabs=TIGHT_ABS, epsrel=TIGHT_REL, limit=200)[0]

    def mass(self, z):
        j = max(0, np.searchsorted(self.edges, z, side="right") - 1)
        j = min(j, len(self.edges) - 1)
        return self.mass_at[j] + (self._inner(self.edges[j], z) if z > self.edges[j] else 0.0)

    def __call__(self, z):
        if z == 0:
            return 0.0
        return z ** (1 - self.N) * self.mass(z)


def w_integral_nested(phi: RadialMajorant, N: int, r: float) -> float:
    """Brute-force nested quadrature of ∫_0^r ζ^{1-N} ∫_0^ζ σ^{N-1}Φ dσ dζ."""
    if r == 0:
        return 0.0
    g = _NestedIntegrand(phi, N, decade_edges(0.0, r))
    return _quad(g, 0.0, r)


@dataclass
class KResult:
    K: float
    K_nested: float
    discrepancy: float
    boundary_term: float
    boundary_slope: float | None
    degenerate: bool
    rho1_verdict: str
    zeta_phi_tail: float
    r_max: float

    def to_dict(self) -> dict:
        return {
            "K": self.K, "K_nested": self.K_nested, "discrepancy": self.discrepancy,
            "boundary_term": self.boundary_term,
            "boundary_slope": None if self.boundary_slope is None or not math.isfinite(self.boundary_slope)
            else self.boundary_slope,
            "degenerate": self.degenerate, "rho1_verdict": self.rho1_verdict, "r_max": self.r_max,
        }


def compute_K(phi: RadialMajorant, N: int, r_max: float = R_MAX) -> KResult:
    """K = ∫_0^∞ ζ^{1-N} ∫_0^ζ σ^{N-1}Φ, from the by-parts limit (1/(N-2))∫_0^∞ ζΦ.

    The nested double integral (to ``r_max`` plus a power-law tail) is the
    cross-check; the two must agree to 1e-6 relative. The by-parts boundary
    term r^{2-N}∫_0^r σ^{N-1}Φ at ``r_max`` must either be below 1e-6·K or
    be visibly decaying.
    """
    verdict = check_rho1(phi, r_max)
    if verdict.verdict != "finite":
        raise BarrierError(f"(rho1) integral is {verdict.verdict}; no barrier can be built")
    zphi = _quad(lambda s: s * phi(s), 0.0, r_max)
    tail = verdict.tail_estimate
    K = (zphi + tail) / (N - 2)
    if K == 0:
        return KResult(0.0, 0.0, 0.0, 0.0, None, True, verdict.verdict, 0.0, r_max)

    mass = _quad(lambda s: s ** (N - 1) * phi(s), 0.0, r_max)
    boundary = r_max ** (2 - N) * mass
    b_slope = None
    if boundary >= BOUNDARY_TERM_RATIO * K:
        b_slope = loglog_slope(lambda r: r ** (2 - N) * _quad(lambda s: s ** (N - 1) * phi(s), 0.0, r),
                               r_max, n=6)[0]
        if b_slope is None or not b_slope < -0.1:
            raise BarrierError(f"by-parts boundary term {boundary:.3e} does not vanish at r_max")

    nested_g = _NestedIntegrand(phi, N, decade_edges(0.0, r_max))
    nested = _quad(nested_g, 0.0, r_max)
    slope, _, zero = loglog_slope(nested_g, r_max)
    nested_tail = 0.0 if zero else power_tail(nested_g(r_max), r_max, slope if slope is not None else 0.0)
    K_nested = nested + nested_tail
    disc = abs(K_nested - K) / K
    if disc > K_AGREEMENT:
        raise BarrierError(f"nested and by-parts K disagree: {K_nested!r} vs {K!r} (rel {disc:.2e})")
    return KResult(K, K_nested, disc, boundary, b_slope, False, verdict.verdict, tail, r_max)


class AntiderivativeG:
    """G(x) = ∫_0^x t / f(t + ℓ) dt.

    ``scalar`` uses adaptive quadrature (algebraic endpoint weight t^{1-q}
    when ℓ = 0, q the local exponent of f at 0); ``__call__`` is the
    vectorized graded Gauss rule t = x·u^4 used for bulk inversion.
    """

    def __init__(self, f: NonlinearitySpec, ell: float):
        self.f, self.ell = f, float(ell)
        self.q0 = f.local_exponent_at_zero() if self.ell == 0 else None

    def integrand(self, t):
        return t / self.f(t + self.ell)

    def scalar(self, x: float) -> float:
        x = float(x)
        if x <= 0:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            if self.ell > 0:
                return integrate.quad(self.integrand, 0.0, x, epsabs=0.0, epsrel=1e-13, limit=200)[0]
            q = self.q0
            smooth = lambda t: (max(t, 1e-300)) ** q / self.f(max(t, 1e-300))
            return integrate.quad(smooth, 0.0, x, weight="alg", wvar=(1.0 - q, 0.0),
                                  epsabs=0.0, epsrel=1e-13, limit=200)[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        t = flat[:, None] * _GU[None, :] ** _GRADE
        jac = _GRADE * flat[:, None] * _GU[None, :] ** (_GRADE - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(t > 0, t / self.f(np.maximum(t, 0.0) + self.ell) if self.ell > 0
                            else t / self._f_pos(t), 0.0)
        out = (vals * jac) @ _GWU
        out[flat <= 0] = 0.0
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def _f_pos(self, t):
        out = np.ones_like(t)
        pos = t > 0
        out[pos] = self.f(t[pos])
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return x / self.f(x + self.ell)


def choose_scale(f: NonlinearitySpec, ell: float, K: float, G: AntiderivativeG | None = None):
    """Smallest grid point with G(x) >= K·x, bisected to the crossing x1; returns (2·x1, x1, degenerate)."""
    G = G or AntiderivativeG(f, ell)
    if K <= 0:
        return float(SCALE_GRID[0]), 0.0, True
    h = lambda x: G.scalar(x) - K * x
    prev = 0.0
    for x in SCALE_GRID:
        if h(x) >= 0:
            lo = prev if prev > 0 else x * 1e-12
            if h(lo) >= 0:
                x1 = lo
            else:
                x1 = optimize.bisect(h, lo, x, xtol=1e-300, rtol=1e-7, maxiter=500)
            return 2.0 * x1, x1, False
        prev = x
    raise BarrierError("no admissible scale below 1e12: f is too close to linear for the numeric range")


class Barrier:
    """The pair (w, v) with constants K and c; evaluators are immutable after construction."""

    def __init__(self, problem: ProblemSpec, kres: KResult, c: float, x1: float, G: AntiderivativeG,
                 scale_degenerate: bool):
        self.problem = problem
        self.phi = problem.potential.majorant()
        self.N = problem.N
        self.ell = problem.ell
        self.kres = kres
        self.K = kres.K
        self.c = c
        self.x1 = x1
        self.G = G
        self.degenerate = kres.degenerate or scale_degenerate
        self._zphi_total = kres.K * (self.N - 2)

    # scalar evaluators -------------------------------------------------
    def w(self, r: float) -> float:
        """w(r) = K - by-parts integral; w(0) = K exactly."""
        if r == 0 or self.K == 0:
            return self.K
        return self.K - w_integral_by_parts(self.phi, self.N, r)

    def v(self, r: float) -> float:
        """Solve G(v - ℓ) = c·w(r) by bisection to 1e-12 absolute."""
        target = self.c * self.w(r)
        if target <= 0:
            return self.ell
        x = optimize.bisect(lambda s: self.G.scalar(s) - target, 0.0, self.c, xtol=1e-12, maxiter=500)
        return self.ell + x

    # vectorized profiles ---------------------------------------------
    def w_profile(self, r) -> np.ndarray:
        """w on an array of radii via w = (1/(N-2))(r^{2-N} m(r) + ∫_r^∞ ζΦ) (no cancellation)."""
        r = np.asarray(r, dtype=float)
        order = np.argsort(r)
        rs = r[order]
        if self.K == 0:
            return np.zeros_like(r)
        N = self.N
        mass = np.cumsum(panel_integrals(lambda s: s ** (N - 1) * self.phi(s), rs))
        pieces = panel_integrals(lambda s: s * self.phi(s), rs)
        beyond = self._zphi_beyond(rs[-1])
        # ∫_{r_i}^∞ ζΦ accumulated from the far end
        far = np.concatenate([np.cumsum(pieces[:0:-1])[::-1], [0.0]]) + beyond
        with np.errstate(divide="ignore", invalid="ignore"):
            near = np.where(rs > 0, rs ** (2.0 - N) * mass, 0.0)
        w = (near + far) / (N - 2)
        w[rs == 0] = self.K
        out = np.empty_like(w)
        out[order] = w
        return out

    def _zphi_beyond(self, r: float) -> float:
        if r >= self.kres.r_max:
            g = lambda s: s * self.phi(s)
            slope = loglog_slope(g, r)[0]
            return power_tail(g(r), r, slope if slope is not None else 0.0)
        return _quad(lambda s: s * self.phi(s), r, self.kres.r_max) + self.kres.zeta_phi_tail

    def v_profile(self, r) -> np.ndarray:
        """v on an array of radii by vectorized bisection on the graded-Gauss G."""
        target = self.c * self.w_profile(r)
        lo = np.zeros_like(target)
        hi = np.full_like(target, self.c)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.G(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) <= 1e-13 * max(1.0, self.c):
                break
        x = 0.5 * (lo + hi)
        x[target <= 0] = 0.0
        return self.ell + x

    def to_dict(self) -> dict:
        d = self.kres.to_dict()
        d.update({"ell": self.ell, "scale_c": self.c, "crossing_x1": self.x1, "degenerate": self.degenerate,
                  "G_at_c": self.G.scalar(self.c) if self.c > 0 else 0.0, "K_times_c": self.K * self.c})
        return d


def build_barrier(problem: ProblemSpec, r_max: float = R_MAX) -> Barrier:
    """Compute K, the scale c and the evaluators for w and v."""
    phi = problem.potential.majorant()
    kres = compute_K(phi, problem.N, r_max)
    G = AntiderivativeG(problem.nonlinearity, problem.ell)
    c, x1, degenerate = choose_scale(problem.nonlinearity, problem.ell, kres.K, G)
    return Barrier(problem, kres, c, x1, G, degenerate)


def eval_w(barrier: Barrier, r: float) -> float:
    return barrier.w(r)


def eval_v(barrier: Barrier, r: float) -> float:
    return barrier.v(r)
