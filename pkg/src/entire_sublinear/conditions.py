"""Decay conditions on the radial majorant Φ.

Finite-cutoff quadrature plus a log-log tail classifier for ∫ rΦ and
∫ r^{N-1}Φ, Kato-class profiles of the derived radial functions ψ, and the
Newton-potential boundedness test for ρ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .problem import PotentialSpec, RadialMajorant
from .quadrature import EPSABS, EPSREL, loglog_slope, power_tail, quad_panels

R_MAX = 1e6
DELTA_TAIL = 0.1
TAU_KATO = 1e-3
# per-decade growth ratio treated as a logarithmically divergent tail
LOG_TAIL_RATIO = 0.95
DEFAULT_ALPHAS = tuple(np.geomspace(1.0, 1e-4, 9))
DEFAULT_CENTERS = tuple(np.concatenate([[0.0], np.geomspace(1e-2, 1e2, 16)]))


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


@dataclass
class IntegralVerdict:
    value: float
    tail_exponent: float | None
    verdict: str
    cutoff: float
    quadrature_error_estimate: float
    tail_estimate: float = 0.0
    integrand: str = ""

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "tail_exponent": _finite_or_none(self.tail_exponent),
            "verdict": self.verdict,
            "cutoff": self.cutoff,
            "quadrature_error_estimate": self.quadrature_error_estimate,
            "tail_estimate": _finite_or_none(self.tail_estimate),
            "integrand": self.integrand,
        }


def _classify(g, r_max: float, delta: float):
    slope, monotone, zero = loglog_slope(g, r_max)
    if zero:
        return "finite", slope, 0.0
    if slope is None or not monotone:
        return "inconclusive", slope, math.nan
    if slope < -1 - delta:
        return "finite", slope, power_tail(g(r_max), r_max, slope)
    if slope >= -1 + delta:
        return "divergent", slope, math.inf
    return "inconclusive", slope, math.nan


def _integral_verdict(g, r_max: float, delta: float, name: str) -> IntegralVerdict:
    value, err = quad_panels(g, 0.0, r_max)
    verdict, slope, tail = _classify(g, r_max, delta)
    return IntegralVerdict(value=max(value, 0.0), tail_exponent=slope, verdict=verdict, cutoff=r_max,
                           quadrature_error_estimate=err, tail_estimate=tail, integrand=name)


def check_rho1(phi: RadialMajorant, r_max: float = R_MAX, delta: float = DELTA_TAIL) -> IntegralVerdict:
    """Classify ∫_0^∞ rΦ(r) dr as finite, divergent or inconclusive."""
    return _integral_verdict(lambda r: r * phi(r), r_max, delta, "r*Phi(r)")


def check_rho2(phi: RadialMajorant, N: int, r_max: float = R_MAX, delta: float = DELTA_TAIL) -> IntegralVerdict:
    """Classify ∫_0^∞ r^{N-1}Φ(r) dr."""
    if N < 3:
        raise ValueError("N must be >= 3")
    return _integral_verdict(lambda r: r ** (N - 1) * phi(r), r_max, delta, f"r^{N - 1}*Phi(r)")


@dataclass
class KatoProfile:
    alphas: list[float]
    sup_estimates: list[float]
    trend: str
    variant: str
    kernel: str
    argmax_centers: list[float] = field(default_factory=list)
    translated_estimates: list[float] | None = None

    def __post_init__(self):
        if len(self.alphas) != len(self.sup_estimates):
            raise ValueError("alphas and sup_estimates differ in length")

    def rate(self) -> float | None:
        """Log-log slope of the sup estimates against α (how fast they vanish)."""
        a = np.asarray(self.alphas)
        s = np.asarray(self.sup_estimates)
        ok = s > 0
        if ok.sum() < 2:
            return None
        return float(np.polyfit(np.log(a[ok]), np.log(s[ok]), 1)[0])

    def to_dict(self) -> dict:
        return {
            "value": float(self.sup_estimates[-1]),
            "tail_exponent": self.rate(),
            "verdict": self.trend,
            "variant": self.variant,
            "kernel": self.kernel,
            "alphas": [float(a) for a in self.alphas],
            "sup_estimates": [float(s) for s in self.sup_estimates],
            "argmax_centers": [float(c) for c in self.argmax_centers],
            "translated_estimates": None if self.translated_estimates is None
            else [float(s) for s in self.translated_estimates],
        }


def _cap_fraction(t, N: int):
    """Normalized measure of {θ ∈ S^{N-1}: θ·e >= t}."""
    t = np.clip(t, -1.0, 1.0)
    half = 0.5 * special.betainc((N - 1) / 2.0, 0.5, 1.0 - t * t)
    return np.where(t >= 0, half, 1.0 - half)


def _psi_factory(phi: RadialMajorant, N: int, variant: str):
    if variant == "rho1":
        return lambda s: s ** (N - 3) * phi(s)
    if variant == "rho2":
        return lambda s: phi(s) / s
    raise ValueError("variant must be 'rho1' or 'rho2'")


def _printed_kernel(phi, N, variant, d, alpha):
    # ∫_{|y-x|<=α} c_N |y|^{2-N} ψ(|y|) dy reduced to a radial integral weighted by
    # the fraction of the sphere |y| = s lying inside the ball.
    if variant == "rho1":
        s_psi = lambda s: s ** (N - 2) * phi(s)
    else:
        s_psi = lambda s: phi(s)
    scale = 1.0 / (N - 2)
    if d == 0:
        val, _ = integrate.quad(s_psi, 0.0, alpha, epsabs=EPSABS * 1e-2, epsrel=EPSREL, limit=200)
        return scale * val
    lo, hi = max(0.0, d - alpha), d + alpha

    def g(s):
        if s == 0:
            return s_psi(s) if alpha > d else 0.0
        t = (s * s + d * d - alpha * alpha) / (2 * s * d)
        return s_psi(s) * float(_cap_fraction(t, N))

    pts = [abs(alpha - d)] if lo < abs(alpha - d) < hi else None
    val, _ = integrate.quad(g, lo, hi, points=pts, epsabs=EPSABS * 1e-2, epsrel=EPSREL, limit=200)
    return scale * val


def _translated_kernel(psi, N, d, alpha, n=48):
    # ∫_{|z|<=α} c_N |z|^{2-N} ψ(|x+z|) dz by product Gauss quadrature in (|z|, cos angle)
    a = (N - 3) / 2.0
    u, wu = special.roots_jacobi(n, a, a)
    wu = wu / wu.sum()
    breaks = sorted({0.0, alpha} | ({d} if 0 < d < alpha else set()))
    x, wx = np.polynomial.legendre.leggauss(n)
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        rr = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
        dist = np.sqrt(np.maximum(d * d + rr[:, None] ** 2 + 2 * d * rr[:, None] * u[None, :], 1e-300))
        avg = (psi(dist.ravel()).reshape(dist.shape) * wu[None, :]).sum(axis=1)
        total += 0.5 * (hi - lo) * float(np.sum(wx * rr * avg))
    return total / (N - 2)


def kato_profile(phi: RadialMajorant, N: int, variant: str = "rho1", alphas=None, centers=None,
                 kernel: str = "printed", tau: float = TAU_KATO, with_translated: bool = False) -> KatoProfile:
    """Sup over sample centers of the Kato integrals for each radius α.

    ``kernel="printed"`` integrates E(y)|ψ(y)| (fundamental solution centered
    at the origin); ``"translated"`` uses E(x - y). Both reduce to radial or
    two-dimensional quadrature because ψ is radial.
    """
    alphas = [float(a) for a in (DEFAULT_ALPHAS if alphas is None else alphas)]
    if any(a <= 0 for a in alphas) or any(b >= a for a, b in zip(alphas[:-1], alphas[1:])):
        raise ValueError("alphas must be positive and strictly decreasing")
    centers = [float(c) for c in (DEFAULT_CENTERS if centers is None else centers)]
    psi = _psi_factory(phi, N, variant)

    def sup_for(kind):
        sups, where = [], []
        for alpha in alphas:
            if kind == "printed":
                vals = [_printed_kernel(phi, N, variant, d, alpha) for d in centers]
            else:
                vals = [_translated_kernel(psi, N, d, alpha) for d in centers]
            j = int(np.argmax(vals))
            sups.append(max(0.0, float(vals[j])))
            where.append(centers[j])
        return sups, where

    sups, where = sup_for(kernel)
    other = None
    if with_translated:
        other = sup_for("printed" if kernel == "translated" else "translated")[0]
    s = np.asarray(sups)
    if np.all(s == 0):
        trend = "vanishing"
    elif np.any(np.diff(s) > 1e-12 * max(1.0, s.max())):
        trend = "inconclusive"
    elif s[-1] < tau:
        trend = "vanishing"
    else:
        trend = "non-vanishing"
    return KatoProfile(alphas=alphas, sup_estimates=sups, trend=trend, variant=variant, kernel=kernel,
                       argmax_centers=where, translated_estimates=other)


@dataclass
class NewtonPotentialBound:
    sup_estimate: float
    verdict: str
    tail: IntegralVerdict
    radii: list[float]
    values: list[float]
    stabilized: bool
    log_tail: bool
    majorant_only: bool

    def to_dict(self) -> dict:
        return {
            "value": _finite_or_none(self.sup_estimate),
            "tail_exponent": _finite_or_none(self.tail.tail_exponent),
            "verdict": self.verdict,
            "stabilized": self.stabilized,
            "log_tail": self.log_tail,
            "majorant_only": self.majorant_only,
        }


def _newton_values(rho, N: int, radii: np.ndarray, r_max: float, tail: float) -> np.ndarray:
    """|S^{N-1}| (r^{2-N} ∫_0^r s^{N-1}ρ + ∫_r^∞ sρ) at each radius (sphere-averaged kernel)."""
    area = sphere_area(N)
    inner = lambda s: s ** (N - 1) * rho(s)
    outer = lambda s: s * rho(s)
    out = []
    for r in radii:
        far, _ = quad_panels(outer, r, r_max)
        far += tail
        if r > 0:
            near, _ = quad_panels(inner, 0.0, r)
            out.append(area * (r ** (2 - N) * near + far))
        else:
            out.append(area * far)
    return np.asarray(out)


def _log_divergent(g, r_max: float) -> bool:
    # increments of ∫ g over the last three decades stay (nearly) constant for a 1/r tail
    tops = [r_max / 100.0, r_max / 10.0, r_max]
    inc = [quad_panels(g, t / 10.0, t)[0] for t in tops]
    if min(inc) <= 0:
        return False
    return inc[1] / inc[0] >= LOG_TAIL_RATIO and inc[2] / inc[1] >= LOG_TAIL_RATIO


def newton_potential_bound(pot: PotentialSpec, r_max: float = R_MAX, delta: float = DELTA_TAIL,
                           radii=None) -> NewtonPotentialBound:
    """Estimate sup_x ∫ ρ(y)|x-y|^{2-N} dy for radial ρ (Φ majorant for anisotropic ρ).

    The tail ∫ sρ(s) ds is classified like the (ρ1) integral; a slope inside the
    uncertainty band is resolved as unbounded when the per-decade increments do
    not shrink (logarithmic divergence). For anisotropic ρ the Φ bound only
    certifies boundedness; an unbounded majorant gives ``inconclusive``.
    """
    phi = pot.majorant()
    N = pot.N
    tail = check_rho1(phi, r_max, delta)
    g = lambda r: r * phi(r)
    log_tail = False
    if tail.verdict == "inconclusive" and tail.tail_exponent is not None and math.isfinite(tail.tail_exponent):
        log_tail = _log_divergent(g, r_max)
    radii = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 25)]) if radii is None else np.asarray(radii, float)
    if tail.verdict == "finite":
        vals = _newton_values(phi, N, radii, r_max, tail.tail_estimate)
        coarse_tail = _classify(g, r_max / 10.0, delta)
        stabilized = False
        if coarse_tail[0] == "finite":
            coarse = _newton_values(phi, N, radii, r_max / 10.0, coarse_tail[2])
            sup, sup_c = float(vals.max()), float(coarse.max())
            stabilized = abs(sup - sup_c) <= 1e-3 * max(sup, 1e-300) or sup == sup_c
        verdict = "bounded" if stabilized else "inconclusive"
        sup_estimate = float(vals.max())
    else:
        vals = np.full(radii.shape, math.inf)
        sup_estimate = math.inf
        stabilized = False
        if tail.verdict == "divergent" or log_tail:
            verdict = "inconclusive" if not pot.is_radial else "unbounded"
        else:
            verdict = "inconclusive"
    return NewtonPotentialBound(sup_estimate=sup_estimate, verdict=verdict, tail=tail,
                                radii=[float(r) for r in radii], values=[float(v) for v in vals],
                                stabilized=stabilized, log_tail=log_tail, majorant_only=not pot.is_radial)
