"""Problem instances for -Δu = ρ(x) f(u) on R^N with u -> ℓ at infinity.

Holds the sublinear nonlinearity f, the potential ρ with its radial majorant
Φ(r) = max_{|x|=r} ρ(x), and sampled certificates for the structural
hypotheses on f (quotient f(u)/u decreasing to 0; f increasing with
f(u)/u -> ∞ at the origin).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

DEFAULT_U_GRID = np.geomspace(1e-8, 1e8, 65)
TAU_F1 = 1e-6
TAU_F2 = 1e6
# log-log slope of f(u)/u that counts as a genuine power-law trend
SLOPE_TREND = 0.025
SAMPLED_NOTE = "sampled evidence on a finite grid, not a proof"


class DomainError(ValueError):
    """Raised when f is evaluated outside (0, ∞) without a continuous extension."""


def _as_vectorized(func: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a user closure so it accepts and returns float arrays."""

    def call(x):
        x = np.asarray(x, dtype=float)
        try:
            out = np.asarray(func(x), dtype=float)
            if out.shape == x.shape:
                return out
        except Exception:
            pass
        return np.vectorize(lambda t: float(func(float(t))), otypes=[float])(x)

    return call


class NonlinearitySpec:
    """The nonlinearity f: (0, ∞) -> (0, ∞).

    Three kinds are supported: ``power`` (f(u) = u**p), ``table`` (monotone
    log-log interpolation of sampled pairs, power-law extrapolation past the
    ends) and ``closure`` (any callable). ``f_at_zero`` is the continuous
    extension f(0+); it is set automatically for powers with p > 0.
    """

    def __init__(self, kind: str, *, p: float | None = None, func: Callable | None = None,
                 table_u=None, table_f=None, f_at_zero: float | None = None, label: str | None = None):
        if kind not in ("power", "table", "closure"):
            raise ValueError(f"unknown nonlinearity kind {kind!r}")
        self.kind = kind
        self.p = None if p is None else float(p)
        self.label = label
        self._func = None
        if kind == "power":
            if self.p is None:
                raise ValueError("power nonlinearity needs an exponent p")
            if f_at_zero is None and self.p > 0:
                f_at_zero = 0.0
        elif kind == "table":
            u = np.asarray(table_u, dtype=float)
            fu = np.asarray(table_f, dtype=float)
            if u.ndim != 1 or u.shape != fu.shape or u.size < 2:
                raise ValueError("table needs two equal-length 1-D arrays with >= 2 samples")
            if np.any(u <= 0) or np.any(fu <= 0):
                raise ValueError("table samples must have u > 0 and f(u) > 0")
            order = np.argsort(u)
            u, fu = u[order], fu[order]
            if np.any(np.diff(u) <= 0):
                raise ValueError("table abscissae must be distinct")
            self.table_u, self.table_f = u, fu
            self._logu = np.log(u)
            self._interp = PchipInterpolator(self._logu, np.log(fu), extrapolate=False)
            deriv = self._interp.derivative()
            self._slope_lo = float(deriv(self._logu[0]))
            self._slope_hi = float(deriv(self._logu[-1]))
        else:
            if func is None:
                raise ValueError("closure nonlinearity needs a callable")
            self._func = _as_vectorized(func)
        self.f_at_zero = None if f_at_zero is None else float(f_at_zero)

    @classmethod
    def power(cls, p: float, f_at_zero: float | None = None) -> "NonlinearitySpec":
        return cls("power", p=p, f_at_zero=f_at_zero, label=f"u^{p:g}")

    @classmethod
    def table(cls, u, fu, f_at_zero: float | None = None) -> "NonlinearitySpec":
        return cls("table", table_u=u, table_f=fu, f_at_zero=f_at_zero, label="table")

    @classmethod
    def closure(cls, func: Callable, f_at_zero: float | None = None, label: str | None = None):
        return cls("closure", func=func, f_at_zero=f_at_zero, label=label or "closure")

    def _positive(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "power":
            return u ** self.p
        if self.kind == "table":
            lu = np.log(u)
            out = np.empty_like(lu)
            lo = lu < self._logu[0]
            hi = lu > self._logu[-1]
            mid = ~(lo | hi)
            out[mid] = self._interp(lu[mid])
            out[lo] = np.log(self.table_f[0]) + self._slope_lo * (lu[lo] - self._logu[0])
            out[hi] = np.log(self.table_f[-1]) + self._slope_hi * (lu[hi] - self._logu[-1])
            return np.exp(out)
        return self._func(u)

    def __call__(self, u):
        """Vectorized evaluation; raises DomainError outside the admissible domain."""
        arr = np.asarray(u, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("f is defined on (0, ∞); got a negative argument")
        zero = arr == 0
        if np.any(zero) and self.f_at_zero is None:
            raise DomainError("f(0) requested but no continuous extension at the origin is set")
        out = np.empty_like(arr)
        pos = ~zero
        if np.any(pos):
            out[pos] = self._positive(arr[pos])
        out[zero] = self.f_at_zero if self.f_at_zero is not None else np.nan
        return float(out[0]) if scalar else out

    def local_exponent_at_zero(self) -> float:
        """Log-log slope of f near the origin (exact for powers)."""
        if self.kind == "power":
            return self.p
        u = np.array([1e-12, 1e-10])
        fu = self(u)
        return float(np.diff(np.log(fu))[0] / np.diff(np.log(u))[0])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "label": self.label, "f_at_zero": self.f_at_zero}
        if self.kind == "power":
            d["p"] = self.p
        return d


def eval_f(spec: NonlinearitySpec, u: float) -> float:
    """Evaluate f(u) for a single u > 0 (or u = 0 when f(0+) is set)."""
    value = spec(float(u))
    if not math.isfinite(value) or value <= 0 and u > 0:
        raise DomainError(f"f({u}) = {value} is not a finite positive value")
    return value


@dataclass
class HypothesisCertificate:
    hypothesis: str
    passed: bool
    monotone: bool
    limit_plausible: bool
    limit_estimate: float
    limit_slope: float
    threshold: float
    grid_min: float
    grid_max: float
    grid_points: int
    first_violation: tuple[float, float] | None = None
    note: str = SAMPLED_NOTE

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "passed": self.passed,
            "monotone": self.monotone,
            "limit_plausible": self.limit_plausible,
            "limit_estimate": self.limit_estimate,
            "limit_slope": self.limit_slope,
            "threshold": self.threshold,
            "grid": {"min": self.grid_min, "max": self.grid_max, "points": self.grid_points},
            "first_violation": None if self.first_violation is None else list(self.first_violation),
            "evidence": "sampled",
            "note": self.note,
        }


def _check_grid(u_grid) -> np.ndarray:
    u = np.asarray(u_grid, dtype=float)
    if u.ndim != 1 or u.size < 3:
        raise ValueError("u_grid needs at least 3 points")
    if np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise ValueError("u_grid must be positive and strictly increasing")
    if math.log10(u[-1] / u[0]) < 6 - 1e-12:
        raise ValueError("u_grid must span at least 6 decades")
    return u


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def certify_f1(spec: NonlinearitySpec, u_grid=None, tau: float = TAU_F1) -> HypothesisCertificate:
    """Sampled check that f(u)/u is strictly decreasing and tends to 0 at infinity.

    The limit is judged plausible when the last three quotients decrease and
    either fall below ``tau`` or follow a decaying power law (log-log slope
    below ``-SLOPE_TREND``).
    """
    u = _check_grid(DEFAULT_U_GRID if u_grid is None else u_grid)
    q = spec(u) / u
    bad = np.nonzero(np.diff(q) >= 0)[0]
    violation = None if bad.size == 0 else (float(u[bad[0]]), float(u[bad[0] + 1]))
    tail_u, tail_q = u[-3:], q[-3:]
    slope = _slope(tail_u, tail_q)
    decreasing = bool(np.all(np.diff(tail_q) < 0))
    plausible = decreasing and (tail_q[-1] < tau or slope <= -SLOPE_TREND)
    return HypothesisCertificate(
        hypothesis="f1", passed=violation is None and plausible, monotone=violation is None,
        limit_plausible=plausible, limit_estimate=float(tail_q[-1]), limit_slope=slope,
        threshold=tau, grid_min=float(u[0]), grid_max=float(u[-1]), grid_points=int(u.size),
        first_violation=violation)


def certify_f2(spec: NonlinearitySpec, u_grid=None, tau: float = TAU_F2) -> HypothesisCertificate:
    """Sampled check that f is strictly increasing and f(u)/u -> +∞ as u -> 0."""
    u = _check_grid(DEFAULT_U_GRID if u_grid is None else u_grid)
    fu = spec(u)
    q = fu / u
    bad = np.nonzero(np.diff(fu) <= 0)[0]
    violation = None if bad.size == 0 else (float(u[bad[0]]), float(u[bad[0] + 1]))
    head_u, head_q = u[:3], q[:3]
    slope = _slope(head_u, head_q)
    rising = bool(np.all(np.diff(head_q) < 0))  # larger quotients toward 0
    plausible = rising and (head_q[0] > tau or slope <= -SLOPE_TREND)
    return HypothesisCertificate(
        hypothesis="f2", passed=violation is None and plausible, monotone=violation is None,
        limit_plausible=plausible, limit_estimate=float(head_q[0]), limit_slope=slope,
        threshold=tau, grid_min=float(u[0]), grid_max=float(u[-1]), grid_points=int(u.size),
        first_violation=violation)


def sphere_directions(N: int, count: int = 200) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors in R^N.

    N = 3 uses a Fibonacci lattice whose polar axis is x_1; larger N uses a
    midpoint product grid in hyperspherical angles with about ``count`` points.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if N == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if N == 3:
        i = np.arange(count)
        z = 1.0 - (2 * i + 1) / count
        s = np.sqrt(1.0 - z * z)
        phi = i * np.pi * (3.0 - math.sqrt(5.0))
        return np.column_stack([z, s * np.cos(phi), s * np.sin(phi)])
    m = max(2, int(round(count ** (1.0 / (N - 1)))))
    polar = [np.pi * (np.arange(m) + 0.5) / m for _ in range(N - 2)]
    azim = 2 * np.pi * (np.arange(m) + 0.5) / m
    mesh = np.meshgrid(*polar, azim, indexing="ij")
    angles = [a.ravel() for a in mesh]
    pts = np.empty((angles[0].size, N))
    sin_prod = np.ones(angles[0].size)
    for j in range(N - 1):
        pts[:, j] = sin_prod * np.cos(angles[j])
        sin_prod = sin_prod * np.sin(angles[j])
    pts[:, N - 1] = sin_prod
    return pts


class PotentialSpec:
    """Nonnegative potential ρ on R^N, radial (ρ(r)) or anisotropic (ρ(x)).

    Closures may be scalar or vectorized; anisotropic closures receive points
    with the coordinate index last.
    """

    def __init__(self, N: int, *, radial: Callable | None = None, anisotropic: Callable | None = None,
                 n_directions: int = 200, label: str | None = None):
        if int(N) != N or N < 3:
            raise ValueError("dimension N must be an integer >= 3")
        if (radial is None) == (anisotropic is None):
            raise ValueError("give exactly one of radial= or anisotropic=")
        self.N = int(N)
        self.n_directions = int(n_directions)
        self.label = label
        self._radial = None if radial is None else _as_vectorized(radial)
        self._aniso = anisotropic
        self._majorant: RadialMajorant | None = None

    @property
    def is_radial(self) -> bool:
        return self._radial is not None

    @staticmethod
    def _nonnegative(values: np.ndarray) -> np.ndarray:
        if np.any(values < 0) or np.any(np.isnan(values)):
            raise ValueError("potential must be nonnegative at every evaluated point")
        return values

    def radial(self, r):
        """ρ(r) for a radial potential."""
        if not self.is_radial:
            raise TypeError("potential is anisotropic; use the radial majorant")
        return self._nonnegative(self._radial(np.asarray(r, dtype=float)))

    def __call__(self, x):
        """ρ(x) for points x of shape (..., N)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.N:
            raise ValueError(f"points must have last dimension {self.N}")
        if self.is_radial:
            return self.radial(np.linalg.norm(x, axis=-1))
        flat = x.reshape(-1, self.N)
        try:
            vals = np.asarray(self._aniso(flat), dtype=float)
            if vals.shape != (flat.shape[0],):
                raise ValueError
        except Exception:
            vals = np.array([float(self._aniso(row)) for row in flat])
        return self._nonnegative(vals).reshape(x.shape[:-1])

    def majorant(self) -> "RadialMajorant":
        if self._majorant is None:
            self._majorant = RadialMajorant(self)
        return self._majorant

    def is_degenerate(self, radii=None) -> bool:
        """True when ρ vanishes at every sampled radius (ρ ≡ 0 on the sample)."""
        r = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 61)]) if radii is None else radii
        return bool(np.all(self.majorant()(r) == 0))

    @classmethod
    def rational(cls, N: int, p: float, scale: float = 1.0) -> "PotentialSpec":
        """ρ(r) = scale / (1 + r^p)."""
        return cls(N, radial=lambda r: scale / (1.0 + np.asarray(r) ** p), label=f"{scale:g}/(1+r^{p:g})")

    @classmethod
    def zero(cls, N: int) -> "PotentialSpec":
        return cls(N, radial=lambda r: np.zeros_like(np.asarray(r, dtype=float)), label="0")


class RadialMajorant:
    """Φ(r) = max_{|x|=r} ρ(x), exact for radial ρ and a sampled lower estimate otherwise.

    Values for anisotropic potentials are cached per radius; writers take a
    lock, readers do not.
    """

    def __init__(self, potential: PotentialSpec):
        self.potential = potential
        self.N = potential.N
        self.cache: dict[float, float] = {}
        self._lock = threading.Lock()
        self.directions = None if potential.is_radial else sphere_directions(potential.N, potential.n_directions)

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if np.any(arr < 0):
            raise ValueError("radius must be nonnegative")
        if self.potential.is_radial:
            out = self.potential.radial(arr)
        else:
            out = np.empty_like(arr)
            missing = [i for i, rv in enumerate(arr) if float(rv) not in self.cache]
            for i, rv in enumerate(arr):
                hit = self.cache.get(float(rv))
                if hit is not None:
                    out[i] = hit
            if missing:
                rm = arr[missing]
                pts = rm[:, None, None] * self.directions[None, :, :]
                vals = self.potential(pts).max(axis=1)
                out[missing] = vals
                with self._lock:
                    for rv, val in zip(rm, vals):
                        self.cache[float(rv)] = float(val)
        return float(out[0]) if scalar else out


def radial_majorant(pot: PotentialSpec, r: float) -> float:
    return pot.majorant()(float(r))


@dataclass
class ProblemSpec:
    """One instance: potential, nonlinearity and the limit ℓ at infinity."""

    potential: PotentialSpec
    nonlinearity: NonlinearitySpec
    ell: float = 0.0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.ell >= 0:
            raise ValueError("asymptote ℓ must be >= 0")
        self.ell = float(self.ell)

    @property
    def N(self) -> int:
        return self.potential.N

    @property
    def regime(self) -> str:
        return "ell_positive" if self.ell > 0 else "ell_zero"

    def certificates(self, u_grid=None) -> dict[str, HypothesisCertificate]:
        certs = {"f1": certify_f1(self.nonlinearity, u_grid)}
        if self.ell == 0:
            certs["f2"] = certify_f2(self.nonlinearity, u_grid)
        return certs
