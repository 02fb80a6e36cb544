"""Quadrature helpers shared by the conditions and barrier modules."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

EPSABS = 1e-10
EPSREL = 1e-8

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def decade_edges(a: float, b: float) -> list[float]:
    """Panel edges [a, ..., b] split at powers of ten (from 1 upward when a = 0)."""
    if b <= a:
        return [a, b]
    p = 0 if a == 0 else math.floor(math.log10(a)) + 1
    edges = [a]
    while 10.0 ** p < b:
        if 10.0 ** p > a:
            edges.append(10.0 ** p)
        p += 1
    edges.append(b)
    return edges


def quad_panels(g, a: float, b: float, epsabs: float = EPSABS, epsrel: float = EPSREL,
                limit: int = 200) -> tuple[float, float]:
    """Adaptive quadrature of a scalar integrand over [a, b] on decade panels."""
    total, err = 0.0, 0.0
    edges = decade_edges(a, b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(g, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit)
            total += val
            err += e
    return total, err


def loglog_slope(g, r_hi: float, lo_factor: float = 0.25, n: int = 16):
    """Least-squares slope of log g against log r on [lo_factor*r_hi, r_hi].

    Returns (slope, monotone, all_zero). ``slope`` is -inf when g vanishes on
    the window and None when g has mixed zero/positive samples.
    """
    r = np.geomspace(lo_factor * r_hi, r_hi, n)
    vals = np.array([g(float(x)) for x in r])
    if np.all(vals == 0):
        return -math.inf, True, True
    if np.any(vals <= 0):
        return None, False, False
    d = np.diff(vals)
    monotone = bool(np.all(d <= 0) or np.all(d >= 0))
    slope = float(np.polyfit(np.log(r), np.log(vals), 1)[0])
    return slope, monotone, False


def power_tail(g_at_r: float, r: float, slope: float) -> float:
    """∫_r^∞ of a power law through (r, g_at_r) with the given slope (< -1)."""
    if not slope < -1:
        return math.inf
    if g_at_r == 0:
        return 0.0
    return g_at_r * r / (-(slope + 1.0))


def panel_integrals(func, r_sorted: np.ndarray, max_panel: float = 0.05) -> np.ndarray:
    """Integrals of ``func`` over [0, r_0], [r_0, r_1], ... by composite Gauss-Legendre.

    ``func`` must be vectorized. Intervals longer than ``max_panel * max(1, a)``
    are subdivided.
    """
    r = np.asarray(r_sorted, dtype=float)
    edges = np.concatenate([[0.0], r])
    lo_list, hi_list, owner = [], [], []
    for i in range(r.size):
        a, b = edges[i], edges[i + 1]
        if b <= a:
            continue
        pieces = max(1, int(math.ceil((b - a) / (max_panel * max(1.0, a)))))
        sub = np.linspace(a, b, pieces + 1)
        lo_list.append(sub[:-1])
        hi_list.append(sub[1:])
        owner.append(np.full(pieces, i))
    if not lo_list:
        return np.zeros(r.size)
    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    own = np.concatenate(owner)
    half = 0.5 * (hi - lo)
    pts = 0.5 * (lo + hi)[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    return np.bincount(own, weights=half * (vals @ _GL_WEIGHTS), minlength=r.size)


def cumulative_gauss(func, r_sorted: np.ndarray, max_panel: float = 0.05) -> np.ndarray:
    """Cumulative ∫_0^{r_i} func for sorted radii."""
    return np.cumsum(panel_integrals(func, r_sorted, max_panel))
