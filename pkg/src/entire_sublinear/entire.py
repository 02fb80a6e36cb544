"""Expanding-ball construction of the entire solution and its diagnostics.

All balls share one node spacing h, so every radial grid is a prefix of the
largest one and profiles at different k compare nodewise without
interpolation.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .ball import BallSolution, RadialGrid, radial_laplacian, solve_ball
from .barrier import Barrier, build_barrier
from .conditions import sphere_area
from .problem import ProblemSpec

log = logging.getLogger(__name__)

THREADS_ENV = "ENTIRE_SUBLINEAR_THREADS"
DEFAULT_TOL_ENTIRE = 1e-4
LOG_FLOOR = 1e-10
MIN_FIT_POINTS = 5


class SandwichViolation(RuntimeError):
    def __init__(self, message, certificates=None):
        super().__init__(message)
        self.certificates = certificates or []


@dataclass(frozen=True)
class Schedule:
    r_obs: float = 5.0
    k0: float | None = None
    growth: float = 1.5
    k_max: float | None = None

    def __post_init__(self):
        if self.k0 is None:
            object.__setattr__(self, "k0", 4.0 * self.r_obs)
        if self.k_max is None:
            object.__setattr__(self, "k_max", 128.0 * self.r_obs)
        if not self.r_obs > 0:
            raise ValueError("observation radius must be positive")
        if not self.k0 > self.r_obs:
            raise ValueError("k0 must exceed the observation radius")
        if not self.growth > 1:
            raise ValueError("growth factor must exceed 1")
        # k_max < k0 * growth is a single-ball schedule that can never report convergence
        if self.k_max < self.k0:
            raise ValueError("k_max must be at least k0")

    def node_counts(self, h: float) -> list[int]:
        """Ball sizes M_j with k_j = M_j h, snapped from k0 * growth^j, ending at k_max."""
        m_max = int(round(self.k_max / h))
        counts = []
        j = 0
        while True:
            m = int(round(self.k0 * self.growth**j / h))
            if m > m_max:
                break
            if not counts or m > counts[-1]:
                counts.append(m)
            j += 1
        if counts[-1] < m_max:
            counts.append(m_max)
        return counts

    def shifted(self, factor: float = 1.5) -> "Schedule":
        k0 = self.k0 * factor
        return replace(self, k0=k0, k_max=max(self.k_max, k0 * self.growth))

    def to_dict(self) -> dict:
        return {"r_obs": self.r_obs, "k0": self.k0, "growth": self.growth, "k_max": self.k_max}


@dataclass
class EntireSolution:
    problem: ProblemSpec
    schedule: Schedule
    h: float
    profiles: list[BallSolution]
    converged: bool
    certificates: list[dict]
    trail: list[float]
    tol: float
    tol_entire: float
    v_nodes: np.ndarray | None
    override: bool = False
    start: str = "warm"
    decay: dict = field(default_factory=dict)

    @property
    def final(self) -> BallSolution:
        return self.profiles[-1]

    @property
    def r(self) -> np.ndarray:
        return self.final.r

    @property
    def u(self) -> np.ndarray:
        return self.final.u

    @property
    def obs_count(self) -> int:
        return int(math.floor(self.schedule.r_obs / self.h + 1e-9)) + 1

    @property
    def limit_profile(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.obs_count
        return self.r[:n], self.u[:n]

    def to_dict(self) -> dict:
        return {"converged": self.converged, "h": self.h, "tol": self.tol, "tol_entire": self.tol_entire,
                "schedule": self.schedule.to_dict(), "k_values": [float(p.k) for p in self.profiles],
                "certificates": self.certificates, "trail": self.trail, "override": self.override,
                "start": self.start, "decay": self.decay}


def _extend(prev: np.ndarray, size: int, fill: float) -> np.ndarray:
    out = np.full(size, fill)
    out[:prev.size] = prev
    return out


def solve_entire(problem: ProblemSpec, schedule: Schedule, tol_entire: float = DEFAULT_TOL_ENTIRE, *,
                 M0: int = 256, tol: float = 1e-8, start: str = "warm", barrier: Barrier | None = None,
                 boundary=None, h: float | None = None, enforce: bool = True,
                 min_radius: float = 0.0) -> EntireSolution:
    """Solve on the balls of ``schedule`` and stop once the observation window settles.

    ``start``: "warm" starts each ball from the previous iterate extended by ℓ
    (the first from the barrier), "barrier" starts every ball from v.
    ``boundary``: callable k -> boundary value, replacing ℓ (manufactured tests).
    ``min_radius``: keep expanding after convergence until the ball reaches it.
    """
    if start not in ("warm", "barrier"):
        raise ValueError("start must be 'warm' or 'barrier'")
    if not tol_entire > 0 or not tol > 0:
        raise ValueError("tolerances must be positive")
    ell = problem.ell
    h = float(h) if h is not None else schedule.k0 / M0
    counts = schedule.node_counts(h)
    if barrier is None:
        barrier = build_barrier(problem)
    all_r = np.arange(counts[-1] + 1) * h
    phi = problem.potential.majorant()
    rho_all = phi(all_r)
    if barrier.degenerate:
        v_all = np.full(all_r.size, ell + barrier.c)
    else:
        v_all = barrier.v_profile(all_r)
    override = boundary is not None
    n_obs = int(math.floor(schedule.r_obs / h + 1e-9)) + 1
    slack = 10.0 * tol

    profiles: list[BallSolution] = []
    certs: list[dict] = []
    trail: list[float] = []
    converged = False
    for m in counts:
        grid = RadialGrid(m * h, m)
        bval = float(boundary(grid.k)) if override else None
        if not profiles or start == "barrier":
            init = v_all[:m + 1].copy()
        else:
            init = _extend(profiles[-1].u, m + 1, ell if bval is None else bval)
        sol = solve_ball(problem, grid.k, grid, tol, initial=init, boundary_value=bval,
                         rho=rho_all[:m + 1])
        dominance = float(np.min(v_all[:m + 1] - sol.u))
        cert = {"k": float(grid.k), "M": m, "iterations": sol.iterations, "residual": sol.residual_sup,
                "dominance_min": dominance, "gap_min": None, "obs_diff": None}
        if profiles:
            prev = _extend(profiles[-1].u, m + 1, ell)
            gap = float(np.min(sol.u - prev))
            diff = float(np.max(np.abs(sol.u[:n_obs] - prev[:n_obs])))
            cert["gap_min"], cert["obs_diff"] = gap, diff
            trail.append(diff)
        profiles.append(sol)
        certs.append(cert)
        log.info("k=%g M=%d iters=%d obs_diff=%s", grid.k, m, sol.iterations, cert["obs_diff"])
        if enforce:
            if dominance < -slack:
                raise SandwichViolation(f"barrier domination fails at k={grid.k}: {dominance:.3e}", certs)
            if not override and cert["gap_min"] is not None and cert["gap_min"] < -slack:
                raise SandwichViolation(f"monotonicity in k fails at k={grid.k}: {cert['gap_min']:.3e}", certs)
        if cert["obs_diff"] is not None and cert["obs_diff"] <= tol_entire:
            converged = True
        if converged and grid.k >= min_radius:
            break
    sol = EntireSolution(problem=problem, schedule=schedule, h=h, profiles=profiles, converged=converged,
                         certificates=certs, trail=trail, tol=tol, tol_entire=tol_entire,
                         v_nodes=v_all, override=override, start=start)
    sol.decay = decay_diagnostic(sol)
    return sol


@dataclass
class CertificateSummary:
    worst_gap: float | None
    worst_gap_k: float | None
    worst_dominance: float
    worst_dominance_k: float
    threshold: float
    passed: bool
    gap_enforced: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_monotone(sol: EntireSolution, threshold: float | None = None) -> CertificateSummary:
    """Recompute the sandwich minima from the stored profiles."""
    if len(sol.profiles) < 2:
        raise ValueError("monotonicity audit needs at least two profiles")
    threshold = -10.0 * sol.tol if threshold is None else threshold
    ell = sol.problem.ell
    gaps, doms = [], []
    for j, p in enumerate(sol.profiles):
        doms.append((float(np.min(sol.v_nodes[:p.u.size] - p.u)), float(p.k)))
        if j:
            prev = _extend(sol.profiles[j - 1].u, p.u.size, ell)
            gaps.append((float(np.min(p.u - prev)), float(p.k)))
    wg = min(gaps)
    wd = min(doms)
    gap_ok = sol.override or wg[0] >= threshold
    return CertificateSummary(worst_gap=wg[0], worst_gap_k=wg[1], worst_dominance=wd[0], worst_dominance_k=wd[1],
                              threshold=threshold, passed=bool(gap_ok and wd[0] >= threshold),
                              gap_enforced=not sol.override)


@dataclass
class PathComparison:
    label: str
    sup_diff: float
    argmax_r: float
    log_comparison: float | None
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class UniquenessReport:
    comparisons: list[PathComparison]
    threshold: float
    passed: bool
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "passed": self.passed,
                "comparisons": [c.to_dict() for c in self.comparisons]}


def _profiles_on_window(a, b, r_obs: float):
    ra, ua = a
    rb, ub = b
    n = min(ra.size, rb.size)
    if not np.allclose(ra[:n], rb[:n], rtol=0, atol=1e-12 * max(1.0, r_obs)):
        raise ValueError("profiles are not on a common grid")
    keep = ra[:n] <= r_obs * (1 + 1e-12)
    return ra[:n][keep], ua[:n][keep], ub[:n][keep]


def compare_paths(first, second, r_obs: float, threshold: float, ell: float, label: str = "") -> PathComparison:
    """Sup difference and log-comparison of two (r, u) profiles on [0, r_obs]."""
    r, u1, u2 = _profiles_on_window(first, second, r_obs)
    d = np.abs(u1 - u2)
    i = int(np.argmax(d))
    logc = None
    if ell == 0:
        ok = (u1 > LOG_FLOOR) & (u2 > LOG_FLOOR)
        if np.any(ok):
            logc = float(max(np.max(np.log(u1[ok]) - np.log(u2[ok])), np.max(np.log(u2[ok]) - np.log(u1[ok]))))
    passed = bool(d[i] <= threshold and (logc is None or logc <= threshold))
    return PathComparison(label=label, sup_diff=float(d[i]), argmax_r=float(r[i]), log_comparison=logc,
                          passed=passed)


def thread_cap(default: int = 2) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return max(1, min(default, os.cpu_count() or 1))
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer") from None


def verify_uniqueness(problem: ProblemSpec, schedule: Schedule, tol_entire: float = DEFAULT_TOL_ENTIRE, *,
                      primary: EntireSolution | None = None, M0: int = 256, tol: float = 1e-8,
                      barrier: Barrier | None = None, boundary=None, h: float | None = None,
                      min_radius: float = 0.0) -> UniquenessReport:
    """Rerun along two alternative paths and compare limit profiles pairwise.

    Path "barrier-start" restarts every ball from v; path "shifted-schedule"
    starts the schedule at 1.5 k0. Both keep the primary node spacing.
    """
    barrier = barrier or build_barrier(problem)
    if primary is None:
        primary = solve_entire(problem, schedule, tol_entire, M0=M0, tol=tol, barrier=barrier,
                               boundary=boundary, h=h, min_radius=min_radius)
    h = primary.h
    jobs = {
        "barrier-start": dict(schedule=schedule, start="barrier"),
        "shifted-schedule": dict(schedule=schedule.shifted(1.5), start="warm"),
    }

    def run(kw):
        return solve_entire(problem, kw["schedule"], tol_entire, tol=tol, start=kw["start"], barrier=barrier,
                            boundary=boundary, h=h, min_radius=min_radius)

    with ThreadPoolExecutor(max_workers=min(len(jobs), thread_cap())) as pool:
        futures = {name: pool.submit(run, kw) for name, kw in jobs.items()}
        paths = {name: fut.result() for name, fut in futures.items()}
    paths = {"primary": primary, **paths}
    threshold = 10.0 * tol_entire
    names = list(paths)
    comps = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = paths[names[i]], paths[names[j]]
            comps.append(compare_paths((a.r, a.u), (b.r, b.u), schedule.r_obs, threshold, problem.ell,
                                       label=f"{names[i]} vs {names[j]}"))
    return UniquenessReport(comparisons=comps, threshold=threshold,
                            passed=all(c.passed for c in comps) and all(p.converged for p in paths.values()),
                            paths=paths)


def smoothstep_cutoff(t) -> np.ndarray:
    """ψ(t) = 1 for t <= 1, 0 for t >= 2, quintic smoothstep in between."""
    t = np.asarray(t, dtype=float)
    s = np.clip(2.0 - t, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def cutoff_integral(r: np.ndarray, u1: np.ndarray, u2: np.ndarray, N: int, n: float) -> float:
    """|S^{N-1}| ∫ (u1 Δ_h u2 - u2 Δ_h u1) ψ(r/n) r^{N-1} dr, trapezoid on the nodes."""
    r = np.asarray(r, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if r.size < 3 or r[-2] < 2.0 * n:
        raise ValueError(f"grid reaches r={r[-1]:g}, the cutoff needs interior nodes past {2 * n:g}")
    h = r[1] - r[0]
    lap1 = radial_laplacian(u1, h, N)
    lap2 = radial_laplacian(u2, h, N)
    rr = r[:-1]
    g = (u1[:-1] * lap2 - u2[:-1] * lap1) * smoothstep_cutoff(rr / n) * rr ** (N - 1)
    return float(sphere_area(N) * np.trapezoid(g, rr))


def cutoff_integral_diagnostic(sol1: EntireSolution, sol2: EntireSolution, n: float) -> float:
    if abs(sol1.h - sol2.h) > 1e-14 * sol1.h:
        raise ValueError("solutions must share the node spacing")
    m = min(sol1.u.size, sol2.u.size)
    return cutoff_integral(sol1.r[:m], sol1.u[:m], sol2.u[:m], sol1.problem.N, n)


def decay_diagnostic(sol: EntireSolution) -> dict:
    """Log-log fit of u - ℓ over the outer third of the largest ball."""
    r, u = sol.r, sol.u
    ell = sol.problem.ell
    k = r[-1]
    window = (r >= 2.0 * k / 3.0) & (r < k)
    gap = u - ell
    usable = window & (gap > 0)
    count = int(usable.sum())
    interior = (r < k) & (gap > 0)
    asymptote_gap = float(gap[interior][-1]) if np.any(interior) else 0.0
    out = {"usable_points": count, "asymptote_gap": asymptote_gap, "radius": float(k),
           "fit_exponent": None, "reliable": False}
    if count >= MIN_FIT_POINTS:
        out["fit_exponent"] = float(np.polyfit(np.log(r[usable]), np.log(gap[usable]), 1)[0])
        out["reliable"] = True
    return out


def cutoff_noise_floor(r: np.ndarray, u1: np.ndarray, u2: np.ndarray, N: int, n: float, tol: float) -> float:
    """10 tol times the absolute-value integral; Iₙ below this is indistinguishable from 0."""
    r = np.asarray(r, dtype=float)
    h = r[1] - r[0]
    rr = r[:-1]
    g = (np.abs(u1[:-1] * radial_laplacian(u2, h, N)) + np.abs(u2[:-1] * radial_laplacian(u1, h, N)))
    g = g * smoothstep_cutoff(rr / n) * rr ** (N - 1)
    return float(10.0 * tol * sphere_area(N) * np.trapezoid(g, rr))


def cutoff_sequence(sol1: EntireSolution, sol2: EntireSolution, ns=(2, 4, 8), bound: float = 1e-6) -> dict:
    """Iₙ over increasing n with the bound test and a non-increasing test above the noise floor."""
    m = min(sol1.u.size, sol2.u.size)
    r, u1, u2 = sol1.r[:m], sol1.u[:m], sol2.u[:m]
    tol = max(sol1.tol, sol2.tol)
    values = [cutoff_integral_diagnostic(sol1, sol2, n) for n in ns]
    floors = [cutoff_noise_floor(r, u1, u2, sol1.problem.N, n, tol) for n in ns]
    mags = [abs(v) for v in values]
    strict = all(b <= a for a, b in zip(mags, mags[1:]))
    above_floor = all(b <= max(a, fl) for a, b, fl in zip(mags, mags[1:], floors[1:]))
    return {"n": [float(n) for n in ns], "values": values, "noise_floor": floors,
            "bounded": all(x <= bound for x in mags), "non_increasing_strict": strict,
            "non_increasing": above_floor, "passed": bool(all(x <= bound for x in mags) and above_floor)}
