"""Constructive solver for entire solutions of -Δu = ρ(x)f(u) on R^N with u -> ℓ at infinity."""

__version__ = "0.1.0"

from .problem import NonlinearitySpec, PotentialSpec, ProblemSpec, certify_f1, certify_f2, eval_f  # noqa: E402
from .conditions import check_rho1, check_rho2, kato_profile, newton_potential_bound  # noqa: E402
from .barrier import build_barrier, compute_K, choose_scale, eval_v, eval_w  # noqa: E402
from .ball import RadialGrid, check_brezis_oswald, first_eigenvalue, solve_ball, solve_ball_3d  # noqa: E402
from .entire import Schedule, cutoff_integral_diagnostic, decay_diagnostic, solve_entire, verify_monotone, \
    verify_uniqueness  # noqa: E402

__all__ = [
    "NonlinearitySpec", "PotentialSpec", "ProblemSpec", "certify_f1", "certify_f2", "eval_f",
    "check_rho1", "check_rho2", "kato_profile", "newton_potential_bound",
    "build_barrier", "compute_K", "choose_scale", "eval_v", "eval_w",
    "RadialGrid", "check_brezis_oswald", "first_eigenvalue", "solve_ball", "solve_ball_3d",
    "Schedule", "cutoff_integral_diagnostic", "decay_diagnostic", "solve_entire", "verify_monotone",
    "verify_uniqueness",
]
