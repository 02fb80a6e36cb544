"""Command-line entry point: check | barrier | solve | verify | report.

Exit codes: 0 success, 1 failed verdict or certificate, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .ball import BallSolution, RadialGrid, check_brezis_oswald
from .barrier import BarrierError, build_barrier
from .conditions import check_rho1, check_rho2, kato_profile, newton_potential_bound
from .config import ConfigError, RunConfig
from .entire import (EntireSolution, SandwichViolation, cutoff_sequence, solve_entire, verify_monotone,
                     verify_uniqueness)
from .problem import DomainError
from .report import SECTIONS, format_csv, read_solution_csv, solution_csv, validate_report, write_json

log = logging.getLogger("entire_sublinear")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FILE_KEYS = ("f.file", "rho.file")


class UsageError(Exception):
    pass


def run_check(cfg: RunConfig, out: Path | None = None) -> tuple[int, dict]:
    problem = cfg.problem()
    pot = problem.potential
    phi = pot.majorant()
    N, r_max = problem.N, cfg.get("conditions.r_max")
    certs = problem.certificates()
    variant = "rho1" if problem.ell > 0 else "rho2"
    doc = {
        "regime": problem.regime,
        "certificates": {k: c.to_dict() for k, c in certs.items()},
        "rho1": check_rho1(phi, r_max).to_dict(),
        "rho2": check_rho2(phi, N, r_max).to_dict(),
        "kato": kato_profile(phi, N, variant).to_dict(),
        "newton_potential": newton_potential_bound(pot, r_max).to_dict(),
    }
    required = ["f1", "rho1"] if problem.ell > 0 else ["f1", "f2", "rho2"]
    failed = []
    for name in required:
        ok = certs[name].passed if name in certs else doc[name]["verdict"] == "finite"
        if not ok:
            failed.append(name)
    doc.update(required=required, failed=failed, passed=not failed)
    if out is not None:
        write_json(out / "check.json", {"check": doc})
    return (EXIT_OK if not failed else EXIT_FAIL), doc


def run_barrier(cfg: RunConfig, out: Path | None = None) -> tuple[int, dict]:
    problem = cfg.problem()
    barrier = build_barrier(problem, cfg.get("conditions.r_max"))
    doc = barrier.to_dict()
    if out is not None:
        r = np.linspace(0.0, cfg.schedule().k_max, cfg.get("grid.M") + 1)
        (out / "barrier.csv").write_text(format_csv({"r": r, "w": barrier.w_profile(r), "v": barrier.v_profile(r)}))
        write_json(out / "barrier.json", {"barrier": doc})
    return EXIT_OK, doc


def _min_radius(cfg: RunConfig, h: float) -> float:
    return 2.0 * max(cfg.cutoff_radii()) + 2.0 * h


def _stored_config(cfg: RunConfig) -> RunConfig:
    values = dict(cfg.values)
    for key in FILE_KEYS:
        if key in values:
            values[key] = str(cfg._path(key).resolve())
    return RunConfig(values, cfg.base_dir)


def run_solve(cfg: RunConfig, out: Path, force: bool = False, override: bool = False) -> tuple[int, dict]:
    if not force:
        code, check = run_check(cfg, None)
        if code != EXIT_OK:
            doc = _failed_solve(f"hypothesis checks failed: {', '.join(check['failed'])}", [])
            write_json(out / "solve.json", {"solve": doc})
            return EXIT_FAIL, doc
    problem = cfg.problem()
    schedule = cfg.schedule()
    boundary = cfg.boundary() if override else None
    barrier = build_barrier(problem, cfg.get("conditions.r_max"))
    h = schedule.k0 / cfg.get("grid.M")
    try:
        sol = solve_entire(problem, schedule, cfg.get("tol.entire"), M0=cfg.get("grid.M"),
                           tol=cfg.get("tol.solver"), barrier=barrier, boundary=boundary,
                           min_radius=_min_radius(cfg, h))
    except SandwichViolation as exc:
        doc = _failed_solve(str(exc), exc.certificates)
        write_json(out / "solve.json", {"solve": doc})
        return EXIT_FAIL, doc
    if len(sol.profiles) >= 2:
        monotone = verify_monotone(sol).to_dict()
    else:
        dom = sol.certificates[0]["dominance_min"]
        monotone = {"worst_gap": None, "worst_gap_k": None, "worst_dominance": dom,
                    "worst_dominance_k": sol.certificates[0]["k"], "threshold": -10.0 * sol.tol,
                    "passed": dom >= -10.0 * sol.tol, "gap_enforced": not sol.override}
    doc = sol.to_dict()
    doc.update(monotone=monotone, passed=bool(sol.converged and monotone["passed"]),
               barrier=barrier.to_dict(), final_k=float(sol.final.k))
    (out / "solution.csv").write_text(solution_csv(sol.r, sol.u, sol.v_nodes[:sol.u.size], problem.ell))
    (out / "config.txt").write_text(_stored_config(cfg).serialize())
    write_json(out / "solve.json", {"solve": doc})
    return (EXIT_OK if doc["passed"] else EXIT_FAIL), doc


def _failed_solve(message: str, certificates: list) -> dict:
    return {"converged": False, "k_values": [c["k"] for c in certificates], "certificates": certificates,
            "trail": [], "monotone": {"worst_gap": None, "worst_dominance": None, "passed": False},
            "decay": {"fit_exponent": None, "asymptote_gap": None, "reliable": False},
            "passed": False, "error": message}


def _stored_solution(cfg: RunConfig, out: Path) -> tuple[EntireSolution, dict]:
    csv_path, solve_path = out / "solution.csv", out / "solve.json"
    if not csv_path.exists() or not solve_path.exists():
        raise UsageError(f"no prior solve output in {out}")
    stored = json.loads(solve_path.read_text())["solve"]
    if "h" not in stored:
        raise UsageError(f"prior solve in {out} did not produce a solution")
    cols = read_solution_csv(csv_path)
    h = float(stored["h"])
    M = cols["r"].size - 1
    grid = RadialGrid(M * h, M)
    ball = BallSolution(grid=grid, values=cols["u"], residual_sup=float("nan"), iterations=0,
                        monotone_certificate=True, direction="stored", boundary_value=float(cols["u"][-1]),
                        shift=0.0)
    sol = EntireSolution(problem=cfg.problem(), schedule=cfg.schedule(), h=h, profiles=[ball],
                         converged=bool(stored["converged"]), certificates=[], trail=[],
                         tol=cfg.get("tol.solver"), tol_entire=cfg.get("tol.entire"), v_nodes=cols["v"],
                         override=bool(stored.get("override", False)))
    return sol, stored


def run_verify(cfg: RunConfig, out: Path) -> tuple[int, dict]:
    primary, stored = _stored_solution(cfg, out)
    problem = primary.problem
    boundary = cfg.boundary() if primary.override else None
    barrier = build_barrier(problem, cfg.get("conditions.r_max"))
    uniq = verify_uniqueness(problem, primary.schedule, primary.tol_entire, primary=primary, tol=primary.tol,
                             barrier=barrier, boundary=boundary, h=primary.h,
                             min_radius=_min_radius(cfg, primary.h))
    ns = cfg.cutoff_radii()
    cutoff = cutoff_sequence(primary, uniq.paths["barrier-start"], ns)
    cutoff_shifted = cutoff_sequence(primary, uniq.paths["shifted-schedule"], ns)
    bo = check_brezis_oswald(problem, primary.final.k, cfg.get("verify.delta"), cfg.get("verify.U"),
                             grid=primary.final.grid)
    bo_doc = {"c108": bo["c108"].to_dict(), "c109": bo["c109"].to_dict(), "passed": bo["passed"],
              "k": bo["k"], "M": bo["M"]}
    doc = {"uniqueness": uniq.to_dict(), "cutoff": cutoff, "cutoff_shifted": cutoff_shifted,
           "brezis_oswald": bo_doc,
           "passed": bool(uniq.passed and cutoff["passed"] and cutoff_shifted["passed"] and bo["passed"])}
    write_json(out / "verify.json", {"verify": doc})
    return (EXIT_OK if doc["passed"] else EXIT_FAIL), doc


def run_report(out: Path) -> tuple[int, dict]:
    doc = {}
    for name in SECTIONS:
        path = out / f"{name}.json"
        if path.exists():
            doc.update(json.loads(path.read_text()))
    if not doc:
        raise UsageError(f"no section reports found in {out}")
    validate_report(doc)
    write_json(out / "report.json", doc)
    passed = all(section.get("passed", True) for section in doc.values())
    return (EXIT_OK if passed else EXIT_FAIL), doc


def _write_meta(out: Path, command: str, argv: list[str]) -> None:
    meta = {"command": command, "argv": argv, "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "version": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}
    (out / "run_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entire-sublinear",
                                     description="Entire solutions of -Δu = ρ(x)f(u) with u -> ℓ at infinity.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("check", "certify hypotheses and decay conditions"),
                            ("barrier", "build the radial supersolution"),
                            ("solve", "run the expanding-ball scheme"),
                            ("verify", "rerun alternative paths against a prior solve"),
                            ("report", "merge section reports into report.json")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=name in ("check", "barrier", "solve"),
                       help="config file (verify/report default to OUT/config.txt)")
        p.add_argument("--out", type=Path, help="output directory (default: output.dir from the config)")
        if name in ("solve", "verify", "check", "barrier"):
            p.add_argument("--grid", type=int, metavar="M", help="nodes on the first ball (grid.M)")
            p.add_argument("--tol", type=float, metavar="X", help="convergence tolerance (tol.entire)")
            p.add_argument("--k-max", type=float, metavar="X", help="largest ball radius (schedule.k_max)")
        if name == "solve":
            p.add_argument("--force", action="store_true", help="solve even when checks fail")
            p.add_argument("--boundary-override", action="store_true",
                           help="use solve.boundary_expr as boundary value (manufactured tests only)")
    return parser


def _load_config(args) -> tuple[RunConfig, Path]:
    cfg_path = args.config
    if cfg_path is None:
        if args.out is None:
            raise UsageError("--out is required when --config is omitted")
        cfg_path = args.out / "config.txt"
        if not cfg_path.exists():
            raise UsageError(f"no prior run configuration at {cfg_path}")
    cfg = RunConfig.load(cfg_path)
    for attr, key in (("grid", "grid.M"), ("tol", "tol.entire"), ("k_max", "schedule.k_max")):
        val = getattr(args, attr, None)
        if val is not None:
            cfg.set(key, val)
    cfg.validate()
    out = args.out if args.out is not None else Path(cfg.get("output.dir"))
    return cfg, out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            if args.out is None:
                raise UsageError("report needs --out")
            code, _ = run_report(args.out)
            print(f"report: {'ok' if code == EXIT_OK else 'failed'} -> {args.out / 'report.json'}")
            return code
        cfg, out = _load_config(args)
        if args.command == "verify" and not (out / "solution.csv").exists():
            raise UsageError(f"no prior solve output in {out}")
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "check":
            code, doc = run_check(cfg, out)
            print(f"check: {'pass' if code == EXIT_OK else 'fail'} (failed: {', '.join(doc['failed']) or 'none'})")
        elif args.command == "barrier":
            code, doc = run_barrier(cfg, out)
            print(f"barrier: K={doc['K']!r} c={doc['scale_c']!r}")
        elif args.command == "solve":
            code, doc = run_solve(cfg, out, force=args.force, override=args.boundary_override)
            print(f"solve: converged={doc['converged']} passed={doc['passed']}")
        else:
            code, doc = run_verify(cfg, out)
            print(f"verify: passed={doc['passed']}")
        _write_meta(out, args.command, argv)
        return code
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BarrierError as exc:
        print(f"barrier failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
