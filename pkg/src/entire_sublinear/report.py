"""Deterministic CSV/JSON emission and report schema validation."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

CSV_HEADER = "r,u,v,u_minus_ell"
SECTIONS = ("check", "barrier", "solve", "verify")


def sanitize(obj):
    """Plain JSON types; non-finite floats become null, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def format_csv(columns: dict[str, np.ndarray]) -> str:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    lines = [",".join(names)]
    lines.extend(",".join(f"{x:.17g}" for x in row) for row in data)
    return "\n".join(lines) + "\n"


def solution_csv(r, u, v, ell: float) -> str:
    text = format_csv({"r": r, "u": u, "v": v, "u_minus_ell": np.asarray(u) - ell})
    assert text.startswith(CSV_HEADER + "\n")
    return text


def read_solution_csv(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
    if header != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(CSV_HEADER.split(","))}


def load_schema() -> dict:
    text = resources.files("entire_sublinear").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def validate_report(doc: dict) -> None:
    """Raise jsonschema.ValidationError when ``doc`` does not match the shipped schema."""
    jsonschema.validate(sanitize(doc), load_schema())
