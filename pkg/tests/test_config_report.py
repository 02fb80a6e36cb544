import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entire_sublinear.config import KEYS, ConfigError, RunConfig, compile_expression
from entire_sublinear.report import (CSV_HEADER, dumps, format_csv, read_solution_csv, sanitize, solution_csv,
                                     validate_report)


def test_defaults_and_parse():
    cfg = RunConfig.parse("# comment\nproblem.ell = 1\nrho.p = 3\n")
    assert cfg.get("problem.ell") == 1.0
    assert cfg.get("problem.N") == 3
    assert cfg.get("tol.entire") == 1e-3
    assert cfg.schedule().k0 == 20.0


@pytest.mark.parametrize("text", [
    "nonsense",
    "problem.X = 1",
    "problem.N = 2",
    "problem.N = 3.5",
    "tol.solver = 0",
    "tol.entire = -1",
    "f.kind = cubic",
    "rho.p = abc",
    "problem.ell = 1\nproblem.ell = 2",
    "schedule.k0 = 4",
    "verify.n = 2,,8",
])
def test_malformed_configs(text):
    with pytest.raises(ConfigError):
        RunConfig.parse(text)


values = st.fixed_dictionaries({
    "problem.N": st.integers(3, 6),
    "problem.ell": st.floats(0.0, 10.0),
    "rho.p": st.floats(2.1, 8.0),
    "tol.entire": st.floats(1e-9, 1e-1),
    "grid.M": st.integers(8, 4096),
    "rho.expr": st.sampled_from(["1/(1+r**4)", "exp(-r)*sqrt(1+r)"]),
})


@settings(max_examples=50, deadline=None)
@given(values)
def test_round_trip(vals):
    cfg = RunConfig({k: v for k, v in vals.items()})
    once = RunConfig.parse(cfg.serialize())
    twice = RunConfig.parse(once.serialize())
    assert once.values == cfg.values == twice.values
    assert once.serialize() == twice.serialize()


def test_every_key_has_a_type():
    assert all(isinstance(t, type) for t, _ in KEYS.values())


def test_expression_whitelist():
    fn = compile_expression("3*(1+r**2)**(-2.5)", ("r",))
    assert fn(np.array([0.0, 1.0]))[1] == pytest.approx(3 * 2**-2.5)
    assert fn(np.zeros(3)).shape == (3,)
    for bad in ("__import__('os')", "r.__class__", "open('x')", "[r for r in r]", "lambda: 1", "'a'"):
        with pytest.raises(ConfigError):
            compile_expression(bad, ("r",))
    with pytest.raises(ConfigError):
        compile_expression("q + 1", ("r",))


def test_problem_kinds(tmp_path):
    table = tmp_path / "f.csv"
    u = np.geomspace(1e-3, 1e3, 30)
    table.write_text("u,f\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(u, np.sqrt(u))))
    rho = tmp_path / "rho.csv"
    r = np.linspace(0.0, 50.0, 201)
    rho.write_text("".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(r, 1 / (1 + r**4))))
    cfg = RunConfig.parse("f.kind = table\nf.file = f.csv\nrho.kind = table\nrho.file = rho.csv\n", tmp_path)
    pb = cfg.problem()
    assert pb.nonlinearity(np.array([4.0]))[0] == pytest.approx(2.0, rel=1e-6)
    # beyond the table the potential continues with the fitted power law (slope ~ -4)
    assert pb.potential.radial(np.array([100.0]))[0] == pytest.approx(1 / (1 + 100.0**4), rel=0.05)
    exp_cfg = RunConfig.parse("rho.kind = exponential\nrho.scale = 2\nrho.length = 0.5\n")
    assert exp_cfg.potential().radial(np.array([1.0]))[0] == pytest.approx(2 * math.exp(-2))
    aniso = RunConfig.parse("rho.kind = expr_x\nrho.expr = (1 + x[...,0]**2/(1+r**2))/(1+r**4)\n")
    assert aniso.potential().majorant()(np.array([0.0]))[0] == pytest.approx(1.0)
    f_expr = RunConfig.parse("f.kind = expr\nf.expr = u/(1+u)\nf.f0 = 0\n").nonlinearity()
    assert f_expr(np.array([1.0]))[0] == 0.5


def test_missing_table_is_config_error(tmp_path):
    cfg = RunConfig.parse("rho.kind = table\nrho.file = nope.csv\n", tmp_path)
    with pytest.raises(ConfigError):
        cfg.problem()


def test_sanitize_and_dumps():
    doc = {"b": float("nan"), "a": [np.float64(1.5), np.int64(2), np.inf], "c": np.bool_(True)}
    assert sanitize(doc) == {"b": None, "a": [1.5, 2, None], "c": True}
    text = dumps(doc)
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["b"] is None


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=20))
def test_csv_round_trip_exact(vals, tmp_path_factory):
    u = np.array(vals)
    r = np.arange(u.size) * 0.1
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    path.write_text(solution_csv(r, u, u + 1.0, 0.5))
    back = read_solution_csv(path)
    assert np.array_equal(back["u"], u) and np.array_equal(back["r"], r)


def test_csv_header_and_digits():
    text = format_csv({"r": [0.1], "u": [1 / 3], "v": [2.0], "u_minus_ell": [0.0]})
    header, row = text.splitlines()
    assert header == CSV_HEADER
    assert row.split(",")[1] == f"{1 / 3:.17g}"


def test_schema_rejects_bad_report():
    with pytest.raises(jsonschema.ValidationError):
        validate_report({"check": {"regime": "ell_zero"}})
    with pytest.raises(jsonschema.ValidationError):
        validate_report({"unknown": {}})
