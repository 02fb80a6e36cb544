"""Run configuration: flat ``section.key = value`` text files.

Lines starting with ``#`` are comments. Unknown keys are rejected so typos
surface as configuration errors rather than silently ignored settings.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .entire import Schedule
from .problem import NonlinearitySpec, PotentialSpec, ProblemSpec


class ConfigError(ValueError):
    pass


# key -> (type, default); None default means optional
KEYS: dict[str, tuple[type, object]] = {
    "problem.N": (int, 3),
    "problem.ell": (float, 0.0),
    "f.kind": (str, "power"),
    "f.p": (float, 0.5),
    "f.expr": (str, None),
    "f.file": (str, None),
    "f.f0": (float, None),
    "rho.kind": (str, "rational"),
    "rho.p": (float, 4.0),
    "rho.scale": (float, 1.0),
    "rho.length": (float, 1.0),
    "rho.expr": (str, None),
    "rho.file": (str, None),
    "rho.directions": (int, 200),
    "schedule.r_obs": (float, 5.0),
    "schedule.k0": (float, None),
    "schedule.growth": (float, 1.5),
    "schedule.k_max": (float, None),
    "grid.M": (int, 256),
    "tol.solver": (float, 1e-8),
    "tol.entire": (float, 1e-3),
    "conditions.r_max": (float, 1e6),
    "solve.boundary_expr": (str, None),
    "verify.delta": (float, 1e-2),
    "verify.U": (float, 1e6),
    "verify.n": (str, "2,4,8"),
    "output.dir": (str, "out"),
}

F_KINDS = ("power", "expr", "table")
RHO_KINDS = ("rational", "exponential", "zero", "expr", "expr_x", "table")

_FUNCS = {name: getattr(np, name) for name in
          ("sqrt", "exp", "log", "log1p", "expm1", "sin", "cos", "tan", "arctan", "sinh", "cosh", "tanh",
           "abs", "minimum", "maximum", "power", "where", "hypot", "sum")}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant, ast.Subscript,
          ast.Slice, ast.Tuple, ast.Compare,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
          ast.Lt, ast.LtE, ast.Gt, ast.GtE)


def compile_expression(text: str, variables: tuple[str, ...]):
    """Compile an arithmetic expression over numpy functions and the given variable names.

    The result is broadcast to the shape of the first variable.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    allowed = set(variables) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"expression {text!r} uses disallowed syntax {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ConfigError(f"expression {text!r} uses unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError(f"expression {text!r} calls a non-whitelisted function")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, type(Ellipsis))):
            raise ConfigError(f"expression {text!r} contains a non-numeric literal")
    code = compile(tree, "<config>", "eval")
    namespace = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def evaluate(*args):
        with np.errstate(all="ignore"):
            out = eval(code, namespace, dict(zip(variables, args)))  # noqa: S307 - AST whitelisted above
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(args[0])).copy() if args else out

    evaluate.source = text
    return evaluate


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(key: str, raw: str):
    typ = KEYS[key][0]
    try:
        if typ is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None
    return raw


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        for key in self.values:
            if key not in KEYS:
                raise ConfigError(f"unknown key {key!r}")

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        return KEYS[key][1]

    def set(self, key: str, value) -> None:
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        self.values[key] = _coerce(key, _format(value))

    @classmethod
    def parse(cls, text: str, base_dir: Path | None = None) -> "RunConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _coerce(key, raw)
        cfg = cls(values, base_dir or Path.cwd())
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.parse(text, path.resolve().parent)

    def serialize(self) -> str:
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in sorted(self.values))

    def validate(self) -> None:
        for key in ("tol.solver", "tol.entire", "conditions.r_max", "verify.delta", "verify.U"):
            if not self.get(key) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.get("problem.N") < 3:
            raise ConfigError("problem.N must be >= 3")
        if self.get("problem.ell") < 0:
            raise ConfigError("problem.ell must be >= 0")
        if self.get("grid.M") < 8:
            raise ConfigError("grid.M must be >= 8")
        if self.get("f.kind") not in F_KINDS:
            raise ConfigError(f"f.kind must be one of {F_KINDS}")
        if self.get("rho.kind") not in RHO_KINDS:
            raise ConfigError(f"rho.kind must be one of {RHO_KINDS}")
        self.cutoff_radii()
        try:
            self.schedule()
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from None

    def cutoff_radii(self) -> tuple[float, ...]:
        try:
            ns = tuple(float(x) for x in str(self.get("verify.n")).split(","))
        except ValueError:
            raise ConfigError("verify.n must be a comma-separated list of numbers") from None
        if not ns or any(n <= 0 for n in ns):
            raise ConfigError("verify.n entries must be positive")
        return ns

    def _path(self, key: str) -> Path:
        raw = self.get(key)
        if raw is None:
            raise ConfigError(f"{key} is required")
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def _required(self, key: str):
        val = self.get(key)
        if val is None:
            raise ConfigError(f"{key} is required for this kind")
        return val

    def nonlinearity(self) -> NonlinearitySpec:
        kind = self.get("f.kind")
        f0 = self.get("f.f0")
        if kind == "power":
            return NonlinearitySpec.power(self.get("f.p"), f_at_zero=f0)
        if kind == "expr":
            fn = compile_expression(self._required("f.expr"), ("u",))
            return NonlinearitySpec.closure(fn, f_at_zero=f0, label=fn.source)
        u, fu = _read_table(self._path("f.file"))
        return NonlinearitySpec.table(u, fu, f_at_zero=f0)

    def potential(self) -> PotentialSpec:
        N, kind = self.get("problem.N"), self.get("rho.kind")
        if kind == "rational":
            return PotentialSpec.rational(N, self.get("rho.p"), self.get("rho.scale"))
        if kind == "zero":
            return PotentialSpec.zero(N)
        if kind == "exponential":
            a, L = self.get("rho.scale"), self.get("rho.length")
            return PotentialSpec(N, radial=lambda r: a * np.exp(-np.asarray(r) / L), label=f"{a}*exp(-r/{L})")
        if kind == "expr":
            fn = compile_expression(self._required("rho.expr"), ("r",))
            return PotentialSpec(N, radial=fn, label=fn.source)
        if kind == "expr_x":
            fn = compile_expression(self._required("rho.expr"), ("r", "x"))
            return PotentialSpec(N, anisotropic=lambda x: _eval_aniso(fn, x), n_directions=self.get("rho.directions"),
                                 label=fn.source)
        r, rho = _read_table(self._path("rho.file"))
        return PotentialSpec(N, radial=_radial_table(r, rho), label=str(self.get("rho.file")))

    def problem(self) -> ProblemSpec:
        return ProblemSpec(self.potential(), self.nonlinearity(), self.get("problem.ell"))

    def schedule(self) -> Schedule:
        return Schedule(self.get("schedule.r_obs"), self.get("schedule.k0"), self.get("schedule.growth"),
                        self.get("schedule.k_max"))

    def boundary(self):
        """Manufactured boundary value k -> u(k), from solve.boundary_expr."""
        fn = compile_expression(self._required("solve.boundary_expr"), ("k",))
        return lambda k: float(fn(np.asarray(float(k))))


def _eval_aniso(fn, x):
    x = np.asarray(x, dtype=float)
    return fn(np.linalg.norm(x, axis=-1), x)


def _read_table(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path) as fh:
            first = fh.readline()
        skip = 0 if _numeric_row(first) else 1
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=skip, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from None
    if data.shape[1] != 2 or data.shape[0] < 3:
        raise ConfigError(f"table {path} needs two columns and at least three rows")
    order = np.argsort(data[:, 0])
    x, y = data[order, 0], data[order, 1]
    if np.any(np.diff(x) <= 0):
        raise ConfigError(f"table {path} has repeated abscissae")
    return x, y


def _numeric_row(line: str) -> bool:
    try:
        [float(t) for t in line.split(",")]
        return True
    except ValueError:
        return False


def _radial_table(r: np.ndarray, rho: np.ndarray):
    """PCHIP inside the table, power-law continuation of the last two samples beyond it."""
    if r[0] < 0 or np.any(rho < 0):
        raise ConfigError("potential table needs r >= 0 and rho >= 0")
    interp = PchipInterpolator(r, rho, extrapolate=False)
    r_end, rho_end = r[-1], rho[-1]
    if rho[-1] > 0 and rho[-2] > 0:
        slope = math.log(rho[-1] / rho[-2]) / math.log(r[-1] / r[-2])
    else:
        slope = -math.inf

    def phi(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        inside = x <= r_end
        out[inside] = interp(np.maximum(x[inside], r[0]))
        far = x[~inside]
        out[~inside] = 0.0 if slope == -math.inf else rho_end * (far / r_end) ** slope
        return out

    return phi
