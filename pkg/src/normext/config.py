"""JSON problem configurations.

A config is an object with ``"version": 1`` and the fields below; complex
matrix entries are written either as reals or as ``[re, im]`` pairs.

    dim        integer >= 1
    weight     {"kind": "sine", "gamma": 2} (see WeightFunction.from_config)
    C          {"diag": [...]} | {"dense": [[...]]} | {"growth": {"beta": b, "c": c}}
    a_i        {"kind": "zero"} | {"kind": "constant", "matrix": M}
               | {"kind": "polynomial", "coeffs": [M0, M1, ...]}   (ascending powers of t)
    W          {"identity": true} | {"diag_phases": [...]} | {"dense": M}
    a_r        {"kind": "normal_form", "epsilon": 0.0}   (adds epsilon * t * I)
    numerics   overrides of DEFAULT_NUMERICS

Two-weight problems replace ``weight``/``W`` with
``"spaces": {"alpha": {"weight": ..., "W": ...}, "beta": {...}}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import CoefficientPath, ConstantOperator, normal_form
from .errors import ConfigError
from .extensions import NormalExtension
from .snumbers import GrowthModel
from .weights import WeightFunction

SCHEMA_VERSION = 1

DEFAULT_NUMERICS = {
    "oracle_n": 2048,
    "scheme": "box",
    "evolution_step": 1e-3,
    "k_window": [-7, 7],
    "match_bound": 0.05,
    "count": 10000,
    "fit_range": None,
    "p": [1, 2, 3],
    "normality_tol": 1e-6,
    "seed": 0,
}


@dataclass
class ProblemConfig:
    dim: int
    C: ConstantOperator
    a_i: object
    weights: dict
    Ws: dict
    epsilon: float = 0.0
    numerics: dict = field(default_factory=lambda: dict(DEFAULT_NUMERICS))
    claims: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def two_weight(self) -> bool:
        return "beta" in self.weights

    @property
    def weight(self) -> WeightFunction:
        return self.weights["alpha"]

    def extension(self, space: str = "alpha") -> NormalExtension:
        return NormalExtension(
            self.weights[space], self.C, self.Ws[space], self.a_i, self.numerics["evolution_step"]
        )

    def coefficient_path(self, space: str = "alpha") -> CoefficientPath:
        """l-coefficients in normal form, plus the optional epsilon t I perturbation."""
        path = normal_form(self.weights[space], self.C, self.a_i)
        if self.epsilon:
            eps = self.epsilon
            path = path.shifted(lambda t: eps * np.asarray(t, dtype=float))
        return path


def _complex(value, where):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(x, (int, float)) for x in value):
        return complex(value[0], value[1])
    raise ConfigError(f"expected a number or [re, im], got {value!r}", where=where)


def parse_matrix(value, d: int, where: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != d:
        raise ConfigError(f"expected a {d}x{d} matrix", where=where)
    out = np.empty((d, d), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != d:
            raise ConfigError(f"row must have {d} entries", where=f"{where}[{i}]")
        for j, x in enumerate(row):
            out[i, j] = _complex(x, f"{where}[{i}][{j}]")
    return out


def _reals(value, d, where):
    if not isinstance(value, list) or len(value) != d:
        raise ConfigError(f"expected a list of {d} numbers", where=where)
    try:
        return np.array([float(x) for x in value])
    except (TypeError, ValueError):
        raise ConfigError("entries must be real numbers", where=where) from None


def _parse_C(spec, d):
    if not isinstance(spec, dict):
        raise ConfigError("expected an object", where="C")
    try:
        if "diag" in spec:
            return ConstantOperator.diag(_reals(spec["diag"], d, "C.diag"))
        if "dense" in spec:
            return ConstantOperator.from_matrix(parse_matrix(spec["dense"], d, "C.dense"))
        if "growth" in spec:
            g = spec["growth"]
            return ConstantOperator.diag(GrowthModel(float(g["beta"]), float(g.get("c", 1.0))).eigenvalues(d))
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}", where="C") from None
    except Exception as exc:
        raise ConfigError(str(exc), where="C") from None
    raise ConfigError("expected one of 'diag', 'dense', 'growth'", where="C")


def _parse_a_i(spec, d):
    if spec is None:
        return None
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind == "zero":
        return None
    if kind == "constant":
        return parse_matrix(spec.get("matrix"), d, "a_i.matrix")
    if kind == "polynomial":
        coeffs = spec.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("expected a non-empty list of matrices", where="a_i.coeffs")
        stack = np.stack([parse_matrix(m, d, f"a_i.coeffs[{n}]") for n, m in enumerate(coeffs)])
        try:
            return CoefficientPath.polynomial(np.zeros_like(stack[:1]), stack)
        except ValueError as exc:
            raise ConfigError(str(exc), where="a_i") from None
    raise ConfigError("kind must be 'zero', 'constant' or 'polynomial'", where="a_i.kind")


def _parse_W(spec, d, where):
    if not isinstance(spec, dict):
        raise ConfigError("expected an object", where=where)
    if spec.get("identity") is True:
        return np.eye(d, dtype=complex)
    if "diag_phases" in spec:
        return np.diag(np.exp(1j * _reals(spec["diag_phases"], d, f"{where}.diag_phases")))
    if "dense" in spec:
        return parse_matrix(spec["dense"], d, f"{where}.dense")
    raise ConfigError("expected 'identity', 'diag_phases' or 'dense'", where=where)


def _parse_weight(spec, where, base_dir):
    try:
        return WeightFunction.from_config(spec, base_dir)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], where=f"{where}.{exc.where}" if exc.where else where) from None


def from_dict(raw: dict, base_dir=None) -> ProblemConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object")
    if raw.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported or missing schema version (expected {SCHEMA_VERSION})", where="version")
    d = raw.get("dim")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ConfigError("dim must be an integer >= 1", where="dim")
    if "C" not in raw:
        raise ConfigError("missing field", where="C")
    C = _parse_C(raw["C"], d)
    a_i = _parse_a_i(raw.get("a_i"), d)

    if "spaces" in raw:
        spaces = raw["spaces"]
        if not isinstance(spaces, dict) or set(spaces) != {"alpha", "beta"}:
            raise ConfigError("expected exactly the keys 'alpha' and 'beta'", where="spaces")
        weights = {k: _parse_weight(v.get("weight"), f"spaces.{k}.weight", base_dir) for k, v in spaces.items()}
        Ws = {k: _parse_W(v.get("W"), d, f"spaces.{k}.W") for k, v in spaces.items()}
    else:
        for key in ("weight", "W"):
            if key not in raw:
                raise ConfigError("missing field", where=key)
        weights = {"alpha": _parse_weight(raw["weight"], "weight", base_dir)}
        Ws = {"alpha": _parse_W(raw["W"], d, "W")}

    a_r = raw.get("a_r", {"kind": "normal_form"})
    if not isinstance(a_r, dict) or a_r.get("kind") != "normal_form":
        raise ConfigError("only the 'normal_form' form is supported", where="a_r.kind")
    epsilon = float(a_r.get("epsilon", 0.0))

    numerics = dict(DEFAULT_NUMERICS)
    extra = raw.get("numerics", {})
    if not isinstance(extra, dict):
        raise ConfigError("expected an object", where="numerics")
    unknown = set(extra) - set(DEFAULT_NUMERICS)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", where="numerics")
    numerics.update(extra)
    return ProblemConfig(d, C, a_i, weights, Ws, epsilon, numerics, raw.get("claims", {}), raw)


def load_config(path) -> ProblemConfig:
    """Parse a config file; OSError propagates, syntax errors become ConfigError with line/column."""
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, where=f"{path}:{exc.lineno}:{exc.colno}") from None
    return from_dict(raw, base_dir=path.parent)


def data_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name
