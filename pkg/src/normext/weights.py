"""Weight functions on [0, 1] and composite Gauss-Legendre quadrature for L^2_alpha.

A weight is nonnegative, twice differentiable and vanishes only on a finite
set of points.  Built-in kinds carry closed-form derivatives; tabulated
weights are interpolated with a monotone piecewise cubic and support first
derivatives only.

Quadrature panels are graded geometrically toward every zero of the weight,
so that no node ever lands on a zero while integrals of the (integrable)
singular factors stay accurate.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError, ShapeError, SingularityError

TOL_ZERO = 1e-12

KINDS = ("constant", "power", "reflected-power", "sine", "tabulated")


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"t must lie in [0, 1], got {t!r}")
    return arr


def _unwrap(arr, value):
    return float(value) if arr.ndim == 0 else value


@dataclass(frozen=True)
class WeightFunction:
    """Admissible weight alpha on [0, 1].

    Use the classmethod constructors (``constant``, ``power``,
    ``reflected_power``, ``sine``, ``tabulated``) rather than the raw
    dataclass initializer.
    """

    kind: str
    param: float | None = None
    zero_set: tuple[float, ...] = ()
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = field(default=None, repr=False)
    _interp: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightFunction":
        if not value > 0:
            raise ValueError("constant weight must be positive")
        return cls("constant", float(value), ())

    @classmethod
    def power(cls, gamma: float) -> "WeightFunction":
        """alpha(t) = t**gamma."""
        _check_exponent(gamma, "gamma")
        return cls("power", float(gamma), (0.0,))

    @classmethod
    def reflected_power(cls, delta: float) -> "WeightFunction":
        """alpha(t) = (1 - t)**delta."""
        _check_exponent(delta, "delta")
        return cls("reflected-power", float(delta), (1.0,))

    @classmethod
    def sine(cls, gamma: float) -> "WeightFunction":
        """alpha(t) = sin(pi t**gamma); vanishes at both endpoints."""
        _check_exponent(gamma, "gamma")
        return cls("sine", float(gamma), (0.0, 1.0))

    @classmethod
    def tabulated(cls, t, alpha) -> "WeightFunction":
        t = np.asarray(t, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        if t.ndim != 1 or t.shape != alpha.shape or t.size < 4:
            raise ShapeError("tabulated weight needs matching 1-D arrays with >= 4 samples")
        if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated weight must be sampled on increasing t from 0 to 1")
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise ValueError("tabulated weight must be finite and nonnegative")
        zero = alpha == 0.0
        if np.any(zero[1:] & zero[:-1]):
            raise ValueError("weight vanishes on an interval (zero set must be finite)")
        interp = PchipInterpolator(t, alpha, extrapolate=False)
        return cls(
            "tabulated",
            None,
            tuple(float(x) for x in t[zero]),
            (tuple(t.tolist()), tuple(alpha.tolist())),
            interp,
        )

    @classmethod
    def from_csv(cls, path) -> "WeightFunction":
        """Read a two-column ``t,alpha`` CSV (header optional)."""
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if lineno == 1:
                        continue  # header
                    raise ConfigError(f"bad row {row!r}", where=f"{path}:{lineno}")
        t, a = zip(*rows)
        return cls.tabulated(t, a)

    @classmethod
    def from_config(cls, spec: dict, base_dir=None) -> "WeightFunction":
        """Build from ``{"kind": "sine", "gamma": 2.0}`` style dicts."""
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError("weight spec must be an object with a 'kind' field", where="weight")
        kind = spec["kind"]
        try:
            if kind == "constant":
                return cls.constant(spec.get("value", 1.0))
            if kind == "power":
                return cls.power(spec["gamma"])
            if kind == "reflected-power":
                return cls.reflected_power(spec["delta"])
            if kind == "sine":
                return cls.sine(spec["gamma"])
            if kind == "tabulated":
                if "csv" in spec:
                    path = Path(spec["csv"])
                    if base_dir is not None and not path.is_absolute():
                        path = Path(base_dir) / path
                    return cls.from_csv(path)
                t, a = zip(*spec["table"])
                return cls.tabulated(t, a)
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", where=f"weight.{kind}") from None
        except ValueError as exc:
            raise ConfigError(str(exc), where=f"weight.{kind}") from None
        raise ConfigError(f"unknown weight kind {kind!r}", where="weight.kind")

    def to_config(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.param}
        if self.kind in ("power", "sine"):
            return {"kind": self.kind, "gamma": self.param}
        if self.kind == "reflected-power":
            return {"kind": self.kind, "delta": self.param}
        return {"kind": "tabulated", "table": [list(p) for p in zip(*self.table)]}

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        arr = _as_array(t)
        k, p = self.kind, self.param
        if k == "constant":
            val = np.full_like(arr, p)
        elif k == "power":
            val = arr**p
        elif k == "reflected-power":
            val = (1.0 - arr) ** p
        elif k == "sine":
            val = _sine_parts(arr, p)[0]
        else:
            val = np.maximum(self._interp(arr), 0.0)
        return _unwrap(arr, val)

    def derivative(self, t):
        arr = _as_array(t)
        k, p = self.kind, self.param
        if k == "constant":
            val = np.zeros_like(arr)
        elif k == "power":
            val = p * arr ** (p - 1)
        elif k == "reflected-power":
            val = -p * (1.0 - arr) ** (p - 1)
        elif k == "sine":
            _, cos, inner = _sine_parts(arr, p)
            val = inner * cos
        else:
            val = self._interp.derivative()(arr)
        return _unwrap(arr, val)

    def second_derivative(self, t):
        arr = _as_array(t)
        k, p = self.kind, self.param
        if k == "constant":
            val = np.zeros_like(arr)
        elif k == "power":
            val = p * (p - 1) * arr ** (p - 2)
        elif k == "reflected-power":
            val = p * (p - 1) * (1.0 - arr) ** (p - 2)
        elif k == "sine":
            sin, cos, inner = _sine_parts(arr, p)
            val = np.pi * p * (p - 1) * arr ** (p - 2) * cos - inner**2 * sin
        else:
            raise NotImplementedError("tabulated weights have no second derivative")
        return _unwrap(arr, val)

    def log_derivative(self, t):
        """alpha'(t) / alpha(t); raises SingularityError near a zero of alpha."""
        arr = _as_array(t)
        self._check_off_zeros(arr)
        k, p = self.kind, self.param
        if k == "constant":
            val = np.zeros_like(arr)
        elif k == "power":
            val = p / arr
        elif k == "reflected-power":
            val = -p / (1.0 - arr)
        elif k == "sine":
            sin, cos, inner = _sine_parts(arr, p)
            val = inner * cos / sin
        else:
            val = self._interp.derivative()(arr) / self._interp(arr)
        return _unwrap(arr, val)

    def _check_off_zeros(self, arr):
        for z in self.zero_set:
            if np.any(np.abs(arr - z) <= TOL_ZERO):
                raise SingularityError(f"t within {TOL_ZERO:g} of weight zero {z}")

    def distance_to_zeros(self, t):
        arr = np.asarray(t, dtype=float)
        if not self.zero_set:
            return np.full_like(arr, np.inf)
        z = np.asarray(self.zero_set)
        return np.min(np.abs(arr[..., None] - z), axis=-1)


def _check_exponent(value, name):
    if not (np.isfinite(value) and value >= 2.0):
        raise ValueError(f"{name} must be a real number >= 2, got {value!r}")


def _sine_parts(t, gamma):
    """sin(pi s), cos(pi s) and d/dt(pi s) for s = t**gamma, accurate near t = 1."""
    s = t**gamma
    with np.errstate(divide="ignore"):
        one_minus_s = -np.expm1(gamma * np.log(t))
    near_one = s > 0.5
    sin = np.where(near_one, np.sin(np.pi * one_minus_s), np.sin(np.pi * s))
    cos = np.where(near_one, -np.cos(np.pi * one_minus_s), np.cos(np.pi * s))
    inner = np.pi * gamma * t ** (gamma - 1)
    return sin, cos, inner


def eval_weight(w: WeightFunction, t):
    return w(t)


def log_derivative(w: WeightFunction, t):
    return w.log_derivative(t)


# -- grids and quadrature ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Composite Gauss-Legendre rule on [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    breakpoints: np.ndarray

    def __len__(self):
        return self.nodes.size

    def integrate(self, values):
        values = np.asarray(values)
        if values.shape[0] != self.nodes.size:
            raise ShapeError("values do not match the quadrature nodes")
        return np.tensordot(self.weights, values, axes=(0, 0))

    def same_as(self, other: "QuadratureGrid") -> bool:
        return self is other or (
            self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)
        )


def composite_gauss_legendre(
    panels: int = 64,
    order: int = 16,
    refine_at=(),
    ratio: float = 0.5,
    depth: int = 20,
) -> QuadratureGrid:
    """Composite rule with ``panels`` uniform panels, graded toward ``refine_at``.

    Each refinement point z splits its two neighbouring panels at
    z +/- H * ratio**k, k = 1..depth, where H is the neighbouring panel width.
    """
    base = np.linspace(0.0, 1.0, panels + 1)
    zs = sorted({float(min(max(z, 0.0), 1.0)) for z in refine_at})
    breaks = set(base.tolist()) | set(zs)
    ordered = np.array(sorted(breaks))
    extra = []
    for z in zs:
        i = int(np.searchsorted(ordered, z))
        if i + 1 < ordered.size:
            h = ordered[i + 1] - z
            extra += [z + h * ratio**k for k in range(1, depth + 1)]
        if i > 0:
            h = z - ordered[i - 1]
            extra += [z - h * ratio**k for k in range(1, depth + 1)]
    bp = np.unique(np.concatenate([ordered, extra]))
    x, wx = np.polynomial.legendre.leggauss(order)
    a, b = bp[:-1, None], bp[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * wx).ravel()
    return QuadratureGrid(nodes, weights, bp)


def quadrature_grid(*weights: WeightFunction, panels: int = 64, order: int = 16) -> QuadratureGrid:
    """Default rule for functions living in L^2 of the given weights."""
    zeros = [z for w in weights if w is not None for z in w.zero_set]
    return composite_gauss_legendre(panels, order, refine_at=zeros)


def chebyshev_grid(*weights: WeightFunction, n: int = 257, margin: float = 1e-3) -> np.ndarray:
    """Chebyshev-Lobatto points on [0, 1] with points near weight zeros removed."""
    k = np.arange(n)
    t = 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))
    keep = np.ones(n, dtype=bool)
    for w in weights:
        if w is not None and w.zero_set:
            keep &= w.distance_to_zeros(t) > margin
    return t[keep]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Vector function sampled at the nodes of a grid; ``values`` has shape (n, d)."""

    nodes: np.ndarray
    values: np.ndarray
    grid: QuadratureGrid | None = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != np.size(self.nodes):
            raise ShapeError(f"values of shape {vals.shape} do not match {np.size(self.nodes)} nodes")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))

    @classmethod
    def sample(cls, f, grid) -> "GridFunction":
        """Evaluate vectorized ``f(t) -> (n,) or (n, d)`` on a grid or node array."""
        if isinstance(grid, QuadratureGrid):
            return cls(grid.nodes, f(grid.nodes), grid)
        nodes = np.asarray(grid, dtype=float)
        return cls(nodes, f(nodes))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.nodes, values, self.grid)


def weighted_inner_product(u: GridFunction, v: GridFunction, w: WeightFunction | None) -> complex:
    """Composite-quadrature value of  int_0^1 <u(t), v(t)>_H alpha(t) dt.

    The H inner product is linear in the first argument.
    """
    if u.grid is None or v.grid is None:
        raise ShapeError("inner products need functions sampled on a quadrature grid")
    if not u.grid.same_as(v.grid) or u.values.shape != v.values.shape:
        raise ShapeError("grid functions are sampled on different grids")
    pointwise = np.sum(u.values * np.conj(v.values), axis=1)
    if w is not None:
        pointwise = pointwise * w(u.nodes)
    return complex(u.grid.integrate(pointwise))


def weighted_norm_sq(u: GridFunction, w: WeightFunction | None) -> float:
    return weighted_inner_product(u, u, w).real
