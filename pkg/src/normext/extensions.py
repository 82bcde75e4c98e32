"""Normal extensions L_W defined by (sqrt(alpha) u)(1) = U(1, 0) W (sqrt(alpha) u)(0)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientPath, ConstantOperator, normal_form, imag_part_callable
from .errors import InvalidExtensionError, TraceError
from .evolution import DEFAULT_STEP, Propagator
from .weights import GridFunction, WeightFunction, chebyshev_grid

TOL_UNITARY = 1e-10
TOL_COMMUTE = 1e-10


@dataclass(frozen=True, eq=False)
class NormalExtension:
    """Data (alpha, C, A_i, W) of a normal extension; the propagator is built on construction.

    Construction does not validate; call :func:`validate` first.
    """

    weight: WeightFunction
    C: ConstantOperator
    W: np.ndarray
    a_i: object = None
    step: float = DEFAULT_STEP
    propagator: Propagator = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "W", np.atleast_2d(np.asarray(self.W, dtype=complex)))
        object.__setattr__(self, "propagator", Propagator(self.a_i, self.step, dim=self.C.dim))

    @property
    def dim(self) -> int:
        return self.C.dim

    def coefficients(self) -> CoefficientPath:
        """A(t) = alpha'/(2 alpha) I + C + i A_i(t)."""
        return normal_form(self.weight, self.C, self.a_i)

    def imag_part(self, t):
        return imag_part_callable(self.a_i, self.dim)(np.atleast_1d(t))

    def with_W(self, W) -> "NormalExtension":
        return NormalExtension(self.weight, self.C, W, self.a_i, self.step)

    def with_weight(self, weight: WeightFunction) -> "NormalExtension":
        return NormalExtension(weight, self.C, self.W, self.a_i, self.step)


@dataclass
class CheckResult:
    passed: bool
    defect: float
    tolerance: float
    note: str = ""


@dataclass
class ValidationReport:
    checks: dict[str, CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "valid": self.ok,
            "checks": {
                name: {"passed": c.passed, "defect": c.defect, "tolerance": c.tolerance, "note": c.note}
                for name, c in self.checks.items()
            },
        }


def validate(ext: NormalExtension, strict: bool = True) -> ValidationReport:
    """Check W unitary, CW = WC, C >= 0, C A_i(t) = A_i(t) C and the weight.

    With ``strict`` any failure raises InvalidExtensionError (carrying the report).
    """
    d = ext.dim
    W, C = ext.W, ext.C.matrix
    checks = {}
    if W.shape != (d, d):
        checks["W_shape"] = CheckResult(False, float("inf"), 0.0, f"W has shape {W.shape}, expected {(d, d)}")
    else:
        unit = float(np.linalg.norm(W.conj().T @ W - np.eye(d)))
        checks["W_unitary"] = CheckResult(unit <= TOL_UNITARY, unit, TOL_UNITARY)
        tol = TOL_COMMUTE * (1.0 + np.linalg.norm(C))
        comm = float(np.linalg.norm(C @ W - W @ C))
        checks["CW_equals_WC"] = CheckResult(comm <= tol, comm, tol)
    lam_min = ext.C.min_eigenvalue
    note = "" if lam_min > 1e-12 else "C is only semidefinite; inverse-based diagnostics unavailable"
    checks["C_positive"] = CheckResult(lam_min >= -1e-10, max(0.0, -lam_min), 1e-10, note)

    t = chebyshev_grid(ext.weight, n=65)
    ai = ext.imag_part(t)
    tol = TOL_COMMUTE * (1.0 + np.linalg.norm(C)) * (1.0 + np.max(np.linalg.norm(ai, axis=(1, 2))))
    comm = float(np.max(np.linalg.norm(C @ ai - ai @ C, axis=(1, 2))))
    checks["C_commutes_A_i"] = CheckResult(comm <= tol, comm, tol)

    samples = ext.weight(np.linspace(0.0, 1.0, 1025))
    neg = float(max(0.0, -np.min(samples)))
    checks["weight_admissible"] = CheckResult(
        neg == 0.0 and np.all(np.isfinite(samples)), neg, 0.0, f"zero set {list(ext.weight.zero_set)}"
    )
    report = ValidationReport(checks)
    if strict and not report.ok:
        raise InvalidExtensionError(report)
    return report


def boundary_matrix(ext: NormalExtension) -> np.ndarray:
    """B = U(1, 0) W, linking the boundary traces of sqrt(alpha) u."""
    return ext.propagator.propagate(0.0, 1.0) @ ext.W


def _extrapolate(nodes, values, target):
    """Quadratic extrapolation to ``target`` from the three nodes nearest to it."""
    idx = np.argsort(np.abs(nodes - target))[:3]
    x, y = nodes[idx], values[idx]
    out = np.zeros(values.shape[1], dtype=complex)
    for j in range(3):
        others = [x[k] for k in range(3) if k != j]
        basis = np.prod([(target - o) / (x[j] - o) for o in others])
        out += basis * y[j]
    return out


def endpoint_traces(weight: WeightFunction, u: GridFunction):
    """(sqrt(alpha) u)(0) and (sqrt(alpha) u)(1).

    An endpoint value is used directly when the grid contains the endpoint and
    alpha does not vanish there; otherwise it is extrapolated from the three
    nearest nodes.
    """
    nodes = u.nodes
    su = np.sqrt(weight(nodes))[:, None] * u.values
    traces = []
    for end in (0.0, 1.0):
        hit = np.flatnonzero(nodes == end)
        if hit.size and weight(end) > 0 and np.all(np.isfinite(su[hit[0]])):
            traces.append(su[hit[0]])
            continue
        interior = (nodes != end) & np.all(np.isfinite(su), axis=1)
        if np.count_nonzero(interior) < 3:
            raise TraceError(f"not enough finite samples to extrapolate to t = {end}")
        value = _extrapolate(nodes[interior], su[interior], end)
        if not np.all(np.isfinite(value)):
            raise TraceError(f"non-finite trace at t = {end}")
        traces.append(value)
    return traces[0], traces[1]


def boundary_residual(ext: NormalExtension, u: GridFunction) -> float:
    """|| (sqrt(alpha) u)(1) - B (sqrt(alpha) u)(0) ||_2."""
    left, right = endpoint_traces(ext.weight, u)
    return float(np.linalg.norm(right - boundary_matrix(ext) @ left))
