"""Unitary multiplication maps between weighted L^2 spaces and the conjugated expression.

``WeightTransform(source=beta, target=alpha)`` is u -> sqrt(beta/alpha) u from
L^2_beta to L^2_alpha; ``source=None`` means the unweighted space, so
``WeightTransform(None, alpha)`` is u -> u / sqrt(alpha).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientPath, ConstantOperator, normal_form, normality_residual
from .extensions import NormalExtension
from .errors import SingularityError
from .weights import TOL_ZERO, GridFunction, WeightFunction, chebyshev_grid


def _eval(w, t):
    return np.ones_like(t) if w is None else np.asarray(w(t), dtype=float)


def _log_derivative(w, t):
    return np.zeros_like(t) if w is None else np.asarray(w.log_derivative(t), dtype=float)


@dataclass(frozen=True)
class WeightTransform:
    source: WeightFunction | None
    target: WeightFunction | None

    def inverse(self) -> "WeightTransform":
        return WeightTransform(self.target, self.source)

    def _check(self, t):
        for w in (self.source, self.target):
            if w is not None and w.zero_set and np.any(w.distance_to_zeros(t) <= TOL_ZERO):
                raise SingularityError("grid node on a weight zero")

    def multiplier(self, t):
        t = np.asarray(t, dtype=float)
        self._check(t)
        return np.sqrt(_eval(self.source, t) / _eval(self.target, t))

    def apply(self, u: GridFunction) -> GridFunction:
        return u.with_values(self.multiplier(u.nodes)[:, None] * u.values)

    def isometry_defect(self, u: GridFunction, v: GridFunction | None = None) -> dict:
        """Relative mismatch of <Fu, Fv>_target and <u, v>_source on u's quadrature grid.

        Nodes within TOL_ZERO of a zero set are dropped from both sums; their
        quadrature mass is reported as ``excluded_mass``.
        """
        v = u if v is None else v
        t = u.nodes
        keep = np.ones(t.size, dtype=bool)
        for w in (self.source, self.target):
            if w is not None and w.zero_set:
                keep &= w.distance_to_zeros(t) > TOL_ZERO
        wq = u.grid.weights
        m = np.zeros(t.size)
        m[keep] = np.sqrt(_eval(self.source, t[keep]) / _eval(self.target, t[keep]))
        inner_uv = np.sum(u.values * np.conj(v.values), axis=1)
        lhs = np.sum(wq[keep] * (m[keep] ** 2 * inner_uv[keep]) * _eval(self.target, t[keep]))
        rhs = np.sum(wq[keep] * inner_uv[keep] * _eval(self.source, t[keep]))
        return {
            "relative_error": float(abs(lhs - rhs) / max(abs(rhs), np.finfo(float).tiny)),
            "excluded_mass": float(np.sum(wq[~keep])),
        }


def apply_transform(tr: WeightTransform, u: GridFunction) -> GridFunction:
    return tr.apply(u)


def conjugate_coefficients(path: CoefficientPath, alpha: WeightFunction, beta: WeightFunction) -> CoefficientPath:
    """Coefficients of F_beta^alpha l F_alpha^beta:  A_r(t) - alpha'/(2 alpha) + beta'/(2 beta)."""
    return path.shifted(lambda t: 0.5 * (_log_derivative(beta, t) - _log_derivative(alpha, t)))


def conjugated_expression(C: ConstantOperator, a_i, beta: WeightFunction) -> CoefficientPath:
    """j(u) = u' + (beta'/(2 beta) I + C) u + i A_i u, the expression carried into L^2_beta."""
    return normal_form(beta, C, a_i)


def formal_normality_transfer_check(C, a_i, alpha, beta, grid=None, l_path: CoefficientPath | None = None) -> dict:
    """Normality residuals of l in L^2_alpha and of its conjugate j in L^2_beta.

    ``l_path`` defaults to the formally normal family for (alpha, C, a_i);
    pass a perturbed path to see the defect carried across.
    """
    l_path = normal_form(alpha, C, a_i) if l_path is None else l_path
    j_path = conjugate_coefficients(l_path, alpha, beta)
    t = chebyshev_grid(alpha, beta) if grid is None else grid
    return {
        "residual_alpha": normality_residual(l_path, alpha, t),
        "residual_beta": normality_residual(j_path, beta, t),
    }


def conjugate_extension(ext: NormalExtension, beta: WeightFunction) -> NormalExtension:
    """The extension F_beta^alpha L_W F_alpha^beta of the j-minimal operator in L^2_beta.

    sqrt(beta) F_beta^alpha u equals sqrt(alpha) u pointwise, so the boundary
    condition and hence W carry over unchanged.
    """
    return NormalExtension(beta, ext.C, ext.W, ext.a_i, ext.step)
