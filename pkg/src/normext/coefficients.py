"""Operator coefficient A(t) = A_r(t) + i A_i(t) on C^d and the normality checks.

The central test is the formal-normality identity

    A*(t) A(t) - A(t) A*(t) = (2 A_r(t) - (alpha'/alpha)(t) I)'

evaluated on a finite grid, with the derivative on the right taken by
five-point finite differences on the (possibly non-uniform) grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    InsufficientResolutionError,
    NotNormalFormError,
    PositivityError,
    SemidefiniteWarning,
    ShapeError,
    SingularityError,
)
from .weights import TOL_ZERO, WeightFunction, chebyshev_grid

TOL_HERMITIAN = 1e-12
TOL_CONST = 1e-6

_PROBE = 0.5 * (1.0 - np.cos(np.pi * (np.arange(33) + 0.5) / 33))


def _fro(m):
    return np.linalg.norm(m, axis=(-2, -1))


def _hermitian_defect(m):
    m = np.asarray(m)
    return _fro(m - np.conj(np.swapaxes(m, -1, -2)))


# -- constant operator C -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstantOperator:
    """Hermitian positive semidefinite matrix C with its eigendecomposition."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, matrix, tol: float = 1e-10) -> "ConstantOperator":
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"C must be square, got {m.shape}")
        scale = max(1.0, np.linalg.norm(m))
        if _hermitian_defect(m) > TOL_HERMITIAN * scale:
            raise ValueError("C must be Hermitian")
        m = 0.5 * (m + m.conj().T)
        vals, vecs = np.linalg.eigh(m)
        if vals[0] < -tol * scale:
            raise PositivityError(f"C has negative eigenvalue {vals[0]:.3e}")
        return cls(m, vals, vecs)

    @classmethod
    def diag(cls, values) -> "ConstantOperator":
        return cls.from_matrix(np.diag(np.asarray(values, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def is_positive_definite(self, tol: float = 1e-12) -> bool:
        return self.min_eigenvalue > tol

    def expm(self, s) -> np.ndarray:
        """exp(s C) for scalar s, or a stack of them for an array of s."""
        s = np.asarray(s)
        phase = np.exp(np.multiply.outer(s, self.eigenvalues))
        v = self.eigenvectors
        return (v * phase[..., None, :]) @ v.conj().T


# -- coefficient paths ---------------------------------------------------------


def _vectorize(f: Callable, dim: int) -> Callable:
    """Wrap ``f`` so that an array of n times yields an (n, d, d) stack."""

    def pointwise(t):
        return np.stack([np.asarray(f(float(x)), dtype=complex).reshape(dim, dim) for x in t])

    def wrapped(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        try:
            out = np.asarray(f(t), dtype=complex)
        except (TypeError, ValueError):
            return pointwise(t)
        if out.shape == (t.size, dim, dim):
            return out
        if dim == 1 and out.shape == t.shape:
            return out.reshape(-1, 1, 1)
        return pointwise(t)

    return wrapped


@dataclass(frozen=True, eq=False)
class CoefficientPath:
    """t -> (A_r(t), A_i(t)), both Hermitian d x d and commuting pointwise.

    ``real_part`` and ``imag_part`` accept a scalar (returning d x d) or an
    array of n times (returning n x d x d).
    """

    dim: int
    _a_r: Callable
    _a_i: Callable
    representation: str = "function"

    def __post_init__(self):
        t = _PROBE
        ar, ai = self._a_r(t), self._a_i(t)
        ok = np.all(np.isfinite(ar), axis=(1, 2)) & np.all(np.isfinite(ai), axis=(1, 2))
        ar, ai = ar[ok], ai[ok]
        if ar.size == 0:
            return
        if np.any(_hermitian_defect(ar) > TOL_HERMITIAN * np.maximum(1.0, _fro(ar))):
            raise ValueError("A_r(t) is not Hermitian")
        if np.any(_hermitian_defect(ai) > TOL_HERMITIAN * np.maximum(1.0, _fro(ai))):
            raise ValueError("A_i(t) is not Hermitian")
        comm = _fro(ar @ ai - ai @ ar)
        if np.any(comm > tol_comm(ar, ai)):
            raise ValueError(f"A_r(t) and A_i(t) do not commute (defect {comm.max():.2e})")

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, a_r, a_i=None) -> "CoefficientPath":
        a_r = np.atleast_2d(np.asarray(a_r, dtype=complex))
        a_i = np.zeros_like(a_r) if a_i is None else np.atleast_2d(np.asarray(a_i, dtype=complex))
        return cls(
            a_r.shape[0],
            lambda t: np.broadcast_to(a_r, (np.size(t),) + a_r.shape).copy(),
            lambda t: np.broadcast_to(a_i, (np.size(t),) + a_i.shape).copy(),
            "constant",
        )

    @classmethod
    def polynomial(cls, a_r_coeffs, a_i_coeffs=None) -> "CoefficientPath":
        """Coefficient stacks of shape (deg + 1, d, d), ascending powers of t."""
        pr = np.asarray(a_r_coeffs, dtype=complex)
        if pr.ndim == 1:
            pr = pr[:, None, None]
        pi = np.zeros((1,) + pr.shape[1:], complex) if a_i_coeffs is None else np.asarray(a_i_coeffs, complex)
        if pi.ndim == 1:
            pi = pi[:, None, None]
        if pr.shape[1:] != pi.shape[1:]:
            raise ShapeError("A_r and A_i polynomial coefficients have different sizes")

        def poly(c):
            return lambda t: np.tensordot(np.power.outer(np.atleast_1d(t), np.arange(c.shape[0])), c, axes=(1, 0))

        return cls(pr.shape[1], poly(pr), poly(pi), "polynomial")

    @classmethod
    def tabulated(cls, t, a_r_samples, a_i_samples=None) -> "CoefficientPath":
        t = np.asarray(t, dtype=float)
        sr = np.asarray(a_r_samples, dtype=complex)
        if sr.ndim == 1:
            sr = sr[:, None, None]
        si = np.zeros_like(sr) if a_i_samples is None else np.asarray(a_i_samples, dtype=complex)
        if si.ndim == 1:
            si = si[:, None, None]
        if t.size < 5:
            raise InsufficientResolutionError("tabulated coefficients need at least 5 samples")
        if sr.shape[0] != t.size or si.shape != sr.shape:
            raise ShapeError("tabulated samples do not match the time grid")
        spl_r, spl_i = CubicSpline(t, sr, axis=0), CubicSpline(t, si, axis=0)
        return cls(sr.shape[1], lambda x: spl_r(np.atleast_1d(x)), lambda x: spl_i(np.atleast_1d(x)), "tabulated")

    @classmethod
    def from_functions(cls, a_r: Callable, a_i: Callable | None = None, dim: int = 1) -> "CoefficientPath":
        """Arbitrary closed-form callables (scalar or vectorized in t)."""
        if a_i is None:
            a_i = lambda t: np.zeros((np.size(t), dim, dim))  # noqa: E731
        return cls(dim, _vectorize(a_r, dim), _vectorize(a_i, dim), "function")

    # -- evaluation -------------------------------------------------------

    def real_part(self, t):
        out = self._a_r(np.atleast_1d(t))
        return out[0] if np.ndim(t) == 0 else out

    def imag_part(self, t):
        out = self._a_i(np.atleast_1d(t))
        return out[0] if np.ndim(t) == 0 else out

    def matrix(self, t):
        return self.real_part(t) + 1j * self.imag_part(t)

    def shifted(self, real_shift: Callable) -> "CoefficientPath":
        """New path with A_r(t) + real_shift(t) I; A_i unchanged."""
        d = self.dim
        eye = np.eye(d)

        def a_r(t):
            t = np.atleast_1d(t)
            return self._a_r(t) + np.asarray(real_shift(t), dtype=float).reshape(-1, 1, 1) * eye

        return CoefficientPath(d, a_r, self._a_i, self.representation)


def tol_comm(a_r, a_i) -> np.ndarray:
    return 1e-10 * (1.0 + _fro(a_r) * _fro(a_i))


def normal_form(
    weight: WeightFunction,
    C: ConstantOperator,
    a_i=None,
) -> CoefficientPath:
    """A(t) = alpha'/(2 alpha) I + C + i A_i(t): the formally normal family for ``weight``.

    ``a_i`` may be None, a constant matrix, a callable, or a CoefficientPath
    (whose imaginary part is used).
    """
    d = C.dim
    cm = C.matrix
    eye = np.eye(d)

    def a_r(t):
        t = np.atleast_1d(t)
        return 0.5 * weight.log_derivative(t)[:, None, None] * eye + cm

    return CoefficientPath(d, a_r, imag_part_callable(a_i, d), "function")


def imag_part_callable(a_i, d: int) -> Callable:
    if a_i is None:
        return lambda t: np.zeros((np.size(t), d, d), complex)
    if isinstance(a_i, CoefficientPath):
        return a_i._a_i
    if callable(a_i):
        return _vectorize(a_i, d)
    m = np.atleast_2d(np.asarray(a_i, dtype=complex))
    return lambda t: np.broadcast_to(m, (np.size(t), d, d)).copy()


# -- finite differences on arbitrary grids -------------------------------------


def fd_weights(x0: float, xs, order: int = 1) -> np.ndarray:
    """Weights w with sum_j w_j f(xs_j) ~ f^(order)(x0), exact for polynomials of degree < len(xs)."""
    xs = np.asarray(xs, dtype=float)
    h = np.max(np.abs(xs - x0)) or 1.0
    s = (xs - x0) / h
    n = s.size
    vander = np.vander(s, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs) / h**order


def _segments(t: np.ndarray, zeros) -> list[slice]:
    """Split sorted grid points into runs that contain no weight zero between neighbours."""
    cuts = [0]
    for i in range(1, t.size):
        if any(t[i - 1] < z < t[i] for z in zeros):
            cuts.append(i)
    cuts.append(t.size)
    return [slice(a, b) for a, b in zip(cuts[:-1], cuts[1:])]


def grid_derivative(values, t, zeros=(), width: int = 5) -> np.ndarray:
    """Derivative of samples ``values[i] = f(t[i])`` with centred five-point stencils.

    Stencils are one-sided at the ends of each run of points not separated by
    a weight zero.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values)
    if np.any(np.diff(t) <= 0):
        raise ValueError("grid must be strictly increasing")
    out = np.empty_like(values, dtype=np.result_type(values, float))
    half = width // 2
    for seg in _segments(t, zeros):
        ts, vs = t[seg], values[seg]
        n = ts.size
        if n < width:
            raise InsufficientResolutionError(f"a grid segment has {n} < {width} points")
        for i in range(n):
            lo = min(max(i - half, 0), n - width)
            w = fd_weights(ts[i], ts[lo : lo + width])
            # differencing against the centre value makes constants exact
            out[seg][i] = np.tensordot(w, vs[lo : lo + width] - vs[i], axes=(0, 0))
    return out


# -- checks ---------------------------------------------------------------------


def _prepare_grid(w: WeightFunction, grid):
    t = chebyshev_grid(w) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if t.size < 5:
        raise InsufficientResolutionError(f"grid has {t.size} < 5 points")
    if w.zero_set and np.any(w.distance_to_zeros(t) <= TOL_ZERO):
        raise SingularityError("grid touches a zero of the weight")
    return t


def normality_residual(a: CoefficientPath, w: WeightFunction, grid=None) -> float:
    """max_t || [A*, A](t) - d/dt (2 A_r(t) - (alpha'/alpha)(t) I) ||_F over the grid."""
    t = _prepare_grid(w, grid)
    ar, ai = a.real_part(t), a.imag_part(t)
    A = ar + 1j * ai
    Ah = np.conj(np.swapaxes(A, -1, -2))
    comm = Ah @ A - A @ Ah
    g = 2.0 * ar - w.log_derivative(t)[:, None, None] * np.eye(a.dim)
    dg = grid_derivative(g, t, w.zero_set)
    return float(np.max(_fro(comm - dg)))


def constant_part_samples(a: CoefficientPath, w: WeightFunction, grid=None):
    """C(t) = A_r(t) - alpha'/(2 alpha) I at each grid point."""
    t = _prepare_grid(w, grid)
    return t, a.real_part(t) - 0.5 * w.log_derivative(t)[:, None, None] * np.eye(a.dim)


def extract_constant_C(a: CoefficientPath, w: WeightFunction, grid=None) -> ConstantOperator:
    """Recover the constant C of A_r(t) = alpha'/(2 alpha) I + C.

    Raises NotNormalFormError if C(t) varies by more than
    1e-6 (1 + ||C||_F) and PositivityError for a negative eigenvalue.  A
    singular (semidefinite) C is returned with a SemidefiniteWarning.
    """
    _, ct = constant_part_samples(a, w, grid)
    c_bar = ct.mean(axis=0)
    deviation = float(np.max(_fro(ct - c_bar)))
    if deviation > TOL_CONST * (1.0 + np.linalg.norm(c_bar)):
        raise NotNormalFormError(f"C(t) is not constant: max deviation {deviation:.3e}")
    C = ConstantOperator.from_matrix(c_bar)
    if not C.is_positive_definite(1e-12 * max(1.0, np.linalg.norm(c_bar))):
        warnings.warn("extracted C is only positive semidefinite", SemidefiniteWarning, stacklevel=2)
    return C


def accretivity_margin(a: CoefficientPath, w: WeightFunction, grid=None) -> float:
    """min over the grid of the smallest eigenvalue of A_r(t) - alpha'/(2 alpha) I."""
    _, ct = constant_part_samples(a, w, grid)
    ct = 0.5 * (ct + np.conj(np.swapaxes(ct, -1, -2)))
    return float(np.min(np.linalg.eigvalsh(ct)))
