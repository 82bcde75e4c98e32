"""Unitary evolution family U(t, s) of  U_t' + i A_i(t) U = 0,  U(s, s) = I.

Second-order exponential midpoint stepping; every step is the exponential of
a skew-Hermitian matrix (computed from a Hermitian eigendecomposition), so
U stays unitary up to accumulated roundoff.
"""
from __future__ import annotations

import itertools

import numpy as np

from .coefficients import CoefficientPath, imag_part_callable
from .errors import DomainError

DEFAULT_STEP = 1e-3


def hermitian_phase(generator: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i tau G) for Hermitian G."""
    g = 0.5 * (generator + generator.conj().T)
    vals, vecs = np.linalg.eigh(g)
    return (vecs * np.exp(-1j * tau * vals)) @ vecs.conj().T


class Propagator:
    """Cached U(t_k, 0) on the grid t_k = k h, built eagerly at construction.

    ``a_i`` may be a CoefficientPath, a callable t -> (d, d) Hermitian, a
    constant matrix, or None (together with ``dim``) for a zero generator.
    The cache is written once in ``__init__`` and only read afterwards.
    """

    def __init__(self, a_i=None, step: float = DEFAULT_STEP, dim: int | None = None):
        if not step > 0:
            raise ValueError("step must be positive")
        if dim is None:
            if isinstance(a_i, CoefficientPath):
                dim = a_i.dim
            elif a_i is not None and not callable(a_i):
                dim = np.atleast_2d(a_i).shape[0]
            elif callable(a_i):
                dim = np.atleast_2d(np.asarray(a_i(0.5))).shape[0]
            else:
                raise ValueError("dim is required when a_i is None")
        self.dim = dim
        self.zero = a_i is None
        self._gen = imag_part_callable(a_i, dim)
        n = max(1, int(np.ceil(1.0 / step - 1e-9)))
        self.step = 1.0 / n
        self.times = np.linspace(0.0, 1.0, n + 1)
        self._cache = self._build()

    def generator(self, t):
        return self._gen(np.atleast_1d(t))[0]

    def _build(self):
        n, d = self.times.size - 1, self.dim
        cache = np.empty((n + 1, d, d), dtype=complex)
        cache[0] = np.eye(d)
        if self.zero:
            cache[1:] = np.eye(d)
            return cache
        mids = 0.5 * (self.times[:-1] + self.times[1:])
        gens = self._gen(mids)
        for k in range(n):
            cache[k + 1] = hermitian_phase(gens[k], self.step) @ cache[k]
        return cache

    def _from_zero(self, t: float) -> np.ndarray:
        """U(t, 0): cached value at the last grid time <= t, then one partial step."""
        k = min(int(np.floor(t / self.step + 1e-12)), self.times.size - 1)
        tk = self.times[k]
        if t - tk <= 1e-15 or self.zero:
            return self._cache[k]
        return hermitian_phase(self.generator(0.5 * (tk + t)), t - tk) @ self._cache[k]

    def propagate(self, s: float, t: float) -> np.ndarray:
        """U(t, s) = U(t, 0) U(0, s) with U(0, s) = U(s, 0)*."""
        for x in (s, t):
            if not 0.0 <= x <= 1.0:
                raise DomainError(f"time {x} outside [0, 1]")
        if t < s:
            return self.propagate(t, s).conj().T
        return self._from_zero(t) @ self._from_zero(s).conj().T

    def __call__(self, t, s=0.0):
        return self.propagate(s, t)

    def apply(self, t, values) -> np.ndarray:
        """Rows ``values[k]`` mapped to U(t_k, 0) values[k]."""
        t = np.atleast_1d(t)
        return np.stack([self._from_zero(float(x)) @ v for x, v in zip(t, values)])


def propagate(p: Propagator, s: float, t: float) -> np.ndarray:
    return p.propagate(s, t)


def unitarity_report(p: Propagator, probes: int = 11) -> dict:
    """Unitarity defect over the whole cache, cocycle and inverse defects on a probe set."""
    eye = np.eye(p.dim)
    cache = p._cache
    prod = np.conj(np.swapaxes(cache, -1, -2)) @ cache
    unit = float(np.max(np.linalg.norm(prod - eye, axis=(-2, -1))))
    grid = np.linspace(0.0, 1.0, probes)
    mats = {(a, b): p.propagate(a, b) for a in grid for b in grid}
    cocycle = 0.0
    inverse = 0.0
    for s, r, t in itertools.product(grid, repeat=3):
        if not (s <= r <= t):
            continue
        cocycle = max(cocycle, float(np.linalg.norm(mats[s, t] - mats[r, t] @ mats[s, r])))
    for s, t in itertools.product(grid, repeat=2):
        inverse = max(inverse, float(np.linalg.norm(mats[s, t] @ mats[t, s] - eye)))
        unit = max(unit, float(np.linalg.norm(mats[s, t].conj().T @ mats[s, t] - eye)))
    return {
        "max_unitarity_defect": unit,
        "max_cocycle_defect": cocycle,
        "max_inverse_defect": inverse,
    }
