"""s-numbers of L_W^{-1}, decay fits, Schatten verdicts and the resolvent-difference diagnostic.

L_W is normal, so the singular values of its inverse are the reciprocal
moduli of its eigenvalues; they are read off the spectrum lattice with no
discretization error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import FitError, InverseUndefinedError, ParameterError, ResolventSingularityError, ShapeError
from .extensions import NormalExtension, validate
from .spectral import TWO_PI, closed_form_spectrum, discretization_matrices

SCHATTEN_MARGIN = 0.02
NONZERO_TOL = 1e-10
DENSE_CROSSCHECK = 1024
MIN_FIT_POINTS = 50


@dataclass(frozen=True)
class SingularSequence:
    """Non-increasing positive singular values s_1 >= s_2 >= ...

    ``saturation_index`` is the number of leading values unaffected by the
    finite number of branches (lattice points with |lambda| <= max rho_j);
    beyond it the sequence follows the finite-d regime.
    """

    values: np.ndarray
    source: str = "lattice"
    saturation_index: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ShapeError("singular values must form a 1-d sequence")
        if np.any(v <= 0) or np.any(np.diff(v) > 0):
            raise ValueError("singular values must be positive and non-increasing")
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class GrowthModel:
    """Eigenvalues lambda_n(C) = c n^beta."""

    beta: float
    c: float = 1.0

    def __post_init__(self):
        for name in ("beta", "c"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be finite and positive, got {v}")

    def eigenvalues(self, d: int) -> np.ndarray:
        return self.c * np.arange(1, d + 1, dtype=float) ** self.beta

    @property
    def theta(self) -> float:
        return self.beta / (1.0 + self.beta)


def _count_within(rho, theta, R):
    """Number of lattice points with |lambda| <= R."""
    half = np.sqrt(np.maximum(R**2 - rho**2, 0.0))
    inside = rho <= R
    lo = np.ceil((theta - half) / TWO_PI)
    hi = np.floor((theta + half) / TWO_PI)
    return int(np.sum(np.where(inside, np.maximum(hi - lo + 1, 0), 0)))


def lattice_moduli(rho, theta, m: int) -> np.ndarray:
    """The m smallest |lambda_{j,k}| over all branches, ascending."""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    R = max(float(np.min(np.hypot(rho, _wrap_near(theta)))), 1.0)
    while _count_within(rho, theta, R) < m:
        R *= 1.5
    mods = []
    for r, th in zip(rho, theta):
        if r > R:
            continue
        half = np.sqrt(R**2 - r**2)
        ks = np.arange(np.ceil((th - half) / TWO_PI), np.floor((th + half) / TWO_PI) + 1)
        mods.append(np.hypot(r, TWO_PI * ks - th))
    mods = np.sort(np.concatenate(mods))
    return mods[:m]


def _wrap_near(theta):
    """Distance from theta to the nearest multiple of 2 pi."""
    return np.abs(theta - TWO_PI * np.round(theta / TWO_PI))


def saturation_count(rho, theta) -> int:
    return _count_within(np.asarray(rho), np.asarray(theta), float(np.max(rho)))


def lattice_singular_values(ext: NormalExtension, m: int) -> SingularSequence:
    if m < 1:
        raise ParameterError("m must be at least 1")
    lat = closed_form_spectrum(ext, (0, 0))
    if np.min(np.hypot(lat.rho, _wrap_near(lat.theta))) <= 1e-14:
        raise InverseUndefinedError("0 is an eigenvalue of L_W")
    mods = lattice_moduli(lat.rho, lat.theta, m)
    return SingularSequence(1.0 / mods, "lattice", saturation_count(lat.rho, lat.theta))


def default_fit_range(n: int) -> tuple[int, int]:
    """Drop the first 10% and the last 5% of a length-n sequence (1-based, inclusive)."""
    return max(1, int(np.floor(0.1 * n)) + 1), max(1, int(np.ceil(0.95 * n)))


def presaturation_range(s: SingularSequence) -> tuple[int, int]:
    """Default range applied to the part of the sequence before branch saturation.

    Falls back to the whole sequence when that part is too short to fit,
    i.e. when every branch is already active from the start.
    """
    n = s.count if s.saturation_index is None else min(s.count, s.saturation_index)
    lo, hi = default_fit_range(n)
    if hi - lo + 1 < MIN_FIT_POINTS:
        return default_fit_range(s.count)
    return lo, hi


def fit_decay_exponent(s, fit_range=None, min_length: int = MIN_FIT_POINTS) -> dict:
    """Least-squares line through (ln n, ln s_n) over 1-based inclusive ``fit_range``."""
    values = s.values if isinstance(s, SingularSequence) else np.asarray(s, dtype=float)
    lo, hi = default_fit_range(values.size) if fit_range is None else (int(fit_range[0]), int(fit_range[1]))
    if not (1 <= lo < hi <= values.size):
        raise FitError(f"fit range [{lo}, {hi}] outside 1..{values.size}")
    if hi - lo + 1 < min_length:
        raise FitError(f"fit range holds {hi - lo + 1} points, need {min_length}")
    n = np.arange(lo, hi + 1, dtype=float)
    y = values[lo - 1 : hi]
    if np.any(y <= 0):
        raise FitError("non-positive values in fit range")
    x, ly = np.log(n), np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {
        "exponent": float(slope),
        "prefactor": float(np.exp(intercept)),
        "r_squared": r2,
        "fit_range": [lo, hi],
    }


def tail_constant(s: SingularSequence, start: int | None = None, stop: int | None = None) -> float:
    """Mean of n s_n over n in [start, stop] (default: the second half)."""
    start = s.count // 2 if start is None else start
    stop = s.count if stop is None else stop
    n = np.arange(start, stop + 1)
    return float(np.mean(n * s.values[start - 1 : stop]))


def schatten_p_report(s: SingularSequence, p: float, fit_range=None, exponent: float | None = None) -> dict:
    """Partial sum of s_n^p and a verdict from comparing p theta with 1 (margin 0.02).

    ``exponent`` overrides the fitted decay exponent, e.g. with a known theory value.
    """
    if not p >= 1:
        raise ParameterError(f"p must be at least 1, got {p}")
    if s.count < 100:
        raise FitError("Schatten report needs at least 100 values")
    fit = None
    if exponent is None:
        fit = fit_decay_exponent(s, fit_range)
        exponent = fit["exponent"]
    theta = -float(exponent)
    margin = p * theta - 1.0
    if margin > SCHATTEN_MARGIN:
        verdict = "convergent"
    elif margin < -SCHATTEN_MARGIN:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return {
        "p": float(p),
        "partial_sum": float(np.sum(s.values**p)),
        "theta": theta,
        "p_theta": p * theta,
        "convergence_verdict": verdict,
        "fit": fit,
    }


# -- resolvent difference ------------------------------------------------------------


def _lattice_distance(ext: NormalExtension, lam: complex) -> float:
    lat = closed_form_spectrum(ext, (0, 0))
    k = np.round((lam.imag + lat.theta) / TWO_PI)
    best = np.inf
    for dk in (-1, 0, 1):
        pts = lat.rho + 1j * (TWO_PI * (k + dk) - lat.theta)
        best = min(best, float(np.min(np.abs(pts - lam))))
    return best


def _nonzero_exponent(values, min_length):
    nz = values[values > NONZERO_TOL * max(1.0, values[0] if values.size else 1.0)]
    if nz.size < max(3, min_length):
        return None
    return fit_decay_exponent(nz, (1, nz.size), min_length=min(min_length, nz.size))["exponent"]


def _resolvent_parts(ext, lam0, N, scheme):
    A, B = discretization_matrices(ext, N, scheme)
    return (A - lam0 * B).tocsc(), B.tocsc()


def resolvent_difference_diagnostic(
    ext1: NormalExtension,
    ext2: NormalExtension,
    lam0: complex,
    N: int = 256,
    scheme: str = "box",
    min_length: int = 8,
    method: str = "auto",
) -> dict:
    """Singular values of R_1 - R_2 (discretized resolvents at lam0) and of W_1 - W_2.

    The two discrete problems differ only in the wrap block-row, so
    R_1 - R_2 = K_1^{-1} P G with P the last block-row injection; the
    singular values come from that rank-d factorization.  For N d <= 1024
    (or ``method="dense"``) both resolvents are also formed densely and the
    difference of the two routes is reported.
    """
    validate(ext1)
    validate(ext2)
    d = ext1.dim
    if ext2.dim != d or not np.allclose(ext1.C.matrix, ext2.C.matrix):
        raise ShapeError("extensions must share C and dimension")
    lam0 = complex(lam0)
    dist = min(_lattice_distance(ext1, lam0), _lattice_distance(ext2, lam0))
    if dist < 0.1:
        raise ResolventSingularityError(f"lambda0 = {lam0} lies within {dist:.3g} of the spectrum")

    K1, B1 = _resolvent_parts(ext1, lam0, N, scheme)
    K2, B2 = _resolvent_parts(ext2, lam0, N, scheme)
    n = N * d
    rows = slice(n - d, n)
    lu1, lu2 = spla.splu(K1), spla.splu(K2)
    P = np.zeros((n, d), dtype=complex)
    P[rows] = np.eye(d)
    X = lu1.solve(P)
    dK = (K1 - K2)[rows].toarray()
    dB = (B1 - B2)[rows].toarray()
    # G = P^T (B1 - B2) - P^T (K1 - K2) K2^{-1} B2
    Y = lu2.solve(dK.conj().T, trans="H").conj().T
    G = dB - (B2.T @ Y.T).T
    Qx, Rx = np.linalg.qr(X)
    Qg, Rg = np.linalg.qr(G.conj().T)
    s_res = np.linalg.svd(Rx @ Rg.conj().T, compute_uv=False)
    s_w = np.linalg.svd(ext1.W - ext2.W, compute_uv=False)

    cross = None
    if method == "dense" or (method == "auto" and n <= DENSE_CROSSCHECK):
        R1 = np.linalg.solve(K1.toarray(), B1.toarray())
        R2 = np.linalg.solve(K2.toarray(), B2.toarray())
        s_dense = np.linalg.svd(R1 - R2, compute_uv=False)[:d]
        cross = float(np.max(np.abs(s_dense - s_res)) / max(1.0, s_res[0]))

    e_res = _nonzero_exponent(s_res, min_length)
    e_w = _nonzero_exponent(s_w, min_length)
    agree = None if e_res is None or e_w is None else abs(e_res - e_w) <= 0.1
    return {
        "lambda0": [lam0.real, lam0.imag],
        "distance_to_spectrum": dist,
        "s_numbers_of_difference": s_res.tolist(),
        "s_numbers_of_W_difference": s_w.tolist(),
        "nonzero_count_difference": int(np.sum(s_res > NONZERO_TOL)),
        "nonzero_count_W_difference": int(np.sum(s_w > NONZERO_TOL)),
        "dense_crosscheck_discrepancy": cross,
        "decay_comparison": {
            "exponent_difference": e_res,
            "exponent_W_difference": e_w,
            "agree_within_0.1": agree,
        },
    }
