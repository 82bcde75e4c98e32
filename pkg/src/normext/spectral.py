"""Closed-form spectrum lattice of L_W and an independent finite-difference oracle.

The lattice is

    lambda_{j,k} = ln|mu_j|^{-1} + i (2 k pi - arg mu_j),   mu_j in sigma(W* e^{-C}),

computed in the constant-coefficient representation m(u) = u' + C u,
u(1) = W u(0).  The oracle discretizes exactly that boundary value problem
and never touches the lattice formula.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .coefficients import fd_weights
from .errors import DegenerateSpectrumError, SizeError, WindowError
from .extensions import NormalExtension, validate

TWO_PI = 2.0 * np.pi
MAX_DENSE = 4096
DENSE_LIMIT = 512
UNDERFLOW_EXPONENT = 600.0


def _wrap(angle):
    """Map to (-pi, pi]."""
    a = np.mod(np.asarray(angle) + np.pi, TWO_PI) - np.pi
    return np.where(a == -np.pi, np.pi, a)


@dataclass(frozen=True, eq=False)
class SpectrumLattice:
    """Branch data (rho_j, theta_j) and a k-window; branches are numbered from 1."""

    rho: np.ndarray
    theta: np.ndarray
    k_min: int
    k_max: int
    mu: np.ndarray
    vectors: np.ndarray
    form_discrepancy: float = 0.0

    @property
    def dim(self) -> int:
        return self.rho.size

    def point(self, j: int, k: int) -> complex:
        """lambda_{j,k} for 1-based branch j."""
        return complex(self.rho[j - 1], TWO_PI * k - self.theta[j - 1])

    def branch_data(self) -> list[tuple[float, float]]:
        return [(float(r), float(t)) for r, t in zip(self.rho, self.theta)]

    def points(self):
        """(values, branches, ks) for every point in the window."""
        ks = np.arange(self.k_min, self.k_max + 1)
        branch = np.repeat(np.arange(1, self.dim + 1), ks.size)
        kk = np.tile(ks, self.dim)
        values = self.rho[branch - 1] + 1j * (TWO_PI * kk - self.theta[branch - 1])
        return values, branch, kk

    @property
    def values(self) -> np.ndarray:
        return self.points()[0]

    def records(self) -> list[dict]:
        values, branch, kk = self.points()
        return [
            {"re": float(v.real), "im": float(v.imag), "branch": int(b), "k": int(k)}
            for v, b, k in zip(values, branch, kk)
        ]

    def with_window(self, k_min: int, k_max: int) -> "SpectrumLattice":
        return SpectrumLattice(self.rho, self.theta, k_min, k_max, self.mu, self.vectors, self.form_discrepancy)


def _normal_eig(m: np.ndarray):
    """Eigenvalues and orthonormal eigenvectors of a normal matrix via complex Schur form."""
    T, Z = sla.schur(m, output="complex")
    return np.diag(T).copy(), Z


def simultaneous_pairs(C: np.ndarray, W: np.ndarray, tol: float = 1e-9, return_vectors: bool = False):
    """Joint eigenpairs (c_j, w_j) of commuting Hermitian C and unitary W."""
    cvals, cvecs = np.linalg.eigh(C)
    scale = max(1.0, float(np.max(np.abs(cvals))))
    pairs_c, pairs_w, vecs = [], [], []
    start = 0
    while start < cvals.size:
        stop = start + 1
        while stop < cvals.size and cvals[stop] - cvals[start] <= tol * scale:
            stop += 1
        V = cvecs[:, start:stop]
        wv, Z = _normal_eig(V.conj().T @ W @ V)
        pairs_c += [float(np.mean(cvals[start:stop]))] * (stop - start)
        pairs_w += list(wv)
        vecs.append(V @ Z)
        start = stop
    if return_vectors:
        return np.array(pairs_c), np.array(pairs_w), np.hstack(vecs)
    return np.array(pairs_c), np.array(pairs_w)


def joint_branches(C: np.ndarray, W: np.ndarray, adjoint: bool = True):
    """Branch data in the lambda_n(C) - i(arg lambda_n(W^(*) e^{-C}) + 2 k pi) form.

    With ``adjoint=True`` the phase is taken from W* e^{-C}, which reproduces
    the lattice of ``closed_form_spectrum``.  ``adjoint=False`` uses
    W e^{-C}, whose lattice is the complex conjugate.
    """
    c, w = simultaneous_pairs(C, W)
    phase = np.angle(np.conj(w) * np.exp(-c)) if adjoint else np.angle(w * np.exp(-c))
    return c, _wrap(phase)


def branch_discrepancy(rho_a, theta_a, rho_b, theta_b) -> float:
    """Max distance between two branch sets after optimal one-to-one matching (theta mod 2 pi)."""
    cost = np.hypot(
        np.subtract.outer(rho_a, rho_b),
        _wrap(np.subtract.outer(theta_a, theta_b)),
    )
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols])) if rows.size else 0.0


def closed_form_spectrum(ext: NormalExtension, k_window=(-5, 5)) -> SpectrumLattice:
    """Lattice from the eigenvalues of W* e^{-C}, cross-checked against the joint-diagonalization form.

    When exp(-C) underflows (eigenvalues of C above ~700) the branch data are
    taken in log form from the joint eigenpairs, and ``form_discrepancy`` is NaN.
    """
    validate(ext)
    k_min, k_max = (int(k) for k in k_window)
    if k_max < k_min:
        raise WindowError("empty k window")
    c_joint, th_joint = joint_branches(ext.C.matrix, ext.W)
    if np.max(ext.C.eigenvalues) > UNDERFLOW_EXPONENT:
        c, w, vecs = simultaneous_pairs(ext.C.matrix, ext.W, return_vectors=True)
        return SpectrumLattice(c, _wrap(-np.angle(w)), k_min, k_max, np.conj(w) * np.exp(-c), vecs, float("nan"))
    M = ext.W.conj().T @ ext.C.expm(-1.0)
    mu, vecs = _normal_eig(M)
    if np.any(np.abs(mu) <= np.finfo(float).tiny):
        raise DegenerateSpectrumError("W* exp(-C) has a zero eigenvalue")
    rho = -np.log(np.abs(mu))
    theta = _wrap(np.angle(mu))
    disc = branch_discrepancy(rho, theta, c_joint, th_joint)
    return SpectrumLattice(rho, theta, k_min, k_max, mu, vecs, disc)


def characteristic_determinant(ext: NormalExtension, lam: complex) -> float:
    """|det(W* e^{-C} - e^{-lambda} I)| / (||W* e^{-C}||_2 + |e^{-lambda}|)^d."""
    E = ext.W.conj().T @ ext.C.expm(-1.0)
    z = np.exp(-lam)
    scale = (np.linalg.norm(E, 2) + abs(z)) ** ext.dim
    return float(abs(np.linalg.det(E - z * np.eye(ext.dim))) / scale)


# -- discretized oracle ------------------------------------------------------------


def discretization_matrices(ext: NormalExtension, N: int, scheme: str = "box"):
    """Sparse (A, B) with A x = lambda B x the discrete eigenproblem of u' + C u, u(1) = W u(0).

    Unknowns are u_0 .. u_{N-1} (blocks of size d) on t_k = k/N and u_N is
    replaced by W u_0.  ``box`` averages C and lambda over each cell
    (trapezoidal, second order); ``upwind`` is the forward one-sided
    difference with C u_k (first order, B = I).
    """
    d, h = ext.dim, 1.0 / N
    C, W = ext.C.matrix, ext.W
    eye = sp.identity(d, dtype=complex, format="csr")
    shift = sp.diags([np.ones(N - 1)], [1], shape=(N, N), dtype=complex, format="csr")
    corner = sp.csr_matrix(([1.0], ([N - 1], [0])), shape=(N, N), dtype=complex)
    # S maps (u_0..u_{N-1}) to (u_1..u_{N-1}, W u_0)
    S = sp.kron(shift, eye) + sp.kron(corner, sp.csr_matrix(W))
    I = sp.identity(N * d, dtype=complex, format="csr")
    Cb = sp.kron(sp.identity(N), sp.csr_matrix(C))
    if scheme == "box":
        B = 0.5 * (I + S)
        A = (S - I) / h + Cb @ B
    elif scheme == "upwind":
        B = I
        A = (S - I) / h + Cb
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return A.tocsc(), B.tocsc()


def _dense_eigs(A, B, sigma):
    K = (A - sigma * B).toarray()
    X = np.linalg.solve(K, B.toarray())
    nu = np.linalg.eigvals(X)
    nu = nu[np.abs(nu) > 1e-14 * np.max(np.abs(nu))]
    return sigma + 1.0 / nu


def _sparse_window_eigs(A, B, x0, spread, y_max, spacing=16.0, density=1.0):
    n = A.shape[0]
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    n_targets = max(1, int(np.ceil(2 * y_max / spacing)))
    ys = -y_max + spacing * (np.arange(n_targets) + 0.5)
    need = np.hypot(spacing / 2, spread)
    found = []
    for y in ys:
        sigma = x0 + 1j * y
        lu = spla.splu((A - sigma * B).tocsc())
        op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(B @ x), dtype=complex)
        k = min(n - 2, int(density * 2 * need / TWO_PI * 1.5) + 8)
        while True:
            nu = spla.eigs(op, k=k, which="LM", v0=v0, return_eigenvectors=False, tol=1e-12)
            lam = sigma + 1.0 / nu
            radius = np.max(np.abs(lam - sigma))
            if radius > need or k >= n - 2:
                break
            k = min(n - 2, 2 * k)
        found.append(lam[np.abs(lam - sigma) < radius * (1 - 1e-9)] if k < n - 2 else lam)
    vals = np.concatenate(found)
    return _dedupe(vals[np.argsort(vals.imag)])


def _dedupe(vals, rtol=1e-8):
    kept = []
    for v in vals:
        if not any(abs(v - u) <= rtol * (1 + abs(v)) for u in kept):
            kept.append(v)
    return np.array(kept)


def discretized_spectrum(
    ext: NormalExtension,
    N: int,
    scheme: str = "box",
    window: float | None = None,
    h_cut: float = 0.2,
    method: str = "auto",
) -> np.ndarray:
    """Eigenvalues of the discretized m-operator with |Im lambda| in the trusted window.

    The trusted window is |Im lambda| <= h_cut / h; ``window`` narrows it
    further.  Small problems (N d <= 512) are solved densely, larger ones by
    shift-invert Arnoldi along the imaginary axis.
    """
    validate(ext)
    d = ext.dim
    if N < 64:
        raise SizeError("N must be at least 64")
    if N * d > MAX_DENSE:
        raise SizeError(f"N*d = {N * d} exceeds the budget of {MAX_DENSE}")
    y_max = h_cut * N if window is None else min(float(window), h_cut * N)
    A, B = discretization_matrices(ext, N, scheme)
    cvals = ext.C.eigenvalues
    x0 = float(np.mean(cvals))
    spread = float(np.max(np.abs(cvals - x0))) + 1.0
    if scheme == "upwind":
        spread += 0.5 * y_max**2 / N
    if method == "dense" or (method == "auto" and N * d <= DENSE_LIMIT):
        vals = _dense_eigs(A, B, cvals[0] - 1.0 - 0.3j)
    else:
        vals = _sparse_window_eigs(A, B, x0, spread, y_max, density=d)
    vals = vals[np.isfinite(vals) & (np.abs(vals.imag) <= y_max)]
    return vals[np.argsort(vals.imag)]


def match_spectra(lattice: SpectrumLattice, discrete, window=None, radius: float = np.pi) -> dict:
    """Greedy nearest-neighbour pairing of lattice points with discrete eigenvalues.

    ``window`` is an (im_min, im_max) strip; by default it spans the lattice
    window plus half a period.  A lattice point counts as unmatched when no
    unused discrete value lies within ``radius``.
    """
    lat = lattice.values if isinstance(lattice, SpectrumLattice) else np.asarray(lattice)
    disc = discrete.values if isinstance(discrete, SpectrumLattice) else np.asarray(discrete)
    if window is None:
        if lat.size == 0:
            raise WindowError("empty window")
        window = (lat.imag.min() - np.pi, lat.imag.max() + np.pi)
    lo, hi = window
    lat = lat[(lat.imag >= lo) & (lat.imag <= hi)]
    disc = disc[(disc.imag >= lo) & (disc.imag <= hi)]
    if lat.size == 0:
        raise WindowError(f"no lattice points in window {window}")
    if disc.size == 0:
        return {"max_pairing_distance": float("inf"), "unmatched_count": int(lat.size), "pairs": 0}
    dist = np.abs(lat[:, None] - disc[None, :])
    order = np.argsort(dist, axis=None)
    used_l = np.zeros(lat.size, bool)
    used_d = np.zeros(disc.size, bool)
    worst = 0.0
    pairs = 0
    for flat in order:
        i, j = divmod(int(flat), disc.size)
        if used_l[i] or used_d[j]:
            continue
        if dist[i, j] > radius:
            break
        used_l[i] = used_d[j] = True
        worst = max(worst, float(dist[i, j]))
        pairs += 1
        if pairs == lat.size:
            break
    return {
        "max_pairing_distance": worst,
        "unmatched_count": int(lat.size - pairs),
        "pairs": pairs,
    }


# -- eigenfunctions in the weighted representation ------------------------------


def eigenfunction(ext: NormalExtension, lam: complex, f) -> callable:
    """t -> (1/sqrt(alpha)) U(t, 0) e^{-(C - lambda) t} f, the eigenfunction of L_W.

    Returns a vectorized callable giving an (n, d) array.
    """
    f = np.asarray(f, dtype=complex).reshape(ext.dim)

    def v(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        m_rep = np.exp(lam * t)[:, None] * (ext.C.expm(-t) @ f)
        k_rep = ext.propagator.apply(t, m_rep)
        return k_rep / np.sqrt(ext.weight(t))[:, None]

    return v


def _local_derivative(fun, t, h, lo=0.0, hi=1.0):
    if t - 2 * h >= lo and t + 2 * h <= hi:
        xs = t + h * np.arange(-2, 3)
    elif t - 2 * h < lo:
        xs = t + h * np.arange(0, 5)
    else:
        xs = t - h * np.arange(0, 5)[::-1]
    w = fd_weights(t, xs)
    return np.tensordot(w, fun(xs), axes=(0, 0))


def eigen_equation_residual(ext: NormalExtension, lam: complex, f, t=None, step: float = 1e-3) -> float:
    """Relative residual of l(v) = lambda v for the mapped eigenfunction v.

    Pointwise ||v' + A v - lambda v|| / (||v'|| + ||A v|| + |lambda| ||v||),
    maximized over ``t`` (default: 64 interior Chebyshev points).  v' is a
    five-point finite difference with step min(step, dist/100), dist being the
    distance to the nearest weight zero.
    """
    v = eigenfunction(ext, lam, f)
    if t is None:
        t = 0.5 * (1.0 - np.cos(np.pi * (np.arange(64) + 0.5) / 64))
    coeffs = ext.coefficients()
    worst = 0.0
    for x in np.atleast_1d(t):
        dist = float(ext.weight.distance_to_zeros(x))
        h = min(step, dist / 100.0)
        vx = v(x)[0]
        dv = _local_derivative(v, x, h)
        Av = coeffs.matrix(x) @ vx
        r = np.linalg.norm(dv + Av - lam * vx)
        scale = np.linalg.norm(dv) + np.linalg.norm(Av) + abs(lam) * np.linalg.norm(vx)
        worst = max(worst, float(r / scale))
    return worst
