"""Acceptance checks, shared by ``normext verify`` and the test suite.

Each ``criterion_N`` returns a dict with ``passed``, the measured
``metrics`` and the ``tolerances`` they were compared against.
"""
from __future__ import annotations

import time
import warnings

import numpy as np

from .coefficients import (
    CoefficientPath,
    ConstantOperator,
    normal_form,
    extract_constant_C,
    normality_residual,
)
from .errors import SemidefiniteWarning
from .evolution import Propagator, unitarity_report
from .extensions import NormalExtension, boundary_residual
from .snumbers import (
    GrowthModel,
    fit_decay_exponent,
    lattice_singular_values,
    presaturation_range,
    resolvent_difference_diagnostic,
    tail_constant,
)
from .spectral import (
    TWO_PI,
    closed_form_spectrum,
    discretized_spectrum,
    eigen_equation_residual,
    eigenfunction,
    match_spectra,
)
from .transforms import WeightTransform, conjugate_extension
from .weights import GridFunction, WeightFunction, quadrature_grid


def _result(number, name, passed, metrics, tolerances):
    return {
        "criterion": number,
        "name": name,
        "passed": bool(passed),
        "metrics": metrics,
        "tolerances": tolerances,
    }


def sine_example_coefficients(c: float = 1.0, gamma: float = 2.0) -> CoefficientPath:
    """a(t) = c + (pi gamma / 2) t^(gamma-1) cot(pi t^gamma), written out independently of alpha."""
    return CoefficientPath.from_functions(
        lambda t: c + 0.5 * np.pi * gamma * t ** (gamma - 1) / np.tan(np.pi * t**gamma)
    )


# -- 1 ---------------------------------------------------------------------------


def criterion_1(N: int = 2048, k_max: int = 7, bound: float = 0.05) -> dict:
    start = time.perf_counter()
    w = WeightFunction.sine(2.0)
    c = 1.0
    path = sine_example_coefficients(c)
    residual = normality_residual(path, w)
    C_found = float(extract_constant_C(path, w).matrix[0, 0].real)
    rows = []
    for phi in (0.0, np.pi / 2, 3.0):
        ext = NormalExtension(w, ConstantOperator.diag([c]), np.exp(1j * phi))
        lat = closed_form_spectrum(ext, (-k_max, k_max))
        ks = np.arange(-k_max, k_max + 1)
        formula = c + 1j * (phi + TWO_PI * ks)
        closed_err = float(np.max(np.abs(np.sort_complex(lat.values) - np.sort_complex(formula))))
        y = TWO_PI * (k_max + 1)
        fine = match_spectra(lat, discretized_spectrum(ext, N, window=y))
        coarse = match_spectra(lat, discretized_spectrum(ext, N // 2, window=y))
        rows.append(
            {
                "phi": phi,
                "closed_form_error": closed_err,
                "max_distance_N": fine["max_pairing_distance"],
                "max_distance_N_half": coarse["max_pairing_distance"],
                "unmatched": fine["unmatched_count"],
                "halving_ratio": coarse["max_pairing_distance"] / fine["max_pairing_distance"],
            }
        )
    runtime = time.perf_counter() - start
    passed = (
        residual <= 1e-6
        and abs(C_found - c) <= 1e-8
        and all(r["closed_form_error"] <= 1e-12 for r in rows)
        and all(r["max_distance_N"] <= bound and r["unmatched"] == 0 for r in rows)
        and all(r["halving_ratio"] >= 2.0 for r in rows)
        and runtime < 10.0
    )
    return _result(
        1,
        "sine-weight example spectrum and oracle agreement",
        passed,
        {"normality_residual": residual, "C": C_found, "cases": rows, "runtime_s": runtime, "N": N},
        {
            "normality_residual": 1e-6,
            "closed_form_error": 1e-12,
            "max_distance": bound,
            "halving_ratio_min": 2.0,
            "runtime_s": 10.0,
        },
    )


# -- 2 ---------------------------------------------------------------------------


def builtin_weights():
    return {
        "sine": WeightFunction.sine(2.0),
        "power": WeightFunction.power(2.0),
        "reflected-power": WeightFunction.reflected_power(2.0),
    }


def criterion_2(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    residuals, c_errors = {}, []
    perturbed = {}
    for name, w in builtin_weights().items():
        worst = 0.0
        for d in (1, 2, 3, 4):
            cvals = rng.uniform(0.2, 3.0, d)
            C = ConstantOperator.diag(cvals)
            ai = np.diag(rng.uniform(-2, 2, d))
            path = normal_form(w, C, ai)
            worst = max(worst, normality_residual(path, w))
            c_errors.append(float(np.max(np.abs(extract_constant_C(path, w).matrix - np.diag(cvals)))))
        residuals[name] = worst
        base = normal_form(w, ConstantOperator.diag([1.0]))
        perturbed[name] = normality_residual(base.shifted(lambda t: 0.1 * t), w)
    passed = (
        all(r <= 1e-6 for r in residuals.values())
        and all(abs(p - 0.2) <= 1e-3 for p in perturbed.values())
        and max(c_errors) <= 1e-8
    )
    return _result(
        2,
        "formal normality detection",
        passed,
        {"max_residual": residuals, "perturbed_residual": perturbed, "max_C_error": max(c_errors)},
        {"residual": 1e-6, "perturbed_residual": [0.2, 1e-3], "C_error": 1e-8},
    )


# -- 3 ---------------------------------------------------------------------------


def criterion_3(step: float = 1e-3) -> dict:
    scalar = Propagator(lambda t: 2 * np.pi * t, step, dim=1)
    rep_s = unitarity_report(scalar)
    phase_err_s = float(abs(scalar(1.0)[0, 0] - np.exp(-1j * np.pi)))

    diag12 = np.diag([1.0, 2.0])
    pair = Propagator(lambda t: (1 + t) * diag12, step, dim=2)
    rep_p = unitarity_report(pair)
    phase_err_p = 0.0
    for t in np.linspace(0, 1, 11):
        for s in np.linspace(0, 1, 11):
            g = t + t**2 / 2 - s - s**2 / 2
            exact = np.diag(np.exp(-1j * np.array([1.0, 2.0]) * g))
            phase_err_p = max(phase_err_p, float(np.linalg.norm(pair.propagate(s, t) - exact)))
    defects = [rep_s["max_unitarity_defect"], rep_s["max_cocycle_defect"],
               rep_p["max_unitarity_defect"], rep_p["max_cocycle_defect"]]
    passed = max(defects) <= 1e-8 and phase_err_s <= 1e-8 and phase_err_p <= 1e-8
    return _result(
        3,
        "evolution family unitarity",
        passed,
        {"scalar": rep_s, "pair": rep_p, "phase_error_scalar": phase_err_s, "phase_error_pair": phase_err_p},
        {"defect": 1e-8, "phase_error": 1e-8},
    )


# -- 4 ---------------------------------------------------------------------------


def criterion_4(d: int = 64, m: int = 10_000) -> dict:
    start = time.perf_counter()
    rows = {}
    w = WeightFunction.constant()
    for beta in (1.0, 2.0):
        g = GrowthModel(beta)
        ext = NormalExtension(w, ConstantOperator.diag(g.eigenvalues(d)), np.eye(d))
        s = lattice_singular_values(ext, m)
        fit = fit_decay_exponent(s, presaturation_range(s))
        rows[str(beta)] = {
            "exponent": fit["exponent"],
            "expected": -g.theta,
            "deviation": fit["exponent"] + g.theta,
            "fit_range": fit["fit_range"],
            "saturation_index": s.saturation_index,
        }
    runtime = time.perf_counter() - start
    passed = all(abs(r["deviation"]) <= 0.03 for r in rows.values()) and runtime < 30.0
    return _result(
        4,
        "decay exponent under power-law growth of C",
        passed,
        {"beta": rows, "runtime_s": runtime},
        {"exponent_deviation": 0.03, "runtime_s": 30.0},
    )


# -- 5 ---------------------------------------------------------------------------


def random_commuting_pair(d: int, rng, c_range=(0.3, 3.0)):
    """Generic Hermitian C > 0 and unitary W sharing its eigenvectors."""
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    V, _ = np.linalg.qr(z)
    cvals = rng.uniform(*c_range, d)
    phases = rng.uniform(-np.pi, np.pi, d)
    C = (V * cvals) @ V.conj().T
    W = (V * np.exp(1j * phases)) @ V.conj().T
    return ConstantOperator.from_matrix(0.5 * (C + C.conj().T)), W, V


def criterion_5(m: int = 10_000, seed: int = 1) -> dict:
    rng = np.random.default_rng(seed)
    rows = {}
    for d in (1, 2, 3):
        C, W, _ = random_commuting_pair(d, rng)
        ext = NormalExtension(WeightFunction.constant(), C, W)
        s = lattice_singular_values(ext, m)
        fit = fit_decay_exponent(s, (1000, m))
        const = tail_constant(s)
        rows[str(d)] = {
            "exponent": fit["exponent"],
            "measured_constant": const,
            "counting_prediction": d / np.pi,
            "relative_gap": const / (d / np.pi) - 1.0,
            "claimed_constant": 1.0 / (2.0 * np.pi),
        }
    passed = all(abs(r["exponent"] + 1.0) <= 0.02 and abs(r["relative_gap"]) <= 0.02 for r in rows.values())
    return _result(
        5,
        "finite-dimensional decay order and constant",
        passed,
        {"dim": rows},
        {"exponent": [-1.0, 0.02], "constant_relative": 0.02},
    )


# -- 6 ---------------------------------------------------------------------------


SMOOTH_TESTS = (
    lambda t: np.ones_like(t),
    lambda t: t,
    lambda t: np.exp(1j * np.pi * t),
    lambda t: np.cos(3 * t) + 1j * t**2,
    lambda t: 1.0 / (1.0 + t),
)


def criterion_6(gamma: float = 2.0, delta: float = 2.0, c: float = 0.7, phi: float = 0.0) -> dict:
    alpha = WeightFunction.power(gamma)
    beta = WeightFunction.reflected_power(delta)
    grid = quadrature_grid(alpha, beta)
    tr = WeightTransform(beta, alpha)  # L^2_beta -> L^2_alpha
    iso = []
    for f in SMOOTH_TESTS:
        u = GridFunction.sample(f, grid)
        iso.append(tr.isometry_defect(u)["relative_error"])

    C = ConstantOperator.diag([c])
    ext_alpha = NormalExtension(alpha, C, np.exp(1j * phi))
    ext_beta = NormalExtension(beta, C, np.exp(1j * phi))
    lat_l = closed_form_spectrum(ext_alpha, (-5, 5))
    lat_j = closed_form_spectrum(ext_beta, (-5, 5))
    lat_c = closed_form_spectrum(conjugate_extension(ext_alpha, beta), (-5, 5))
    identical = lat_l.branch_data() == lat_j.branch_data() == lat_c.branch_data()

    # u in D(J_phi): sqrt(beta) u = g with g(1) = e^{i phi} g(0)
    bc = []
    for g in (
        lambda t: np.exp(1j * phi * t),
        lambda t: np.exp(1j * (phi + TWO_PI) * t) * (1 + t * (1 - t)),
    ):
        u = GridFunction.sample(lambda t: g(t) / np.sqrt(beta(t)), grid)
        bc.append(boundary_residual(ext_alpha, tr.apply(u)))
    passed = max(iso) <= 1e-8 and identical and max(bc) <= 1e-6
    return _result(
        6,
        "two-weight equivalence",
        passed,
        {
            "isometry_relative_error": iso,
            "branch_data_L": lat_l.branch_data(),
            "branch_data_J": lat_j.branch_data(),
            "lattices_identical": identical,
            "boundary_transfer_residual": bc,
        },
        {"isometry": 1e-8, "boundary_transfer": 1e-6},
    )


# -- 7 ---------------------------------------------------------------------------


def random_extension(rng, max_dim: int = 3) -> NormalExtension:
    """Random valid extension: built-in weight, generic C, commuting W and linear A_i(t)."""
    d = int(rng.integers(1, max_dim + 1))
    C, W, V = random_commuting_pair(d, rng, (0.2, 2.0))
    p0, p1 = rng.uniform(-3, 3, d), rng.uniform(-3, 3, d)
    a0 = (V * p0) @ V.conj().T
    a1 = (V * p1) @ V.conj().T
    a_i = CoefficientPath.polynomial(np.zeros((1, d, d)), np.stack([a0, a1]))
    weights = list(builtin_weights().values()) + [WeightFunction.constant()]
    w = weights[int(rng.integers(len(weights)))]
    return NormalExtension(w, C, W, a_i)


def criterion_7(n_ext: int = 10, n_points: int = 5, seed: int = 7) -> dict:
    rng = np.random.default_rng(seed)
    worst_eq, worst_bc = 0.0, 0.0
    cases = []
    for _ in range(n_ext):
        ext = random_extension(rng)
        grid = quadrature_grid(ext.weight)
        lat = closed_form_spectrum(ext, (-2, 2))
        for _ in range(n_points):
            j = int(rng.integers(1, ext.dim + 1))
            k = int(rng.integers(-2, 3))
            lam = lat.point(j, k)
            f = lat.vectors[:, j - 1]
            eq = eigen_equation_residual(ext, lam, f)
            u = GridFunction.sample(eigenfunction(ext, lam, f), grid)
            bc = boundary_residual(ext, u) / np.linalg.norm(f)
            worst_eq, worst_bc = max(worst_eq, eq), max(worst_bc, bc)
        cases.append({"dim": ext.dim, "weight": ext.weight.kind})
    passed = worst_eq <= 1e-6 and worst_bc <= 1e-6
    return _result(
        7,
        "eigenfunction certificate",
        passed,
        {"max_equation_residual": worst_eq, "max_boundary_residual": worst_bc, "cases": cases},
        {"equation_residual": 1e-6, "boundary_residual": 1e-6},
    )


# -- 8 ---------------------------------------------------------------------------


def criterion_8(N: int = 256) -> dict:
    w = WeightFunction.constant()
    d = 32
    n = np.arange(1, d + 1)
    e1 = NormalExtension(w, ConstantOperator.diag(np.ones(d)), np.eye(d))
    e2 = e1.with_W(np.diag(np.exp(1j / n**2)))
    alg = resolvent_difference_diagnostic(e1, e2, 0.0, N)

    a = 0.3
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    f1 = NormalExtension(w, ConstantOperator.diag([2.0, 2.0]), np.eye(2))
    f2 = f1.with_W(rot)
    rank = resolvent_difference_diagnostic(f1, f2, 0.0, N)
    comp = alg["decay_comparison"]
    passed = bool(comp["agree_within_0.1"]) and rank["nonzero_count_difference"] <= 2
    return _result(
        8,
        "resolvent-difference diagnostic",
        passed,
        {
            "exponent_difference": comp["exponent_difference"],
            "exponent_W_difference": comp["exponent_W_difference"],
            "rank_case_nonzero": rank["nonzero_count_difference"],
            "rank_case_singular_values": rank["s_numbers_of_difference"],
            "rank_case_dense_crosscheck": rank["dense_crosscheck_discrepancy"],
        },
        {"exponent_agreement": 0.1, "nonzero_threshold": 1e-10, "max_nonzero": 2},
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
}


def run_all(selected=None) -> list[dict]:
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SemidefiniteWarning)
        for n in sorted(selected or CRITERIA):
            out.append(CRITERIA[n]())
    return out


def summary_line(result: dict) -> str:
    return f"criterion {result['criterion']}: {'PASS' if result['passed'] else 'FAIL'} - {result['name']}"
