"""Computations behind the command-line subcommands.

Every ``run_*`` function validates its inputs first and returns a
``Outcome`` holding the JSON report, any extra tables, and an exit status;
nothing is written to disk here.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import ConstantOperator, accretivity_margin, extract_constant_C, normality_residual
from .config import ProblemConfig, data_path, load_config
from .errors import InvalidExtensionError, NotNormalFormError, PositivityError, SemidefiniteWarning
from .extensions import NormalExtension, validate
from .snumbers import (
    GrowthModel,
    fit_decay_exponent,
    lattice_singular_values,
    presaturation_range,
    schatten_p_report,
    tail_constant,
)
from .spectral import TWO_PI, closed_form_spectrum, discretized_spectrum, match_spectra
from .transforms import conjugate_extension, conjugated_expression, formal_normality_transfer_check
from .weights import WeightFunction

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ASSERTION = 3
EXIT_IO = 4

BUNDLED_EXAMPLES = ("sine_example.json", "two_weight_example.json")


@dataclass
class Outcome:
    report: dict
    status: int = EXIT_OK
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)


def _spaces(cfg: ProblemConfig):
    return list(cfg.weights)


def validate_all(cfg: ProblemConfig) -> dict:
    """Validation reports per space; raises InvalidExtensionError on the first failure."""
    reports = {}
    for space in _spaces(cfg):
        rep = validate(cfg.extension(space), strict=False)
        reports[space] = rep.to_dict()
        if not rep.ok:
            raise InvalidExtensionError(rep)
    return reports


def run_validate(cfg: ProblemConfig) -> Outcome:
    reports = {space: validate(cfg.extension(space), strict=False) for space in _spaces(cfg)}
    ok = all(r.ok for r in reports.values())
    return Outcome(
        {"valid": ok, "spaces": {k: r.to_dict() for k, r in reports.items()}},
        EXIT_OK if ok else EXIT_VALIDATION,
    )


def _normality_block(path, weight, tol):
    residual = normality_residual(path, weight)
    block = {"normality_residual": residual, "accretivity_margin": accretivity_margin(path, weight)}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SemidefiniteWarning)
            C = extract_constant_C(path, weight)
        block["C"] = [[[float(z.real), float(z.imag)] for z in row] for row in C.matrix]
        block["C_warnings"] = [str(w.message) for w in caught]
    except (NotNormalFormError, PositivityError) as exc:
        block["C"] = None
        block["C_error"] = str(exc)
    block["formally_normal"] = residual <= tol and block["C"] is not None
    return block


def run_check_normality(cfg: ProblemConfig) -> Outcome:
    validate_all(cfg)
    tol = cfg.numerics["normality_tol"]
    spaces = {s: _normality_block(cfg.coefficient_path(s), cfg.weights[s], tol) for s in _spaces(cfg)}
    ok = all(b["formally_normal"] for b in spaces.values())
    report = {
        "status": "formally normal" if ok else "not formally normal",
        "tolerance": tol,
        "epsilon": cfg.epsilon,
        "spaces": spaces,
    }
    return Outcome(report, EXIT_OK if ok else EXIT_ASSERTION)


def run_spectrum(cfg: ProblemConfig, space: str = "alpha") -> Outcome:
    validate_all(cfg)
    num = cfg.numerics
    k_min, k_max = num["k_window"]
    ext = cfg.extension(space)
    lat = closed_form_spectrum(ext, (k_min, k_max))
    y = TWO_PI * (max(abs(k_min), abs(k_max)) + 1)
    oracle = discretized_spectrum(ext, int(num["oracle_n"]), scheme=num["scheme"], window=y)
    match = match_spectra(lat, oracle)
    ok = match["max_pairing_distance"] <= num["match_bound"] and match["unmatched_count"] == 0
    records = lat.records()
    report = {
        "branch_data": [{"rho": r, "theta": t} for r, t in lat.branch_data()],
        "form_discrepancy": lat.form_discrepancy,
        "k_window": [k_min, k_max],
        "lattice": records,
        "oracle": {"N": int(num["oracle_n"]), "scheme": num["scheme"], "count": int(oracle.size)},
        "match": {**match, "bound": num["match_bound"]},
        "passed": ok,
    }
    tables = {
        "lattice.csv": (["re", "im", "branch", "k"], [[r["re"], r["im"], r["branch"], r["k"]] for r in records]),
        "oracle.csv": (["re", "im"], [[float(z.real), float(z.imag)] for z in oracle]),
    }
    return Outcome(report, EXIT_OK if ok else EXIT_ASSERTION, tables)


def run_snumbers(
    cfg: ProblemConfig,
    count: int | None = None,
    beta: float | None = None,
    fit_range=None,
    p_values=None,
) -> Outcome:
    ext = cfg.extension()
    if beta is not None:
        C = ConstantOperator.diag(GrowthModel(beta).eigenvalues(cfg.dim))
        ext = NormalExtension(ext.weight, C, np.eye(cfg.dim), ext.a_i, ext.step)
    validate(ext)
    m = int(count or cfg.numerics["count"])
    s = lattice_singular_values(ext, m)
    fr = fit_range or cfg.numerics["fit_range"] or presaturation_range(s)
    fit = fit_decay_exponent(s, fr)
    p_values = p_values or cfg.numerics["p"]
    schatten = [schatten_p_report(s, p, exponent=fit["exponent"]) for p in p_values] if s.count >= 100 else []
    for rep in schatten:
        rep.pop("fit")
    report = {
        "count": s.count,
        "saturation_index": s.saturation_index,
        "fit": fit,
        "schatten": schatten,
        "constant_audit": {
            "measured_n_times_s_n": tail_constant(s) if s.count >= 2 else None,
            "counting_prediction": cfg.dim / np.pi,
            "claimed_constant": 1.0 / (2.0 * np.pi),
        },
    }
    if beta is not None:
        report["growth_model"] = {"beta": beta, "c": 1.0, "expected_exponent": -GrowthModel(beta).theta}
    rows = [[n, float(v)] for n, v in enumerate(s.values, start=1)]
    return Outcome(report, EXIT_OK, {"snumbers.csv": (["n", "s_n"], rows)})


def run_transform(source: WeightFunction, target: WeightFunction, cfg: ProblemConfig | None = None) -> Outcome:
    """Conjugated coefficients when moving l from L^2_source to L^2_target."""
    C = cfg.C if cfg else ConstantOperator.diag([1.0])
    a_i = cfg.a_i if cfg else None
    j_path = conjugated_expression(C, a_i, target)
    residuals = formal_normality_transfer_check(C, a_i, source, target)
    t = np.linspace(0.1, 0.9, 9)
    samples = j_path.real_part(t)
    report = {
        "source_weight": source.to_config(),
        "target_weight": target.to_config(),
        "conjugation": "j = sqrt(source/target) l sqrt(target/source)",
        "real_part": "C + target'(t) / (2 target(t)) I",
        "imag_part": "unchanged",
        "C": [[[float(z.real), float(z.imag)] for z in row] for row in C.matrix],
        "samples": [
            {"t": float(x), "real_part_diag": [float(v) for v in np.real(np.diag(m))]} for x, m in zip(t, samples)
        ],
        "normality_residuals": residuals,
    }
    return Outcome(report)


# -- bundled worked examples -----------------------------------------------------


def _claim(name, passed, **detail):
    return {"claim": name, "passed": bool(passed), **detail}


def _formula_error(lat, c, phi):
    ks = np.arange(lat.k_min, lat.k_max + 1)
    formula = c + 1j * (phi + TWO_PI * ks)
    return float(np.max(np.abs(np.sort_complex(lat.values) - np.sort_complex(formula))))


def check_example(cfg: ProblemConfig, label: str) -> list[dict]:
    claims = []
    tol = cfg.numerics["normality_tol"]
    k_window = tuple(cfg.numerics["k_window"])
    expected = cfg.claims.get("spectrum")
    for space in _spaces(cfg):
        res = normality_residual(cfg.coefficient_path(space), cfg.weights[space])
        claims.append(_claim(f"{label}.{space}.formally_normal", res <= tol, residual=res))
    if not cfg.two_weight:
        ext = cfg.extension()
        lat = closed_form_spectrum(ext, k_window)
        if expected:
            err = _formula_error(lat, expected["c"], expected["phi"])
            claims.append(_claim(f"{label}.spectrum_formula", err <= 1e-12, error=err))
        y = TWO_PI * (max(abs(k) for k in k_window) + 1)
        match = match_spectra(lat, discretized_spectrum(ext, int(cfg.numerics["oracle_n"]), window=y))
        ok = match["max_pairing_distance"] <= cfg.numerics["match_bound"] and match["unmatched_count"] == 0
        claims.append(_claim(f"{label}.oracle_agreement", ok, **match))
        return claims

    ext_l, ext_j = cfg.extension("alpha"), cfg.extension("beta")
    res = formal_normality_transfer_check(cfg.C, cfg.a_i, cfg.weights["alpha"], cfg.weights["beta"])
    claims.append(_claim(f"{label}.normality_transfer", max(res.values()) <= tol, **res))
    lat_l = closed_form_spectrum(ext_l, k_window)
    lat_j = closed_form_spectrum(ext_j, k_window)
    lat_c = closed_form_spectrum(conjugate_extension(ext_l, cfg.weights["beta"]), k_window)
    if expected:
        err = _formula_error(lat_j, expected["c"], expected["phi"])
        claims.append(_claim(f"{label}.beta.spectrum_formula", err <= 1e-12, error=err))
    if cfg.claims.get("spectrum_equality"):
        same = lat_l.branch_data() == lat_j.branch_data() == lat_c.branch_data()
        claims.append(
            _claim(
                f"{label}.spectrum_equality",
                same,
                alpha=lat_l.branch_data(),
                beta=lat_j.branch_data(),
                conjugated=lat_c.branch_data(),
            )
        )
    return claims


def run_examples(paths=None) -> Outcome:
    """Run the bundled worked examples (or the given config files) and collect claims."""
    paths = [data_path(n) for n in BUNDLED_EXAMPLES] if not paths else list(paths)
    rows = []
    for path in paths:
        cfg = load_config(path)
        validate_all(cfg)
        rows += check_example(cfg, _label(path))
    failed = [r["claim"] for r in rows if not r["passed"]]
    return Outcome({"claims": rows, "failed": failed, "passed": not failed}, EXIT_ASSERTION if failed else EXIT_OK)


def _label(path) -> str:
    return Path(path).stem
