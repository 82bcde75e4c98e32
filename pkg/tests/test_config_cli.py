import json
import os
import subprocess
import sys

import numpy as np
import pytest

from normext import cli
from normext.config import DEFAULT_NUMERICS, data_path, from_dict, load_config
from normext.errors import ConfigError

SINE = data_path("sine_example.json")


def base_config(**overrides):
    raw = {
        "version": 1,
        "dim": 1,
        "weight": {"kind": "sine", "gamma": 2.0},
        "C": {"diag": [1.0]},
        "a_i": {"kind": "zero"},
        "W": {"diag_phases": [0.0]},
    }
    raw.update(overrides)
    return raw


def write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


# -- config parsing ------------------------------------------------------------------


def test_bundled_config_parses():
    cfg = load_config(SINE)
    assert cfg.dim == 1 and not cfg.two_weight
    assert cfg.Ws["alpha"][0, 0] == pytest.approx(1j)
    assert cfg.numerics["oracle_n"] == 2048


def test_complex_pairs_and_dense_W():
    raw = base_config(dim=2, C={"diag": [1.0, 1.0]}, W={"dense": [[0, [0, 1]], [[0, 1], 0]]})
    cfg = from_dict(raw)
    assert np.allclose(cfg.Ws["alpha"], [[0, 1j], [1j, 0]])


def test_growth_C_and_identity_W():
    cfg = from_dict(base_config(dim=4, C={"growth": {"beta": 2, "c": 0.5}}, W={"identity": True}))
    assert np.allclose(np.diag(cfg.C.matrix).real, [0.5, 2, 4.5, 8])
    assert np.array_equal(cfg.Ws["alpha"], np.eye(4))


def test_polynomial_a_i():
    cfg = from_dict(base_config(a_i={"kind": "polynomial", "coeffs": [[[0.0]], [[6.283185307179586]]]}))
    assert cfg.extension().propagator(1.0)[0, 0] == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize(
    "patch,where",
    [
        ({"version": 2}, "version"),
        ({"dim": 0}, "dim"),
        ({"C": {"diag": [1.0, 2.0]}}, "C.diag"),
        ({"W": {"diag_phases": ["x"]}}, "W.diag_phases"),
        ({"W": {"dense": [[1, [0, 1, 2]]]}}, "W.dense"),
        ({"a_i": {"kind": "cubic"}}, "a_i.kind"),
        ({"a_r": {"kind": "free"}}, "a_r.kind"),
        ({"numerics": {"grid": 3}}, "numerics"),
    ],
)
def test_config_errors_name_the_field(patch, where):
    with pytest.raises(ConfigError) as info:
        from_dict(base_config(**patch))
    assert info.value.where.startswith(where)


def test_missing_field():
    raw = base_config()
    del raw["W"]
    with pytest.raises(ConfigError) as info:
        from_dict(raw)
    assert info.value.where == "W"


def test_syntax_error_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "version": 1,\n  "dim": ,\n}')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.where.endswith(":3:10")


def test_default_numerics_unchanged_by_load():
    before = dict(DEFAULT_NUMERICS)
    load_config(SINE)
    assert DEFAULT_NUMERICS == before


# -- subcommands ---------------------------------------------------------------------


def test_validate_ok(capsys):
    code, rep = run(["validate", str(SINE)], capsys)
    assert code == 0 and rep["valid"] is True


def test_validate_failure_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, base_config(dim=2, C={"diag": [1.0, 2.0]}, W={"dense": [[0, 1], [1, 0]]}))
    code, rep = run(["validate", cfg], capsys)
    assert code == 2
    assert rep["spaces"]["alpha"]["checks"]["CW_equals_WC"]["defect"] == pytest.approx(np.sqrt(2))


def test_no_output_files_when_validation_fails(tmp_path, capsys):
    cfg = write(tmp_path, base_config(W={"dense": [[1.5]]}))
    out = tmp_path / "out"
    for cmd in ("check-normality", "spectrum"):
        code, rep = run(["--out", str(out), cmd, cfg], capsys)
        assert code == 2 and rep["error"] == "InvalidExtensionError"
    assert not out.exists()


def test_check_normality_example(capsys):
    code, rep = run(["check-normality", str(SINE)], capsys)
    block = rep["spaces"]["alpha"]
    assert code == 0 and rep["status"] == "formally normal"
    assert block["normality_residual"] <= 1e-6
    assert block["C"][0][0][0] == pytest.approx(1.0, abs=1e-8)
    assert block["accretivity_margin"] == pytest.approx(1.0, abs=1e-8)


def test_check_normality_constant_coefficients(tmp_path, capsys):
    raw = base_config(dim=2, weight={"kind": "constant"}, C={"diag": [1.0, 2.0]},
                      a_i={"kind": "constant", "matrix": [[0.5, 0], [0, -1]]}, W={"identity": True})
    code, rep = run(["check-normality", write(tmp_path, raw)], capsys)
    assert code == 0 and rep["spaces"]["alpha"]["normality_residual"] == 0.0


def test_check_normality_perturbed(tmp_path, capsys):
    raw = base_config(a_r={"kind": "normal_form", "epsilon": 0.1})
    code, rep = run(["check-normality", write(tmp_path, raw)], capsys)
    assert code == 3 and rep["status"] == "not formally normal"
    assert rep["spaces"]["alpha"]["normality_residual"] == pytest.approx(0.2, abs=1e-3)


@pytest.mark.parametrize(
    "raw,expected",
    [
        (base_config(W={"diag_phases": [np.pi / 2]}), [1 + 1j * (np.pi / 2 + 2 * np.pi * k) for k in (-1, 0, 1)]),
        (base_config(), [1 + 2j * np.pi * k for k in (-1, 0, 1)]),
        (
            base_config(dim=2, weight={"kind": "constant"}, C={"diag": [1.0, 2.0]},
                        W={"diag_phases": [np.pi / 4, -np.pi / 3]}),
            [1 + 1j * (2 * np.pi * k + np.pi / 4) for k in (-1, 0, 1)]
            + [2 + 1j * (2 * np.pi * k - np.pi / 3) for k in (-1, 0, 1)],
        ),
    ],
    ids=["quarter-phase", "zero-phase", "two-branch"],
)
def test_spectrum_subcommand(tmp_path, capsys, raw, expected):
    out = tmp_path / "out"
    code, rep = run(["--out", str(out), "spectrum", write(tmp_path, raw), "--k-min", "-1", "--k-max", "1",
                     "--oracle-n", "1024"], capsys)
    assert code == 0 and rep["passed"]
    got = np.array([r["re"] + 1j * r["im"] for r in rep["lattice"]])
    assert np.allclose(np.sort_complex(got), np.sort_complex(np.array(expected)), atol=1e-12)
    assert (out / "lattice.csv").read_text().splitlines()[0] == "re,im,branch,k"
    assert (out / "oracle.csv").read_text().splitlines()[0] == "re,im"
    assert json.loads((out / "spectrum.json").read_text()) == rep


def test_spectrum_bound_violation_exit_three(tmp_path, capsys):
    raw = base_config(numerics={"match_bound": 1e-6, "oracle_n": 256, "k_window": [-1, 1]})
    code, rep = run(["spectrum", write(tmp_path, raw)], capsys)
    assert code == 3 and not rep["passed"]


def test_snumbers_subcommand(tmp_path, capsys):
    raw = base_config(dim=64, weight={"kind": "constant"}, C={"diag": [1.0] * 64}, W={"identity": True})
    out = tmp_path / "out"
    code, rep = run(["--out", str(out), "snumbers", write(tmp_path, raw), "--count", "10000", "--beta", "1"], capsys)
    assert code == 0
    assert rep["fit"]["exponent"] == pytest.approx(-0.5, abs=0.03)
    assert [r["convergence_verdict"] for r in rep["schatten"]] == ["divergent", "inconclusive", "convergent"]
    lines = (out / "snumbers.csv").read_text().splitlines()
    assert lines[0] == "n,s_n" and len(lines) == 10_001


def test_snumbers_constant_audit(capsys):
    code, rep = run(["snumbers", str(SINE), "--count", "10000", "--fit-from", "1000", "--fit-to", "10000"], capsys)
    audit = rep["constant_audit"]
    assert code == 0
    assert rep["fit"]["exponent"] == pytest.approx(-1.0, abs=0.02)
    assert audit["measured_n_times_s_n"] == pytest.approx(audit["counting_prediction"], rel=0.02)
    assert audit["claimed_constant"] == pytest.approx(1 / (2 * np.pi))


def test_snumbers_bad_p(capsys):
    code, rep = run(["snumbers", str(SINE), "--count", "200", "--p", "0.5"], capsys)
    assert code == 2 and rep["error"] == "ParameterError"


def test_transform_subcommand(capsys):
    code, rep = run(["transform", "--from-weight", "power:2", "--to-weight", "reflected-power:2"], capsys)
    assert code == 0
    s = rep["samples"][4]
    assert s["t"] == pytest.approx(0.5)
    assert s["real_part_diag"][0] == pytest.approx(1.0 - 2.0)
    assert max(rep["normality_residuals"].values()) <= 1e-6


def test_transform_bad_weight(capsys):
    code, rep = run(["transform", "--from-weight", "cubic:2", "--to-weight", "power:2"], capsys)
    assert code == 2 and rep["error"] == "ConfigError"


def test_examples_pass(capsys):
    code, rep = run(["examples"], capsys)
    assert code == 0 and rep["passed"] and rep["failed"] == []
    names = {c["claim"] for c in rep["claims"]}
    assert "two_weight_example.spectrum_equality" in names
    assert "sine_example.spectrum_formula" in names


def test_examples_negative_control(capsys):
    code, rep = run(["examples", str(data_path("two_weight_broken.json"))], capsys)
    assert code == 3
    assert rep["failed"] == ["two_weight_broken.beta.spectrum_formula", "two_weight_broken.spectrum_equality"]


def test_bad_json_exit_two(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{")
    code, rep = run(["validate", str(path)], capsys)
    assert code == 2 and rep["error"] == "ConfigError" and ":1:2" in rep["message"]


def test_missing_file_exit_four(tmp_path, capsys):
    assert cli.main(["validate", str(tmp_path / "nope.json")]) == 4


def test_outputs_are_deterministic(tmp_path, capsys):
    texts = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        cli.main(["--out", str(out), "snumbers", str(SINE), "--count", "500"])
        capsys.readouterr()
        texts.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert texts[0] == texts[1]
    assert set(texts[0]) == {"snumbers.json", "snumbers.csv"}


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "a" / "report.json"
    cli.write_atomic(target, "one")
    cli.write_atomic(target, "two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["report.json"]


def test_nan_written_as_null():
    assert json.loads(cli.dumps({"x": float("nan"), "y": np.float64(2.5)})) == {"x": None, "y": 2.5}


def test_verify_single_criterion(capsys):
    code = cli.main(["verify", "--criteria", "3"])
    cap = capsys.readouterr()
    assert code == 0
    assert "criterion 3: PASS" in cap.err
    assert json.loads(cap.out)["passed"] is True


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "normext.cli", "validate", str(SINE)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["valid"]
