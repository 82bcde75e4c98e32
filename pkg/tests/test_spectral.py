import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normext.coefficients import ConstantOperator
from normext.errors import SizeError, WindowError
from normext.extensions import NormalExtension
from normext.spectral import (
    SpectrumLattice,
    characteristic_determinant,
    closed_form_spectrum,
    discretization_matrices,
    discretized_spectrum,
    eigen_equation_residual,
    match_spectra,
    joint_branches,
)
from normext.weights import WeightFunction

from oracles import dense_generalized_eigs, upwind_circulant_eigs

TWO_PI = 2 * np.pi


def scalar(c=1.0, phi=0.0, weight=None):
    return NormalExtension(weight or WeightFunction.sine(2.0), ConstantOperator.diag([c]), [[np.exp(1j * phi)]])


def two_branch():
    W = np.diag([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 3)])
    return NormalExtension(WeightFunction.constant(), ConstantOperator.diag([1.0, 2.0]), W)


def test_quarter_phase_lattice():
    lat = closed_form_spectrum(scalar(1.0, np.pi / 2), (-1, 1))
    expected = [1 + 1j * (np.pi / 2 - TWO_PI), 1 + 1j * np.pi / 2, 1 + 1j * (np.pi / 2 + TWO_PI)]
    assert np.allclose(lat.values, expected, atol=1e-14)


def test_zero_phase_lattice():
    lat = closed_form_spectrum(scalar(1.0, 0.0), (-3, 3))
    assert np.allclose(lat.values, 1 + TWO_PI * 1j * np.arange(-3, 4), atol=1e-14)


def test_two_branch_lattice():
    lat = closed_form_spectrum(two_branch(), (-2, 2))
    ks = np.arange(-2, 3)
    expected = np.concatenate([1 + 1j * (TWO_PI * ks + np.pi / 4), 2 + 1j * (TWO_PI * ks - np.pi / 3)])
    assert np.allclose(np.sort_complex(lat.values), np.sort_complex(expected), atol=1e-12)
    assert lat.form_discrepancy <= 1e-10


def test_two_branch_oracle_agreement():
    ext = two_branch()
    lat = closed_form_spectrum(ext, (-5, 5))
    disc = discretized_spectrum(ext, 1024)
    m = match_spectra(lat, disc)
    assert m["unmatched_count"] == 0
    assert m["max_pairing_distance"] <= 0.05


def test_zero_C_contains_origin():
    ext = NormalExtension(WeightFunction.constant(), ConstantOperator.diag([0.0]), [[1.0]])
    disc = discretized_spectrum(ext, 128)
    assert np.min(np.abs(disc)) <= 1e-10


def test_lattice_periodicity_and_real_parts():
    rng = np.random.default_rng(5)
    c = rng.uniform(0.2, 3, 3)
    W = np.diag(np.exp(1j * rng.uniform(-np.pi, np.pi, 3)))
    lat = closed_form_spectrum(NormalExtension(WeightFunction.constant(), ConstantOperator.diag(c), W), (-4, 4))
    for j in range(1, 4):
        for k in range(-4, 4):
            assert lat.point(j, k + 1) - lat.point(j, k) == TWO_PI * 1j
    assert np.allclose(np.sort(lat.rho), np.sort(c), atol=1e-10)


def test_characteristic_determinant_vanishes_on_lattice():
    ext = two_branch()
    for lam in closed_form_spectrum(ext, (-3, 3)).values:
        assert characteristic_determinant(ext, lam) <= 1e-8
    assert characteristic_determinant(ext, 1.5 + 0.1j) > 1e-3


def test_adjoint_flag_gives_conjugate_lattice():
    C, W = np.diag([1.0, 2.0]), two_branch().W
    c, th_adj = joint_branches(C, W, adjoint=True)
    _, th_plain = joint_branches(C, W, adjoint=False)
    assert np.allclose(th_adj, -th_plain)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_two_closed_forms_agree(d, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    # repeated eigenvalues of C let W mix within the eigenspace
    cvals = np.repeat(rng.uniform(0.1, 5, (d + 1) // 2), 2)[:d]
    C = Q @ np.diag(cvals) @ Q.conj().T
    blocks = np.eye(d, dtype=complex)
    for i in range(0, d - 1, 2):
        X = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        blocks[i : i + 2, i : i + 2], _ = np.linalg.qr(X)
    if d % 2:
        blocks[-1, -1] = np.exp(1j * rng.uniform(-np.pi, np.pi))
    W = Q @ blocks @ Q.conj().T
    lat = closed_form_spectrum(NormalExtension(WeightFunction.constant(), ConstantOperator.from_matrix(C), W))
    assert lat.form_discrepancy <= 1e-10


def test_upwind_matches_circulant_formula():
    ext = NormalExtension(WeightFunction.constant(), ConstantOperator.diag([1.0]), [[np.exp(0.4j)]])
    N = 128
    disc = discretized_spectrum(ext, N, scheme="upwind", h_cut=1e9)
    ref = upwind_circulant_eigs(1.0, 0.4, N)
    assert disc.size == N
    assert np.max(np.min(np.abs(disc[:, None] - ref[None, :]), axis=1)) <= 1e-9


def test_upwind_first_order_and_box_second_order():
    ext = scalar(1.0, 0.0)
    lat = closed_form_spectrum(ext, (-3, 3))
    dist = {}
    for scheme in ("upwind", "box"):
        dist[scheme] = [match_spectra(lat, discretized_spectrum(ext, N, scheme))["max_pairing_distance"]
                        for N in (256, 512)]
    assert 1.8 <= dist["upwind"][0] / dist["upwind"][1] <= 2.2
    assert 3.6 <= dist["box"][0] / dist["box"][1] <= 4.4


def test_dense_and_sparse_paths_agree():
    ext = two_branch()
    A, B = discretization_matrices(ext, 384)
    ref = dense_generalized_eigs(A, B)
    ref = ref[np.abs(ref.imag) <= 40]
    sparse = discretized_spectrum(ext, 384, window=40, method="sparse")
    dense = discretized_spectrum(ext, 384, window=40, method="dense")
    for vals in (sparse, dense):
        assert vals.size == ref.size
        assert np.max(np.min(np.abs(vals[:, None] - ref[None, :]), axis=1)) <= 1e-8


def test_sine_example_oracle_at_2048():
    ext = scalar(1.0, np.pi / 2)
    lat = closed_form_spectrum(ext, (-7, 7))
    m = match_spectra(lat, discretized_spectrum(ext, 2048))
    assert m["unmatched_count"] == 0
    assert m["max_pairing_distance"] <= 0.03


def test_match_identical_inputs():
    lat = closed_form_spectrum(two_branch(), (-4, 4))
    m = match_spectra(lat, lat.values)
    assert (m["max_pairing_distance"], m["unmatched_count"]) == (0.0, 0)


def test_match_empty_window():
    lat = closed_form_spectrum(scalar(), (0, 0))
    with pytest.raises(WindowError):
        match_spectra(lat, lat.values, window=(100.0, 200.0))
    with pytest.raises(WindowError):
        closed_form_spectrum(scalar(), (2, 1))


def test_size_limits():
    with pytest.raises(SizeError):
        discretized_spectrum(scalar(), 32)
    with pytest.raises(SizeError):
        discretized_spectrum(two_branch(), 4096)


def test_eigenfunction_solves_weighted_equation():
    ext = NormalExtension(WeightFunction.sine(2.0), ConstantOperator.diag([1.0]), [[1j]],
                          lambda t: np.array([[[1 + s] for s in np.atleast_1d(t)]]).reshape(-1, 1, 1))
    lat = closed_form_spectrum(ext, (-1, 1))
    for lam in lat.values:
        assert eigen_equation_residual(ext, lam, [1.0]) <= 1e-6


def test_lattice_records_layout():
    recs = closed_form_spectrum(two_branch(), (0, 1)).records()
    assert [(r["branch"], r["k"]) for r in recs] == [(1, 0), (1, 1), (2, 0), (2, 1)]


def test_large_C_uses_log_form():
    C = ConstantOperator.diag([1.0, 900.0])
    lat = closed_form_spectrum(NormalExtension(WeightFunction.constant(), C, np.eye(2)))
    assert np.isnan(lat.form_discrepancy)
    assert np.allclose(np.sort(lat.rho), [1.0, 900.0])
    assert isinstance(lat, SpectrumLattice)
