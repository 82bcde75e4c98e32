import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normext.coefficients import ConstantOperator
from normext.errors import (
    FitError,
    InverseUndefinedError,
    ParameterError,
    ResolventSingularityError,
    ShapeError,
)
from normext.extensions import NormalExtension
from normext.snumbers import (
    GrowthModel,
    SingularSequence,
    default_fit_range,
    fit_decay_exponent,
    lattice_moduli,
    lattice_singular_values,
    presaturation_range,
    resolvent_difference_diagnostic,
    schatten_p_report,
    tail_constant,
)
from normext.spectral import closed_form_spectrum
from normext.weights import WeightFunction

from oracles import brute_force_moduli

W1 = WeightFunction.constant()


def ext_of(cvals, phases=None, weight=W1):
    cvals = np.atleast_1d(np.asarray(cvals, dtype=float))
    phases = np.zeros(cvals.size) if phases is None else np.asarray(phases)
    return NormalExtension(weight, ConstantOperator.diag(cvals), np.diag(np.exp(1j * phases)))


def test_leading_values_scalar():
    s = lattice_singular_values(ext_of([1.0]), 3)
    # frozen from sorting 1/|1 + 2 pi k i| over k = 0, +-1
    assert s.values[0] == pytest.approx(1.0, abs=1e-15)
    assert s.values[1] == pytest.approx(0.15717672547758985, abs=1e-15)
    assert s.values[2] == pytest.approx(0.15717672547758985, abs=1e-15)


def test_scalar_tail_constant_is_one_over_pi():
    s = lattice_singular_values(ext_of([1.0]), 10_000)
    assert tail_constant(s) * np.pi == pytest.approx(1.0, rel=0.02)
    assert 10_000 * s.values[-1] * np.pi == pytest.approx(1.0, rel=0.02)


def test_first_value_is_inverse_min_modulus():
    ext = ext_of([0.4, 2.0], [1.0, -2.5])
    lat = closed_form_spectrum(ext, (-3, 3))
    assert lattice_singular_values(ext, 1).values[0] == pytest.approx(1 / np.min(np.abs(lat.values)), rel=1e-14)


@pytest.mark.parametrize("seed", range(4))
def test_moduli_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.1, 20, 4)
    theta = rng.uniform(-np.pi, np.pi, 4)
    assert np.allclose(lattice_moduli(rho, theta, 3000), brute_force_moduli(rho, theta, 3000), rtol=1e-14)


def test_counting_identity():
    ext = ext_of([0.5, 3.0, 9.0], [0.2, -1.0, 3.0])
    s = lattice_singular_values(ext, 4000)
    lat = closed_form_spectrum(ext, (-2000, 2000))
    mods = np.abs(lat.values)
    for R in (5.0, 50.0, 700.0, 3000.0):
        assert np.count_nonzero(mods <= R) == np.count_nonzero(s.values >= 1 / R)


def test_refining_radius_does_not_change_leading_values():
    ext = ext_of([1.0, 2.0], [0.3, 0.9])
    short = lattice_singular_values(ext, 100).values
    long = lattice_singular_values(ext, 5000).values
    assert np.array_equal(short, long[:100])


def test_sequence_invariants():
    s = lattice_singular_values(ext_of([1.0, 5.0]), 2000)
    assert np.all(s.values > 0) and np.all(np.diff(s.values) <= 0)
    with pytest.raises(ValueError):
        SingularSequence(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        SingularSequence(np.array([0.1, 0.0]))


def test_inverse_undefined_for_zero_eigenvalue():
    with pytest.raises(InverseUndefinedError):
        lattice_singular_values(ext_of([0.0]), 5)


def test_growth_model_validation():
    with pytest.raises(ParameterError):
        GrowthModel(0.0)
    with pytest.raises(ParameterError):
        GrowthModel(1.0, np.inf)
    assert GrowthModel(2.0).theta == pytest.approx(2 / 3)
    assert np.array_equal(GrowthModel(2.0, 0.5).eigenvalues(3), [0.5, 2.0, 4.5])


@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_growth_exponent(beta):
    g = GrowthModel(beta)
    s = lattice_singular_values(ext_of(g.eigenvalues(64)), 10_000)
    fit = fit_decay_exponent(s, presaturation_range(s))
    assert fit["exponent"] == pytest.approx(-g.theta, abs=0.03)


def test_finite_dimensional_exponent_is_minus_one():
    s = lattice_singular_values(ext_of([0.7, 1.9], [0.1, 2.0]), 10_000)
    assert fit_decay_exponent(s, (1000, 10_000))["exponent"] == pytest.approx(-1.0, abs=0.02)


def test_fit_of_exact_power_law():
    n = np.arange(1, 201)
    fit = fit_decay_exponent(3.0 * n**-0.75)
    assert fit["exponent"] == pytest.approx(-0.75, abs=1e-12)
    assert fit["prefactor"] == pytest.approx(3.0, rel=1e-12)
    assert fit["r_squared"] == pytest.approx(1.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_decay_exponent(np.ones(100), (50, 60))
    with pytest.raises(FitError):
        fit_decay_exponent(np.ones(100), (90, 120))


def test_default_fit_range():
    assert default_fit_range(10_000) == (1001, 9500)


def _power_sequence(theta, m=2000):
    return SingularSequence(np.arange(1, m + 1, dtype=float) ** -theta)


@pytest.mark.parametrize(
    "theta,p,verdict",
    [(0.5, 3, "convergent"), (0.5, 2, "inconclusive"), (1.0, 2, "convergent"), (0.5, 1, "divergent")],
)
def test_schatten_verdicts(theta, p, verdict):
    rep = schatten_p_report(_power_sequence(theta), p)
    assert rep["convergence_verdict"] == verdict
    assert rep["p_theta"] == pytest.approx(p * theta, abs=1e-9)


def test_schatten_from_growth_fit():
    g = GrowthModel(1.0)
    s = lattice_singular_values(ext_of(g.eigenvalues(64)), 10_000)
    assert schatten_p_report(s, 3, presaturation_range(s))["convergence_verdict"] == "convergent"


def test_schatten_parameter_errors():
    with pytest.raises(ParameterError):
        schatten_p_report(_power_sequence(0.5), 0.5)
    with pytest.raises(FitError):
        schatten_p_report(_power_sequence(0.5, 50), 2)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 6.0), st.floats(0.1, 1.5))
def test_partial_sum_monotone_in_p(p, theta):
    s = _power_sequence(theta, 200)
    assert schatten_p_report(s, p + 0.5, exponent=-theta)["partial_sum"] <= schatten_p_report(s, p, exponent=-theta)["partial_sum"]


def test_equal_W_gives_zero_difference():
    e = ext_of([1.0, 2.0], [0.4, -0.4])
    rep = resolvent_difference_diagnostic(e, e, 0.5, N=128)
    assert np.all(np.array(rep["s_numbers_of_difference"]) == 0.0)
    assert np.all(np.array(rep["s_numbers_of_W_difference"]) == 0.0)


def test_algebraic_decay_of_difference():
    d = 32
    n = np.arange(1, d + 1)
    e1 = ext_of(np.ones(d))
    e2 = e1.with_W(np.diag(np.exp(1j / n**2)))
    rep = resolvent_difference_diagnostic(e1, e2, 0.0, N=256)
    comp = rep["decay_comparison"]
    assert comp["exponent_difference"] == pytest.approx(-2.0, abs=0.3)
    assert comp["exponent_W_difference"] == pytest.approx(-2.0, abs=0.3)
    assert comp["agree_within_0.1"] is True


def test_rotation_gives_rank_two():
    a = 0.3
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    f1 = ext_of([2.0, 2.0])
    rep = resolvent_difference_diagnostic(f1, f1.with_W(rot), 0.0, N=256)
    assert rep["nonzero_count_difference"] <= 2
    assert rep["nonzero_count_W_difference"] <= 2
    assert rep["dense_crosscheck_discrepancy"] <= 1e-10


def test_resolvent_near_spectrum_rejected():
    e1 = ext_of([1.0])
    e2 = e1.with_W([[1j]])
    with pytest.raises(ResolventSingularityError):
        resolvent_difference_diagnostic(e1, e2, 1.0 + 0.05j)


def test_resolvent_requires_shared_C():
    with pytest.raises(ShapeError):
        resolvent_difference_diagnostic(ext_of([1.0]), ext_of([2.0]), 0.0)
