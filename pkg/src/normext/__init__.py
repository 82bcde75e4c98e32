"""Normal extensions of first-order differential operators in weighted L^2 spaces."""
from .coefficients import (
    CoefficientPath,
    ConstantOperator,
    accretivity_margin,
    normal_form,
    extract_constant_C,
    normality_residual,
)
from .evolution import Propagator, propagate, unitarity_report
from .extensions import NormalExtension, boundary_matrix, boundary_residual, endpoint_traces, validate
from .snumbers import (
    GrowthModel,
    SingularSequence,
    fit_decay_exponent,
    lattice_singular_values,
    resolvent_difference_diagnostic,
    schatten_p_report,
)
from .spectral import (
    SpectrumLattice,
    closed_form_spectrum,
    discretized_spectrum,
    eigen_equation_residual,
    eigenfunction,
    match_spectra,
)
from .transforms import (
    WeightTransform,
    apply_transform,
    conjugate_extension,
    conjugated_expression,
    formal_normality_transfer_check,
)
from .weights import (
    GridFunction,
    WeightFunction,
    eval_weight,
    log_derivative,
    quadrature_grid,
    weighted_inner_product,
)

__version__ = "0.1.0"
