"""Numerical laboratory for commutators on the weighted half-space.

Layers, from the bottom up: quadrature rules, geometry of shifted dyadic
grids, heat/Riesz kernels, vanishing-moment wavelet bases, oscillation and
two-point norms, discretized operators, and an experiment harness with a CLI.
"""

from .errors import (
    BlabError,
    DegenerateMeasureError,
    InvalidInputError,
    NoPartnerFoundError,
    OutOfWindowError,
    SchemaError,
    SignViolationError,
    SingularityError,
    UnsupportedOrderError,
)
from .geometry import (
    AdjacentSystems,
    Box,
    DyadicCube,
    SpaceParams,
    WhitneyBox,
    adjacency_constant,
    ball_measure,
    ball_measure_many,
    build_systems,
    corner_subcubes,
    cube_measure,
    whitney_decompose,
)
from .harness import ExperimentConfig, Report, ReportRow, run_experiment
from .kernels import (
    HeatKernelEvaluator,
    PartnerResult,
    RieszKernelEvaluator,
    find_partner_cube,
    heat_kernel_1d,
    heat_mass,
)
from .norms import (
    BesovResult,
    LorentzParams,
    OscNormResult,
    OscillationProfile,
    besov_norm_direct,
    besov_norm_dyadic,
    heat_extension,
    heat_maximal,
    lorentz_norm,
    mean_oscillation,
    mo_power_equivalence_report,
    osc_norm,
    osc_profile,
)
from .operators import (
    DiscreteOperator,
    NWOCoefficientTable,
    WeightedGrid,
    beta_oscillation,
    build_grid,
    commutator_matrix,
    hs_direct,
    nwo_coefficients,
    riesz_matrix,
    schatten_lorentz,
    singular_values,
    trace_pairing,
)
from .symbols import SYMBOL_KINDS, Symbol, make_symbol
from .wavelets import (
    AlpertBasis,
    PiecewisePolynomial,
    alpert_dimension,
    build_alpert_basis,
    telescoping_check,
    wavelet_coefficient,
    weighted_moment,
)

__version__ = "0.1.0"
