"""Sobolev sample-path regularity of Gaussian processes.

Given a covariance kernel k, decide numerically whether the paths of
GP(0, k) lie in W^{m,p} of a box, by integrating powers of the
differentiated diagonal ``sigma_alpha(x) = d^{alpha,alpha}k(x, x)^(1/2)``
on a ladder of grids. Spectral (Nyström) decompositions, Karhunen–Loève
sampling and the trace identities linking them are exposed alongside.
"""
from .errors import (
    ConfigurationError,
    DomainError,
    GPSobolevError,
    MarginTooSmall,
    NotPositiveDefinite,
    NumericError,
    UnsupportedDerivative,
)
from .grid import Box, Grid, GridFunction, MultiIndex, build_grid, enumerate_multi_indices, lp_norm
from .kernels import (
    Kernel,
    KernelSpec,
    brownian,
    dyadic_centers,
    eval_cross_derivative,
    evaluate,
    exponential,
    finite_rank,
    hat_series,
    matern,
    sigma_alpha,
    squared_exponential,
    zero_kernel,
)
from .finitediff import (
    apply_delta_alpha,
    apply_delta_alpha_adjoint,
    bump_battery,
    finite_difference_sobolev_ratio,
    variational_derivative_test,
)
from .spectral import (
    SpectralDecomposition,
    TraceEstimate,
    differentiated_mercer_trace,
    nuclear_bound_report,
    nystrom_decompose,
    rkhs_imbedding_trace,
    trace_diagonal,
)
from .sampler import c_p, empirical_sobolev_moment, sample_paths
from .verdict import AnalysisConfig, RegularityReport, analyze, verify_identities

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ConfigurationError",
    "DomainError",
    "GPSobolevError",
    "MarginTooSmall",
    "NotPositiveDefinite",
    "NumericError",
    "UnsupportedDerivative",
    "Box",
    "Grid",
    "GridFunction",
    "MultiIndex",
    "build_grid",
    "enumerate_multi_indices",
    "lp_norm",
    "Kernel",
    "KernelSpec",
    "brownian",
    "dyadic_centers",
    "eval_cross_derivative",
    "evaluate",
    "exponential",
    "finite_rank",
    "hat_series",
    "matern",
    "sigma_alpha",
    "squared_exponential",
    "zero_kernel",
    "apply_delta_alpha",
    "apply_delta_alpha_adjoint",
    "bump_battery",
    "finite_difference_sobolev_ratio",
    "variational_derivative_test",
    "SpectralDecomposition",
    "TraceEstimate",
    "differentiated_mercer_trace",
    "nuclear_bound_report",
    "nystrom_decompose",
    "rkhs_imbedding_trace",
    "trace_diagonal",
    "c_p",
    "empirical_sobolev_moment",
    "sample_paths",
    "AnalysisConfig",
    "RegularityReport",
    "analyze",
    "verify_identities",
]
