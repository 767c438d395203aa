"""Erlang-C stationary distribution and its diffusion approximations."""
from .chain import (
    BoundReport,
    StationaryDistribution,
    check_moment_bounds,
    delay_probability,
    scaled_cdf,
    scaled_moment,
    scaled_pmf,
    stationary_distribution,
)
from .density import ConditioningWarning, PiecewiseLogDensity, build_density
from .metrics import (
    ComparisonReport,
    kolmogorov_distance,
    moment_error_report,
    pmf_sup_error,
    rate_fit,
    smoothed_indicator,
    w2_lower_bound,
)
from .params import (
    DerivedParams,
    InvalidParameters,
    SystemParams,
    derive_params,
    params_for,
    state_to_x,
)
from .quadrature import QuadratureError
from .stein import SteinSolution, TestFunction, solve_poisson

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "ComparisonReport", "ConditioningWarning", "DerivedParams", "InvalidParameters",
    "PiecewiseLogDensity", "QuadratureError", "StationaryDistribution", "SteinSolution", "SystemParams",
    "TestFunction", "build_density", "check_moment_bounds", "delay_probability", "derive_params",
    "kolmogorov_distance", "moment_error_report", "params_for", "pmf_sup_error", "rate_fit",
    "scaled_cdf", "scaled_moment", "scaled_pmf", "smoothed_indicator", "solve_poisson",
    "state_to_x", "stationary_distribution", "w2_lower_bound",
]
