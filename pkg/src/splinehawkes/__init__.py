"""Hawkes process estimation with flexible time-dependent background rates.

A self-exciting point process attributes part of its activity to
triggering by past events and the rest to an exogenous background.  This
package fits exponential-kernel Hawkes models under three background
families (constant, piecewise linear on explicit knots, and a Bayesian
log-spline with variable-width bases), scores them comparably, simulates
them exactly, and tests fitted models by time-rescaling residuals.
"""

from .basis import NaturalTimeBasis, basis_count, bspline_base, bspline_base_deriv, build_basis
from .core import (
    BackgroundModel,
    ConfigurationError,
    ConstantBackground,
    ConvergenceError,
    DomainError,
    EventSequence,
    ExponentialKernel,
    NumericalError,
    ObservationWindow,
    PiecewiseLinearBackground,
    SplineBackground,
    background_eval,
    background_integral,
    branching_ratio,
    kernel_eval,
    kernel_integral,
)
from .estimate import (
    FitResult,
    HyperOptResult,
    HyperParams,
    SmoothnessPrior,
    default_hyperparams,
    fit_bcb,
    fit_from_dict,
    fit_mle,
    fit_to_dict,
    log_marginal_likelihood,
    log_prior,
    map_estimate,
    optimize_hyperparams,
    read_fit_json,
    regular_knots,
    score,
    write_fit_json,
)
from .gof import ks_test_uniform, rescaled_intervals, second_level_ks
from .likelihood import (
    LikelihoodWorkspace,
    compensator,
    intensity_at,
    interval_compensators,
    log_likelihood,
    log_likelihood_direct,
    loglik_grad_coeffs,
    loglik_hessian_coeffs,
)
from .simulate import scenario_news_shock, scenario_ushape, simulate, write_batch
from .tickdata import (
    SessionConfig,
    TickRecord,
    filter_movements,
    jitter_timestamps,
    read_ticks_csv,
    select_active_contract,
)

__version__ = "0.1.0"
