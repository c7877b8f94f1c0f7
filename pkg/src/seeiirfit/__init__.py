"""Bayesian SEEIIR modelling of weekly severe-influenza surveillance counts."""

from .data import (ConfigError, DataError, RunConfig, load_calendar, load_series,
                   read_draws, save_series, SurveillanceSeries, write_draws)
from .diagnostics import DiagnosticsReport, diagnostics, ess, split_psrf
from .forecast import (ForecastScores, PredictiveSummary, posterior_predictive,
                       prospective_run, score_forecast)
from .mcmc import (ConvergenceError, PosteriorDraws, adaptive_block_rwm,
                   derived_quantities, log_posterior, mh_sample)
from .model import (CompartmentState, EpiConstants, EpiParams, HolidayCalendar,
                    IntegrationError, Trajectory, beta_star, force_of_infection,
                    initial_state, integrate, ode_rhs, reproduction_numbers,
                    weekly_incidence)
from .observation import (DelayKernel, ObsParams, default_delay_kernel,
                          expected_admissions, negbin_logpmf, negbin_sample,
                          series_loglik)
from .priors import (LogNormalPrior, PARAM_BOUNDS, PARAM_NAMES, PriorSpec,
                     UniformPrior, from_unconstrained, log_prior,
                     log_prior_unconstrained, to_unconstrained,
                     unconstrained_log_jacobian)
from .synth import (LatentTruth, RecoveryReport, Scenario, load_scenario,
                    recovery_experiment, simulate_series)

__version__ = "0.1.0"

__all__ = [
    "CompartmentState", "ConfigError", "ConvergenceError", "DataError",
    "DelayKernel", "DiagnosticsReport", "EpiConstants", "EpiParams",
    "ForecastScores", "HolidayCalendar", "IntegrationError", "LatentTruth",
    "LogNormalPrior", "ObsParams", "PARAM_BOUNDS", "PARAM_NAMES",
    "PosteriorDraws", "PredictiveSummary", "PriorSpec", "RecoveryReport",
    "RunConfig", "Scenario", "SurveillanceSeries", "Trajectory",
    "UniformPrior", "adaptive_block_rwm", "beta_star", "default_delay_kernel",
    "derived_quantities", "diagnostics", "ess", "expected_admissions",
    "force_of_infection", "from_unconstrained", "initial_state", "integrate",
    "load_calendar", "load_scenario", "load_series", "log_posterior",
    "log_prior", "log_prior_unconstrained", "mh_sample", "negbin_logpmf",
    "negbin_sample", "ode_rhs", "posterior_predictive", "prospective_run",
    "read_draws", "recovery_experiment", "reproduction_numbers",
    "save_series", "score_forecast", "series_loglik", "simulate_series",
    "split_psrf", "to_unconstrained", "unconstrained_log_jacobian",
    "weekly_incidence", "write_draws",
]
