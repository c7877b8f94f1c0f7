"""Posterior-predictive bands, prospective forecasting and scoring.

Each retained posterior draw is pushed through the transmission and
observation models and one stochastic count realisation is sampled per
week; empirical quantiles across draws form the fitted/forecast bands.
The prospective protocol refits the model on a truncated series and
forecasts the remaining weeks of the season.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass

import numpy as np

from . import mcmc, model, observation
from .data import SEASON_START_WEEK, RunConfig, SurveillanceSeries
from .mcmc import PosteriorDraws
from .model import HolidayCalendar
from .observation import DelayKernel

logger = logging.getLogger(__name__)

QUANTILE_LEVELS = (2.5, 25.0, 50.0, 75.0, 97.5)
_CSV_HEADER = ["week", "q2.5", "q25", "q50", "q75", "q97.5", "phase"]


@dataclass(frozen=True)
class PredictiveSummary:
    """Weekly predictive quantiles with a fitted/forecast flag per week."""

    quantiles: np.ndarray                  # (n_weeks, 5) at QUANTILE_LEVELS
    phase: np.ndarray                      # (n_weeks,) of "fitted"/"forecast"
    week_labels: np.ndarray                # ISO week numbers (or 1..n indices)
    iso_years: np.ndarray | None = None

    def __post_init__(self) -> None:
        q = np.asarray(self.quantiles, dtype=float)
        object.__setattr__(self, "quantiles", q)
        object.__setattr__(self, "phase", np.asarray(self.phase))
        object.__setattr__(self, "week_labels", np.asarray(self.week_labels, dtype=int))
        if q.ndim != 2 or q.shape[1] != len(QUANTILE_LEVELS):
            raise ValueError(f"quantiles must have shape (n, {len(QUANTILE_LEVELS)})")
        if np.any(np.diff(q, axis=1) < 0.0):
            raise ValueError("quantiles must be non-decreasing within each week")
        flags = self.phase == "forecast"
        if flags.any() and not np.all(flags == np.concatenate(
                [np.zeros(int(np.argmax(flags)), dtype=bool),
                 np.ones(len(flags) - int(np.argmax(flags)), dtype=bool)])):
            raise ValueError("forecast weeks must all come after the fitted weeks")

    @property
    def n_weeks(self) -> int:
        return self.quantiles.shape[0]

    @property
    def median(self) -> np.ndarray:
        return self.quantiles[:, 2]

    @property
    def forecast_mask(self) -> np.ndarray:
        return self.phase == "forecast"

    def interval(self, level: float) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper quantile columns of the central interval at `level`."""
        half = round(100.0 * (1.0 - level) / 2.0, 6)
        levels = [round(lvl, 6) for lvl in QUANTILE_LEVELS]
        try:
            lo = levels.index(half)
            hi = levels.index(round(100.0 - half, 6))
        except ValueError:
            raise ValueError(f"no stored quantiles for a {level:.0%} interval") from None
        return self.quantiles[:, lo], self.quantiles[:, hi]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for w in range(self.n_weeks):
                writer.writerow([
                    int(self.week_labels[w]),
                    *(f"{v:.17g}" for v in self.quantiles[w]),
                    str(self.phase[w]),
                ])

    @classmethod
    def from_csv(cls, path) -> "PredictiveSummary":
        weeks, rows, phases = [], [], []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != _CSV_HEADER:
                raise ValueError(f"{path}:1: expected header {','.join(_CSV_HEADER)}")
            for row in reader:
                if not row:
                    continue
                weeks.append(int(row[0]))
                rows.append([float(v) for v in row[1:6]])
                phases.append(row[6])
        return cls(quantiles=np.array(rows), phase=np.array(phases),
                   week_labels=np.array(weeks))


def posterior_predictive(draws: PosteriorDraws, cal: HolidayCalendar | None = None,
                         kernel: DelayKernel | None = None,
                         horizon_weeks: int | None = None,
                         rng: int | np.random.Generator = 0,
                         fitted_weeks: int | None = None,
                         series: SurveillanceSeries | None = None,
                         ) -> PredictiveSummary:
    """Simulate one count realisation per retained draw and summarize.

    Every stored draw is integrated over the full horizon; draws whose
    integration fails are dropped (and counted in the log).  Per-draw
    random streams are keyed by draw index, so the result does not depend
    on evaluation order.

    Args:
        draws: posterior sample to push forward.
        cal: holiday calendar used for the simulation (defaults to none).
        kernel: infection-to-admission delay kernel (defaults to the
            built-in gamma kernel).
        horizon_weeks: weeks to simulate (default: the series length, or
            required when no series is given).
        rng: seed or generator for the predictive noise.
        fitted_weeks: weeks flagged "fitted"; later ones are "forecast"
            (default: all of them).
        series: optional series supplying ISO week labels.
    """
    theta = draws.stacked()
    if theta.shape[0] == 0:
        raise ValueError("no draws to simulate from")
    if kernel is None:
        kernel = observation.default_delay_kernel()
    if horizon_weeks is None:
        if series is None:
            raise ValueError("horizon_weeks is required when no series is given")
        horizon_weeks = series.n_weeks
    if fitted_weeks is None:
        fitted_weeks = horizon_weeks
    if not 0 <= fitted_weeks <= horizon_weeks:
        raise ValueError(f"fitted_weeks must lie in [0, {horizon_weeks}]")

    base = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    streams = base.spawn(theta.shape[0])
    constants = draws.constants

    names = draws.param_names
    k_pi, k_seed = names.index("pi"), names.index("i_tot0")
    k_beta, k_eta = names.index("beta"), names.index("eta")
    k_p, k_kappa = names.index("p_icu"), names.index("kappa")

    sims = np.empty((theta.shape[0], horizon_weeks))
    kept = 0
    dropped = 0
    for k in range(theta.shape[0]):
        row = theta[k]
        try:
            traj = model.integrate(
                constants.epi_params(row[k_pi], row[k_seed], row[k_beta], row[k_kappa]),
                cal, 7 * horizon_weeks, constants.step)
        except (model.IntegrationError, ValueError):
            dropped += 1
            continue
        mu = observation.expected_admissions(model.weekly_incidence(traj),
                                             kernel, row[k_p])
        sims[kept] = observation.negbin_sample(mu, row[k_eta], streams[k])
        kept += 1
    if dropped:
        logger.warning("dropped %d of %d predictive draws (integration failures)",
                       dropped, theta.shape[0])
    if kept == 0:
        raise ValueError("all predictive draws failed to integrate")

    quantiles = np.percentile(sims[:kept], QUANTILE_LEVELS, axis=0).T
    phase = np.array(["fitted"] * fitted_weeks
                     + ["forecast"] * (horizon_weeks - fitted_weeks))
    if series is not None and series.n_weeks >= horizon_weeks:
        labels = series.iso_weeks[:horizon_weeks]
        years = series.iso_years[:horizon_weeks]
    else:
        labels = np.arange(1, horizon_weeks + 1)
        years = None
    return PredictiveSummary(quantiles=quantiles, phase=phase,
                             week_labels=labels, iso_years=years)


_WEEK_RE = re.compile(r"^(\d{4})-W(\d{1,2})$")


def resolve_cut_week(data: SurveillanceSeries, w_cut) -> int:
    """Map an analysis week to a series index.

    Accepts a `YYYY-Www` string, an (iso_year, iso_week) pair, or a bare
    integer interpreted as an ISO week of the season's second calendar
    year (so 3 means the third week of the new year).
    """
    if isinstance(w_cut, str):
        match = _WEEK_RE.match(w_cut.strip())
        if match is None:
            raise ValueError(f"cannot parse analysis week {w_cut!r}; use YYYY-Www")
        year, week = int(match.group(1)), int(match.group(2))
    elif isinstance(w_cut, tuple):
        year, week = int(w_cut[0]), int(w_cut[1])
    else:
        first_year = int(data.iso_years[0])
        in_first_half = int(data.iso_weeks[0]) >= SEASON_START_WEEK
        year = first_year + 1 if in_first_half else first_year
        week = int(w_cut)
    try:
        return data.index_of(year, week)
    except KeyError as exc:
        raise ValueError(str(exc)) from None


def prospective_run(data: SurveillanceSeries, w_cut,
                    config: RunConfig | None = None,
                    cal: HolidayCalendar | None = None,
                    kernel: DelayKernel | None = None,
                    pandemic: bool = False,
                    ) -> tuple[PredictiveSummary, PosteriorDraws]:
    """Fit on the weeks up to the analysis week, forecast the season's rest.

    The training likelihood only sees counts up to the cut (later weeks
    are treated as missing), and the predictive summary covers the whole
    series with the post-cut weeks flagged "forecast".  Prospective runs
    default to the informative prior scenario.
    """
    if config is None:
        config = RunConfig(scenario="informative")
    cut_idx = resolve_cut_week(data, w_cut)
    if not np.any(np.isfinite(data.counts[: cut_idx + 1])):
        raise ValueError("analysis week precedes every observation in the series")
    if cal is None and data.calendar.intervals:
        cal = data.calendar
    if kernel is None:
        kernel = config.build_kernel()

    training = data.truncated_after(cut_idx)
    seed_seq = np.random.SeedSequence(config.seed)
    fit_seed, predictive_seed = seed_seq.spawn(2)
    draws = mcmc.mh_sample(
        training, config.prior_spec(pandemic=pandemic), cal=cal, kernel=kernel,
        n_iter=config.n_iter, n_chains=config.n_chains, seed=fit_seed,
        blocks=config.blocks or mcmc.DEFAULT_BLOCKS, burn_in=config.burn_in,
        thinning=config.thinning, constants=config.constants)
    draws.seed = config.seed
    summary = posterior_predictive(
        draws, cal=cal, kernel=kernel, horizon_weeks=data.n_weeks,
        rng=np.random.default_rng(predictive_seed),
        fitted_weeks=cut_idx + 1, series=data)
    return summary, draws


@dataclass(frozen=True)
class ForecastScores:
    """Coverage and error of forecast weeks against held-out counts."""

    coverage95: float
    coverage50: float
    median_abs_error: float
    n_weeks: int


def score_forecast(summary: PredictiveSummary, held_out) -> ForecastScores:
    """Score forecast-phase weeks against their held-out observations.

    `held_out` must align one-to-one with the forecast weeks (NaN entries
    are skipped); scoring nothing is a domain error.
    """
    held_out = np.asarray(held_out, dtype=float)
    mask = summary.forecast_mask
    if held_out.size != int(mask.sum()):
        raise ValueError(
            f"held-out length {held_out.size} does not match "
            f"{int(mask.sum())} forecast weeks"
        )
    present = np.isfinite(held_out)
    if not np.any(present):
        raise ValueError("no overlapping held-out observations to score")
    y = held_out[present]
    lo95, hi95 = (col[mask][present] for col in summary.interval(0.95))
    lo50, hi50 = (col[mask][present] for col in summary.interval(0.50))
    med = summary.median[mask][present]
    return ForecastScores(
        coverage95=float(np.mean((y >= lo95) & (y <= hi95))),
        coverage50=float(np.mean((y >= lo50) & (y <= hi50))),
        median_abs_error=float(np.median(np.abs(y - med))),
        n_weeks=int(present.sum()),
    )
