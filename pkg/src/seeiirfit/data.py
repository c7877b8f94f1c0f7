"""Surveillance data, run configuration and the on-disk file contracts.

Formats:
  * series CSV: header `iso_year,iso_week,count`, one row per week, an
    empty count field (or an absent week) marks a missing observation;
  * holiday calendar: `start_day,end_day` integer pairs, one per line;
  * run configuration / scenario files: flat `key = value` lines;
  * draws CSV: `chain,iteration,<parameters...>,log_posterior`.

All text files are UTF-8 with `#` comments.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .mcmc import PosteriorDraws
from .model import EpiConstants, HolidayCalendar
from .observation import DelayKernel, default_delay_kernel
from .priors import PARAM_NAMES, LogNormalPrior, Prior, UniformPrior

SEASON_START_WEEK = 40
SEASON_END_WEEK = 20


class DataError(ValueError):
    """Invalid input data (bad series, calendar or kernel file)."""


class ConfigError(ValueError):
    """Invalid run configuration or scenario file."""


def iso_weeks_in_year(year: int) -> int:
    # December 28th always falls in the last ISO week of its year.
    return dt.date(year, 12, 28).isocalendar()[1]


def next_iso_week(year: int, week: int) -> tuple[int, int]:
    if week < iso_weeks_in_year(year):
        return year, week + 1
    return year + 1, 1


@dataclass(frozen=True)
class SurveillanceSeries:
    """Consecutive weekly admission counts within one surveillance season.

    The season window runs from ISO week 40 to ISO week 20 of the
    following year; counts are NaN where the week was not observed.
    Day 0 of model time is the Monday of the first week in the series.
    """

    iso_years: np.ndarray
    iso_weeks: np.ndarray
    counts: np.ndarray
    season: str = ""
    calendar: HolidayCalendar = field(default_factory=HolidayCalendar)

    def __post_init__(self) -> None:
        years = np.asarray(self.iso_years, dtype=int)
        weeks = np.asarray(self.iso_weeks, dtype=int)
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "iso_years", years)
        object.__setattr__(self, "iso_weeks", weeks)
        object.__setattr__(self, "counts", counts)
        if not (years.size == weeks.size == counts.size) or years.size == 0:
            raise DataError("series must contain at least one week")
        season_year = int(years[0]) if weeks[0] >= SEASON_START_WEEK else int(years[0]) - 1
        if not self.season:
            object.__setattr__(self, "season", f"{season_year}/{(season_year + 1) % 100:02d}")
        expected = (int(years[0]), int(weeks[0]))
        for y, w in zip(years, weeks):
            if (int(y), int(w)) != expected:
                raise DataError(
                    f"weeks must be consecutive: expected {expected}, got {(int(y), int(w))}"
                )
            in_window = (y == season_year and w >= SEASON_START_WEEK) or \
                        (y == season_year + 1 and w <= SEASON_END_WEEK)
            if not in_window:
                raise DataError(
                    f"week {int(y)}-W{int(w):02d} lies outside the season window "
                    f"(W{SEASON_START_WEEK} to W{SEASON_END_WEEK} of the next year)"
                )
            expected = next_iso_week(int(y), int(w))
        present = np.isfinite(counts)
        if np.any(counts[present] < 0) or np.any(counts[present] != np.floor(counts[present])):
            raise DataError("counts must be non-negative integers where present")

    @property
    def n_weeks(self) -> int:
        return int(self.counts.size)

    @property
    def horizon_days(self) -> int:
        return 7 * self.n_weeks

    @property
    def observed(self) -> np.ndarray:
        return np.isfinite(self.counts)

    def start_date(self) -> dt.date:
        return dt.date.fromisocalendar(int(self.iso_years[0]), int(self.iso_weeks[0]), 1)

    def index_of(self, iso_year: int, iso_week: int) -> int:
        hits = np.flatnonzero((self.iso_years == iso_year) & (self.iso_weeks == iso_week))
        if hits.size == 0:
            raise KeyError(f"{iso_year}-W{iso_week:02d} is not in the series")
        return int(hits[0])

    def truncated_after(self, index: int) -> "SurveillanceSeries":
        """Copy with every count after `index` marked missing."""
        counts = self.counts.copy()
        counts[index + 1:] = np.nan
        return replace(self, counts=counts)

    def validate_calendar(self) -> None:
        self.calendar.validate_within(self.horizon_days)


def load_series(path, calendar: HolidayCalendar | None = None) -> SurveillanceSeries:
    """Read and validate a weekly series CSV.

    Absent weeks inside the covered range become missing observations;
    malformed rows, negative counts and out-of-order or duplicate weeks
    raise DataError naming the offending line.
    """
    rows: list[tuple[int, int, float]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["iso_year", "iso_week", "count"]:
            raise DataError(f"{path}:1: expected header `iso_year,iso_week,count`")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                year, week = int(row[0]), int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: iso_year/iso_week must be integers") from None
            raw_count = row[2].strip()
            if raw_count == "":
                count = np.nan
            else:
                try:
                    count = float(int(raw_count))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: count must be an integer "
                                    f"or empty, got {raw_count!r}") from None
                if count < 0:
                    raise DataError(f"{path}:{lineno}: negative count {raw_count}")
            if rows and (year, week) <= (rows[-1][0], rows[-1][1]):
                raise DataError(f"{path}:{lineno}: week {year}-W{week:02d} is out of "
                                "order or duplicated")
            rows.append((year, week, count))
    if not rows:
        raise DataError(f"{path}: no data rows")

    # Fill interior gaps with missing weeks so the series stays consecutive.
    years, weeks, counts = [], [], []
    cursor = (rows[0][0], rows[0][1])
    for year, week, count in rows:
        while cursor != (year, week):
            years.append(cursor[0]); weeks.append(cursor[1]); counts.append(np.nan)
            cursor = next_iso_week(*cursor)
            if len(years) > 60:
                raise DataError(f"{path}: weeks {cursor} and {(year, week)} are too far apart")
        years.append(year); weeks.append(week); counts.append(count)
        cursor = next_iso_week(year, week)
    try:
        return SurveillanceSeries(
            iso_years=np.array(years), iso_weeks=np.array(weeks),
            counts=np.array(counts),
            calendar=calendar if calendar is not None else HolidayCalendar(),
        )
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_series(series: SurveillanceSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iso_year", "iso_week", "count"])
        for y, w, c in zip(series.iso_years, series.iso_weeks, series.counts):
            writer.writerow([int(y), int(w), "" if not np.isfinite(c) else int(c)])


def load_calendar(path) -> HolidayCalendar:
    try:
        return HolidayCalendar.from_file(path)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def load_kernel_file(path) -> DelayKernel:
    try:
        return DelayKernel.from_file(path)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def parse_flat_file(path) -> dict[str, str]:
    """Parse `key = value` lines; later keys override earlier ones."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


_PRIOR_RE = re.compile(r"^(uniform|lognormal)\s*\(\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*\)$")


def parse_prior(name: str, text: str) -> Prior:
    """Parse `uniform(lo, hi)` or `lognormal(log_mean, log_sd)` overrides."""
    from .priors import PARAM_BOUNDS
    match = _PRIOR_RE.match(text.strip())
    if match is None:
        raise ConfigError(f"cannot parse prior for {name}: {text!r}")
    kind, a, b = match.group(1), float(match.group(2)), float(match.group(3))
    try:
        if kind == "uniform":
            return UniformPrior(lower=a, upper=b)
        return LogNormalPrior(log_mean=a, log_sd=b,
                              lower=PARAM_BOUNDS[name][0], upper=PARAM_BOUNDS[name][1])
    except ValueError as exc:
        raise ConfigError(f"invalid prior for {name}: {exc}") from None


@dataclass
class RunConfig:
    """Sampling run settings, loadable from a flat key-value file."""

    scenario: str = "uninformative"
    n_chains: int = 4
    n_iter: int = 100_000
    burn_in: int = 20_000
    thinning: int = 10
    seed: int = 0
    blocks: tuple[tuple[str, ...], ...] | None = None
    constants: EpiConstants = field(default_factory=EpiConstants)
    kernel_mean_days: float = 9.0
    kernel_shape: float = 4.0
    kernel_max_weeks: int = 4
    kernel_file: str | None = None
    prior_overrides: dict[str, Prior] = field(default_factory=dict)

    _INT_KEYS = ("n_chains", "n_iter", "burn_in", "thinning", "seed", "kernel_max_weeks")
    _FLOAT_KEYS = ("kernel_mean_days", "kernel_shape")
    _CONSTANT_KEYS = ("sigma", "gamma", "n_pop", "step")

    @classmethod
    def from_file(cls, path, scenario_default: str = "uninformative",
                  seed_override: int | None = None) -> "RunConfig":
        values = parse_flat_file(path)
        return cls.from_mapping(values, scenario_default=scenario_default,
                                seed_override=seed_override, source=str(path))

    @classmethod
    def from_mapping(cls, values: dict[str, str],
                     scenario_default: str = "uninformative",
                     seed_override: int | None = None,
                     source: str = "<config>") -> "RunConfig":
        cfg = cls(scenario=scenario_default)
        constants = {}
        for key, value in values.items():
            try:
                if key == "scenario":
                    if value not in ("uninformative", "informative"):
                        raise ConfigError(f"unknown scenario {value!r}")
                    cfg.scenario = value
                elif key in cls._INT_KEYS:
                    setattr(cfg, key, int(value))
                elif key in cls._FLOAT_KEYS:
                    setattr(cfg, key, float(value))
                elif key in cls._CONSTANT_KEYS:
                    constants[key] = float(value)
                elif key == "kernel_file":
                    cfg.kernel_file = value
                elif key == "blocks":
                    cfg.blocks = tuple(
                        tuple(name.strip() for name in group.split(",") if name.strip())
                        for group in value.split("|")
                    )
                elif key.startswith("prior."):
                    name = key[len("prior."):]
                    if name not in PARAM_NAMES:
                        raise ConfigError(f"unknown parameter {name!r} in prior override")
                    cfg.prior_overrides[name] = parse_prior(name, value)
                else:
                    raise ConfigError(f"unknown configuration key {key!r}")
            except ConfigError as exc:
                raise ConfigError(f"{source}: {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key}: {exc}") from None
        if constants:
            cfg.constants = replace(cfg.constants, **constants)
        if seed_override is not None:
            cfg.seed = seed_override
        return cfg

    def prior_spec(self, pandemic: bool = False):
        from .priors import PriorSpec
        return PriorSpec.named(self.scenario, self.prior_overrides or None,
                               pandemic=pandemic)

    def build_kernel(self) -> DelayKernel:
        if self.kernel_file is not None:
            return load_kernel_file(self.kernel_file)
        return default_delay_kernel(self.kernel_mean_days, self.kernel_shape,
                                    self.kernel_max_weeks)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_chains": self.n_chains,
            "n_iter": self.n_iter,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "seed": self.seed,
            "blocks": self.blocks,
            "sigma": self.constants.sigma,
            "gamma": self.constants.gamma,
            "n_pop": self.constants.n_pop,
            "step": self.constants.step,
            "kernel_mean_days": self.kernel_mean_days,
            "kernel_shape": self.kernel_shape,
            "kernel_max_weeks": self.kernel_max_weeks,
            "kernel_file": self.kernel_file,
            "priors": {name: repr(d) for name, d in sorted(self.prior_overrides.items())},
        }

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()


def write_draws(draws: PosteriorDraws, path) -> None:
    """Persist draws: one row per stored draw, full float precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "iteration", *draws.param_names, "log_posterior"])
        for c in range(draws.n_chains):
            for s in range(draws.n_stored):
                writer.writerow([
                    c, int(draws.iterations[s]),
                    *(f"{v:.17g}" for v in draws.draws[c, s]),
                    f"{draws.log_post[c, s]:.17g}",
                ])


def read_draws(path, constants: EpiConstants | None = None) -> PosteriorDraws:
    """Load a draws CSV back into a PosteriorDraws (acceptance counters empty)."""
    expected = ["chain", "iteration", *PARAM_NAMES, "log_posterior"]
    chains: dict[int, list[list[float]]] = {}
    lps: dict[int, list[float]] = {}
    iterations: dict[int, list[int]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise DataError(f"{path}:1: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise DataError(f"{path}:{lineno}: expected {len(expected)} fields")
            try:
                chain = int(row[0])
                iteration = int(row[1])
                values = [float(v) for v in row[2:-1]]
                lp = float(row[-1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row") from None
            chains.setdefault(chain, []).append(values)
            lps.setdefault(chain, []).append(lp)
            iterations.setdefault(chain, []).append(iteration)
    if not chains:
        raise DataError(f"{path}: no draws")
    keys = sorted(chains)
    lengths = {len(chains[k]) for k in keys}
    if len(lengths) != 1:
        raise DataError(f"{path}: chains have unequal lengths {sorted(lengths)}")
    return PosteriorDraws(
        param_names=PARAM_NAMES,
        draws=np.array([chains[k] for k in keys]),
        log_post=np.array([lps[k] for k in keys]),
        iterations=np.array(iterations[keys[0]], dtype=np.int64),
        accepted=np.zeros((len(keys), 0), dtype=np.int64),
        proposed=np.zeros((len(keys), 0), dtype=np.int64),
        constants=constants if constants is not None else EpiConstants(),
    )


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
