"""Prior specifications and the unconstrained working-scale transform.

Six parameters are estimated: the initial susceptible proportion (pi), the
initial infectious count (i_tot0), the base transmission rate (beta), the
count overdispersion (eta), the admission probability (p_icu) and the
school-holiday transmission scaling (kappa).  Every parameter has a
bounded support; sampling works on a logit-transformed unconstrained
scale, with the Jacobian folded into the target density.

Two scenarios are provided: a flat (bounds-only) prior on everything, and
an informative scenario replacing the pi and p_icu priors with log-normal
distributions derived from sero-prevalence and severity studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PARAM_NAMES = ("pi", "i_tot0", "beta", "eta", "p_icu", "kappa")

# Hard support bounds, identical in both scenarios.
PARAM_BOUNDS: dict[str, tuple[float, float]] = {
    "pi": (0.0, 1.0),
    "i_tot0": (0.0, 10_000.0),
    "beta": (0.0, 1.12),
    "eta": (1.0, 100.0),
    "p_icu": (0.0, 1.0),
    "kappa": (0.0, 2.0),
}

# Informative-scenario log-normal centres (log-scale mean, log-scale sd).
INFORMATIVE_PI = (math.log(0.401), 0.2)
INFORMATIVE_P_ICU = (math.log(0.000239), 1.0)
# Pandemic analyses observe all hospital admissions, an order of magnitude
# more probable than ICU admission.
PANDEMIC_P_ADMISSION = (math.log(0.00239), 1.0)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class UniformPrior:
    """Flat density on (lower, upper)."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise ValueError(f"empty support ({self.lower}, {self.upper})")

    def logpdf(self, x: float) -> float:
        if self.lower < x <= self.upper:
            return -math.log(self.upper - self.lower)
        return -math.inf

    def cdf(self, x) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=float) - self.lower)
                       / (self.upper - self.lower), 0.0, 1.0)

    @property
    def median(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def sd(self) -> float:
        return (self.upper - self.lower) / math.sqrt(12.0)

    def sample(self, rng: np.random.Generator) -> float:
        return rng.uniform(self.lower, self.upper)


@dataclass(frozen=True)
class LogNormalPrior:
    """Log-normal density restricted to the (lower, upper) support bounds.

    The tail mass beyond the bounds is negligible for the shipped priors,
    so the density is not renormalized after restriction.
    """

    log_mean: float
    log_sd: float
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if self.log_sd <= 0.0:
            raise ValueError("log_sd must be positive")
        if not self.upper > self.lower >= 0.0:
            raise ValueError(f"invalid support ({self.lower}, {self.upper})")

    def logpdf(self, x: float) -> float:
        if not (self.lower < x <= self.upper) or x <= 0.0:
            return -math.inf
        z = (math.log(x) - self.log_mean) / self.log_sd
        return -math.log(x) - math.log(self.log_sd) - 0.5 * _LOG_2PI - 0.5 * z * z

    def cdf(self, x) -> np.ndarray:
        from scipy import stats
        return stats.lognorm.cdf(np.asarray(x, dtype=float), s=self.log_sd,
                                 scale=math.exp(self.log_mean))

    @property
    def median(self) -> float:
        return math.exp(self.log_mean)

    @property
    def sd(self) -> float:
        v = self.log_sd ** 2
        return math.sqrt((math.exp(v) - 1.0)) * math.exp(self.log_mean + v / 2.0)

    def sample(self, rng: np.random.Generator) -> float:
        # Rejection against the support bounds keeps draws inside them.
        for _ in range(1000):
            x = float(rng.lognormal(self.log_mean, self.log_sd))
            if self.lower < x <= self.upper:
                return x
        raise RuntimeError("log-normal prior sampling failed to land in support")


Prior = UniformPrior | LogNormalPrior


@dataclass(frozen=True)
class PriorSpec:
    """Per-parameter prior distributions, ordered as PARAM_NAMES."""

    dists: tuple[Prior, ...]
    scenario: str = "custom"

    def __post_init__(self) -> None:
        if len(self.dists) != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} priors, got {len(self.dists)}")

    @classmethod
    def uninformative(cls, overrides: dict[str, Prior] | None = None) -> "PriorSpec":
        """Flat priors on the hard bounds for all six parameters."""
        dists = {name: UniformPrior(*PARAM_BOUNDS[name]) for name in PARAM_NAMES}
        dists.update(overrides or {})
        return cls(dists=tuple(dists[name] for name in PARAM_NAMES),
                   scenario="uninformative")

    @classmethod
    def informative(cls, overrides: dict[str, Prior] | None = None,
                    pandemic: bool = False) -> "PriorSpec":
        """Log-normal priors on pi and p_icu; everything else stays flat."""
        dists = {name: UniformPrior(*PARAM_BOUNDS[name]) for name in PARAM_NAMES}
        dists["pi"] = LogNormalPrior(*INFORMATIVE_PI, *PARAM_BOUNDS["pi"])
        centre = PANDEMIC_P_ADMISSION if pandemic else INFORMATIVE_P_ICU
        dists["p_icu"] = LogNormalPrior(*centre, *PARAM_BOUNDS["p_icu"])
        dists.update(overrides or {})
        return cls(dists=tuple(dists[name] for name in PARAM_NAMES),
                   scenario="informative")

    @classmethod
    def named(cls, scenario: str, overrides: dict[str, Prior] | None = None,
              pandemic: bool = False) -> "PriorSpec":
        if scenario == "uninformative":
            return cls.uninformative(overrides)
        if scenario == "informative":
            return cls.informative(overrides, pandemic=pandemic)
        raise ValueError(f"unknown prior scenario {scenario!r}")

    def __getitem__(self, name: str) -> Prior:
        return self.dists[PARAM_NAMES.index(name)]

    def support(self, name: str) -> tuple[float, float]:
        d = self[name]
        return d.lower, d.upper

    def medians(self) -> np.ndarray:
        return np.array([d.median for d in self.dists])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([d.sample(rng) for d in self.dists])

    def in_support(self, theta: np.ndarray) -> bool:
        return all(d.lower < x <= d.upper for d, x in zip(self.dists, theta))


def log_prior(theta: np.ndarray, spec: PriorSpec) -> float:
    """Joint log prior density of a natural-scale parameter vector.

    Returns -inf outside the support, which doubles as the rejection
    signal during sampling.
    """
    theta = np.asarray(theta, dtype=float)
    total = 0.0
    for d, x in zip(spec.dists, theta):
        lp = d.logpdf(float(x))
        if lp == -math.inf:
            return -math.inf
        total += lp
    return total


def to_unconstrained(theta: np.ndarray, spec: PriorSpec) -> np.ndarray:
    """Map natural-scale parameters to the logit working scale."""
    theta = np.asarray(theta, dtype=float)
    z = np.empty_like(theta)
    for k, d in enumerate(spec.dists):
        p = (theta[k] - d.lower) / (d.upper - d.lower)
        if not 0.0 < p < 1.0:
            raise ValueError(
                f"{PARAM_NAMES[k]}={theta[k]} is not interior to "
                f"({d.lower}, {d.upper})"
            )
        z[k] = math.log(p) - math.log1p(-p)
    return z


def from_unconstrained(z: np.ndarray, spec: PriorSpec) -> np.ndarray:
    """Inverse of to_unconstrained."""
    z = np.asarray(z, dtype=float)
    theta = np.empty_like(z)
    for k, d in enumerate(spec.dists):
        p = _sigmoid(z[k])
        theta[k] = d.lower + (d.upper - d.lower) * p
    return theta


def unconstrained_log_jacobian(z: np.ndarray, spec: PriorSpec) -> float:
    """log|d theta / d z| of the inverse transform at working-scale z."""
    z = np.asarray(z, dtype=float)
    total = 0.0
    for k, d in enumerate(spec.dists):
        # d theta/d z = range * sigmoid(z) * sigmoid(-z)
        total += math.log(d.upper - d.lower) - _softplus(z[k]) - _softplus(-z[k])
    return total


def log_prior_unconstrained(z: np.ndarray, spec: PriorSpec) -> float:
    """Prior density on the working scale, Jacobian included."""
    return log_prior(from_unconstrained(z, spec), spec) + unconstrained_log_jacobian(z, spec)


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _softplus(z: float) -> float:
    if z > 35.0:
        return z
    return math.log1p(math.exp(z))
