"""Observation model linking weekly infections to severe-case counts.

Expected weekly admissions are a discrete convolution of weekly infection
incidence with an infection-to-admission delay kernel, scaled by the
admission probability.  Observed counts follow a negative binomial with
mean mu and variance eta*mu, so eta is the variance-to-mean ratio and
eta -> 1 recovers the Poisson.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

MAX_KERNEL_WEEKS = 8
KERNEL_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DelayKernel:
    """Weekly probabilities that w weeks elapse from infection to admission."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("kernel must be a non-empty 1-d probability vector")
        if probs.size > MAX_KERNEL_WEEKS + 1:
            raise ValueError(
                f"kernel spans {probs.size - 1} weeks, maximum is {MAX_KERNEL_WEEKS}"
            )
        if np.any(probs < 0.0):
            raise ValueError("kernel probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > KERNEL_SUM_TOL:
            raise ValueError(f"kernel probabilities sum to {probs.sum()!r}, not 1")

    @property
    def max_weeks(self) -> int:
        return self.probs.size - 1

    @classmethod
    def from_file(cls, path) -> "DelayKernel":
        """Read one probability per line (`#` comments allowed) and validate."""
        probs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    probs.append(float(line))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: not a probability: {line!r}") from exc
        return cls(probs=np.array(probs))


@dataclass(frozen=True)
class ObsParams:
    """Observation parameters: admission probability and overdispersion.

    p_icu = 0 is allowed as a degenerate setting that switches the
    observation process off (every expected count becomes zero).
    """

    p_icu: float
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_icu < 1.0:
            raise ValueError(f"p_icu must lie in [0, 1), got {self.p_icu}")
        if not 1.0 < self.eta <= 100.0:
            raise ValueError(f"eta must lie in (1, 100], got {self.eta}")


def default_delay_kernel(mean_days: float = 9.0, shape: float = 4.0,
                         max_weeks: int = 4) -> DelayKernel:
    """Discretize a gamma infection-to-admission delay into weekly bins.

    Bin w receives the gamma mass on [7w, 7w+7) days; the kernel is
    truncated at max_weeks and renormalized.
    """
    if mean_days <= 0.0 or shape <= 0.0:
        raise ValueError("mean_days and shape must be positive")
    if not 0 <= max_weeks <= MAX_KERNEL_WEEKS:
        raise ValueError(f"max_weeks must lie in [0, {MAX_KERNEL_WEEKS}]")
    edges = 7.0 * np.arange(max_weeks + 2)
    cdf = stats.gamma.cdf(edges, a=shape, scale=mean_days / shape)
    probs = np.diff(cdf)
    return DelayKernel(probs=probs / probs.sum())


def expected_admissions(incidence: np.ndarray, kernel: DelayKernel,
                        p_icu: float) -> np.ndarray:
    """Expected admissions per week: delay-convolved incidence times p_icu."""
    incidence = np.asarray(incidence, dtype=float)
    if np.any(incidence < 0.0):
        raise ValueError("incidence must be non-negative")
    return p_icu * np.convolve(incidence, kernel.probs)[: incidence.size]


def negbin_logpmf(x, mu, eta: float):
    """Log-pmf of a count with mean mu and variance eta*mu.

    Parameterized with size r = mu/(eta-1) and success probability 1/eta;
    evaluated through log-gamma so large counts do not overflow.  At mu=0
    the distribution is a point mass at zero.
    """
    if eta <= 1.0:
        raise ValueError(f"eta must exceed 1, got {eta}")
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(x < 0.0) or np.any(x != np.floor(x)):
        raise ValueError("counts must be non-negative integers")
    if np.any(mu < 0.0):
        raise ValueError("mu must be non-negative")
    x, mu = np.broadcast_arrays(x, mu)
    out = np.full(x.shape, -np.inf)
    pos = mu > 0.0
    r = mu[pos] / (eta - 1.0)
    xp = x[pos]
    out[pos] = (gammaln(xp + r) - gammaln(r) - gammaln(xp + 1.0)
                - r * np.log(eta) + xp * (np.log(eta - 1.0) - np.log(eta)))
    out[(~pos) & (x == 0.0)] = 0.0
    if out.ndim == 0:
        return float(out)
    return out


def series_loglik(observed: np.ndarray, mu: np.ndarray, eta: float) -> float:
    """Sum of weekly log-pmf terms; weeks with NaN counts are skipped."""
    observed = np.asarray(observed, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if observed.shape != mu.shape:
        raise ValueError(
            f"observed and expected lengths differ: {observed.shape} vs {mu.shape}"
        )
    present = np.isfinite(observed)
    if not np.any(present):
        return 0.0
    return float(np.sum(negbin_logpmf(observed[present], mu[present], eta)))


def negbin_sample(mu, eta: float, rng: np.random.Generator):
    """Draw counts with mean mu and variance eta*mu via a gamma-Poisson mixture."""
    if eta <= 1.0:
        raise ValueError(f"eta must exceed 1, got {eta}")
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0.0):
        raise ValueError("mu must be non-negative")
    out = np.zeros(mu.shape, dtype=np.int64)
    pos = mu > 0.0
    if np.any(pos):
        r = mu[pos] / (eta - 1.0)
        lam = rng.gamma(shape=r, scale=eta - 1.0)
        out[pos] = rng.poisson(lam)
    if out.ndim == 0:
        return int(out)
    return out
