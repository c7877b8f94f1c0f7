"""Adaptive block random-walk Metropolis sampling of the model posterior.

The six parameters are updated in blocks (by default a transmission block
pi/i_tot0/beta/kappa and an observation block p_icu/eta) with Gaussian
random-walk proposals on the unconstrained working scale.  During burn-in
each block's proposal covariance is estimated from the chain history and
its global step size follows a Robbins-Monro recursion towards a target
acceptance rate; both are frozen afterwards so the post-burn-in chain is a
plain Metropolis sampler.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import model, observation, priors
from .model import EpiConstants, HolidayCalendar
from .observation import DelayKernel
from .priors import PARAM_NAMES, PriorSpec

logger = logging.getLogger(__name__)

DEFAULT_BLOCKS: tuple[tuple[str, ...], ...] = (
    ("pi", "i_tot0", "beta", "kappa"),
    ("p_icu", "eta"),
)
# Standard random-walk targets: 0.234 for multi-parameter blocks, 0.44 for scalars.
TARGET_ACCEPT_MULTI = 0.234
TARGET_ACCEPT_SINGLE = 0.44


class ConvergenceError(RuntimeError):
    """Raised when a chain shows no accepted moves after burn-in."""


def log_posterior(theta: np.ndarray, data, spec: PriorSpec,
                  cal: HolidayCalendar | None, kernel: DelayKernel,
                  constants: EpiConstants = EpiConstants()) -> float:
    """Natural-scale log posterior density (up to a constant).

    Short-circuits to -inf outside the prior support without touching the
    ODE; an integration failure is logged and also treated as -inf.  When
    the series has no observed weeks the value equals the log prior.
    """
    theta = np.asarray(theta, dtype=float)
    lp = priors.log_prior(theta, spec)
    if lp == -np.inf:
        return -np.inf
    counts = data.counts if data is not None else np.array([])
    if counts.size == 0 or not np.any(np.isfinite(counts)):
        return lp
    pi, i_tot0, beta, eta, p_icu, kappa = theta
    try:
        traj = model.integrate(constants.epi_params(pi, i_tot0, beta, kappa),
                               cal, 7 * counts.size, constants.step)
    except model.IntegrationError as exc:
        logger.warning("integration failed, rejecting draw: %s", exc)
        return -np.inf
    except ValueError:
        # Seed mass exceeding pi*n_pop: structurally invalid, reject.
        return -np.inf
    mu = observation.expected_admissions(model.weekly_incidence(traj), kernel, p_icu)
    return lp + observation.series_loglik(counts, mu, eta)


@dataclass
class PosteriorDraws:
    """Stored MCMC output: thinned post-burn-in draws with chain metadata."""

    param_names: tuple[str, ...]
    draws: np.ndarray          # (n_chains, n_stored, n_params), natural scale
    log_post: np.ndarray       # (n_chains, n_stored)
    iterations: np.ndarray     # (n_stored,) sweep index of each stored draw
    accepted: np.ndarray       # (n_chains, n_blocks) post-burn-in acceptances
    proposed: np.ndarray       # (n_chains, n_blocks) post-burn-in proposals
    seed: int | None = None
    n_iter: int = 0
    burn_in: int = 0
    thinning: int = 1
    scenario: str = "custom"
    constants: EpiConstants = field(default_factory=EpiConstants)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_stored(self) -> int:
        return self.draws.shape[1]

    def stacked(self) -> np.ndarray:
        """All chains pooled: shape (n_chains * n_stored, n_params)."""
        return self.draws.reshape(-1, self.draws.shape[2])

    def parameter(self, name: str) -> np.ndarray:
        """Pooled draws of one parameter."""
        return self.stacked()[:, self.param_names.index(name)]

    def credible_interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        x = self.parameter(name)
        half = 100.0 * (1.0 - level) / 2.0
        return float(np.percentile(x, half)), float(np.percentile(x, 100.0 - half))


@dataclass
class _BlockState:
    """Adaptive proposal state for one block."""

    idx: np.ndarray
    log_scale: float
    target: float
    mean: np.ndarray
    m2: np.ndarray
    n_seen: int = 0
    chol: np.ndarray | None = None

    def update_moments(self, x: np.ndarray) -> None:
        self.n_seen += 1
        delta = x - self.mean
        self.mean += delta / self.n_seen
        self.m2 += np.outer(delta, x - self.mean)

    def reset_moments(self) -> None:
        self.mean[:] = 0.0
        self.m2[:] = 0.0
        self.n_seen = 0

    def refresh_chol(self) -> None:
        d = len(self.idx)
        if self.n_seen > 2 * d:
            cov = self.m2 / (self.n_seen - 1) + 1e-8 * np.eye(d)
            try:
                self.chol = np.linalg.cholesky(cov)
                return
            except np.linalg.LinAlgError:
                pass
        self.chol = np.eye(d)


def adaptive_block_rwm(log_density, x0: np.ndarray, n_iter: int,
                       rng: np.random.Generator,
                       blocks: list[np.ndarray] | None = None,
                       burn_in: int | None = None, thinning: int = 1,
                       init_scale: float = 0.1):
    """Sample a target density with block-updated random-walk Metropolis.

    Args:
        log_density: callable mapping a parameter vector to a log density;
            -inf encodes rejection.
        x0: starting point with finite log density.
        n_iter: number of full update sweeps.
        rng: the chain's own random generator.
        blocks: index arrays partitioning the coordinates (default: one
            block with all of them).
        burn_in: sweeps of adaptation, discarded (default n_iter // 5).
        thinning: keep every thinning-th sweep after burn-in.
        init_scale: initial proposal standard deviation per coordinate.

    Returns:
        dict with `samples` (n_stored, d), `log_density`, `iterations`,
        and per-block post-burn-in `accepted`/`proposed` counters.

    Raises:
        ConvergenceError: if some block accepts nothing after burn-in.
    """
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    if burn_in is None:
        burn_in = n_iter // 5
    if not 0 <= burn_in < n_iter:
        raise ValueError(f"burn_in must lie in [0, n_iter), got {burn_in}")
    if blocks is None:
        blocks = [np.arange(d)]

    lp = float(log_density(x))
    if not np.isfinite(lp):
        raise ValueError("starting point has non-finite log density")

    states = []
    for idx in blocks:
        idx = np.asarray(idx, dtype=np.intp)
        nb = len(idx)
        target = TARGET_ACCEPT_SINGLE if nb == 1 else TARGET_ACCEPT_MULTI
        states.append(_BlockState(
            idx=idx,
            log_scale=float(np.log(init_scale * 2.38 / np.sqrt(nb))),
            target=target,
            mean=np.zeros(nb),
            m2=np.zeros((nb, nb)),
            chol=np.eye(nb),
        ))

    n_stored = (n_iter - burn_in + thinning - 1) // thinning
    samples = np.empty((n_stored, d))
    lps = np.empty(n_stored)
    iterations = np.empty(n_stored, dtype=np.int64)
    accepted = np.zeros(len(blocks), dtype=np.int64)
    proposed = np.zeros(len(blocks), dtype=np.int64)

    stored = 0
    moment_restart = burn_in // 2
    for t in range(n_iter):
        adapting = t < burn_in
        if t == moment_restart and t > 0:
            # Drop the moments gathered while the chain was still travelling
            # towards the typical set; the second half of burn-in re-estimates
            # the proposal covariance from better-behaved history.
            for st in states:
                st.reset_moments()
        for b, st in enumerate(states):
            step = np.exp(st.log_scale) * (st.chol @ rng.standard_normal(len(st.idx)))
            prop = x.copy()
            prop[st.idx] += step
            lp_prop = float(log_density(prop))
            log_alpha = lp_prop - lp
            alpha = 1.0 if log_alpha >= 0.0 else (np.exp(log_alpha)
                                                  if np.isfinite(log_alpha) else 0.0)
            if alpha >= 1.0 or rng.random() < alpha:
                x = prop
                lp = lp_prop
                if not adapting:
                    accepted[b] += 1
            if not adapting:
                proposed[b] += 1
            if adapting:
                st.log_scale += (t + 1.0) ** -0.6 * (alpha - st.target)
                st.update_moments(x[st.idx])
                if (t + 1) % 25 == 0:
                    st.refresh_chol()
        if not adapting and (t - burn_in) % thinning == 0:
            samples[stored] = x
            lps[stored] = lp
            iterations[stored] = t
            stored += 1

    if np.any((proposed > 0) & (accepted == 0)):
        dead = [b for b in range(len(blocks)) if proposed[b] > 0 and accepted[b] == 0]
        raise ConvergenceError(f"no accepted proposals after burn-in in blocks {dead}")
    return {
        "samples": samples[:stored],
        "log_density": lps[:stored],
        "iterations": iterations[:stored],
        "accepted": accepted,
        "proposed": proposed,
    }


class _CachedPosterior:
    """Working-scale posterior that caches the transmission-dependent part.

    Weekly incidence depends only on (pi, i_tot0, beta, kappa); observation
    proposals reuse the cached incidence of the current state instead of
    re-integrating the ODE.
    """

    def __init__(self, data, spec: PriorSpec, cal, kernel: DelayKernel,
                 constants: EpiConstants):
        self.data = data
        self.spec = spec
        self.cal = cal
        self.kernel = kernel
        self.constants = constants
        counts = data.counts if data is not None else np.array([])
        self.counts = counts if np.any(np.isfinite(counts)) else None
        self._memo: OrderedDict[tuple, np.ndarray | None] = OrderedDict()

    def _incidence(self, pi, i_tot0, beta, kappa):
        key = (pi, i_tot0, beta, kappa)
        try:
            inc = self._memo[key]
            self._memo.move_to_end(key)
            return inc
        except KeyError:
            pass
        try:
            traj = model.integrate(self.constants.epi_params(pi, i_tot0, beta, kappa),
                                   self.cal, 7 * self.counts.size, self.constants.step)
            inc = model.weekly_incidence(traj)
        except model.IntegrationError as exc:
            logger.warning("integration failed, rejecting draw: %s", exc)
            inc = None
        except ValueError:
            inc = None
        if len(self._memo) >= 8:
            self._memo.popitem(last=False)
        self._memo[key] = inc
        return inc

    def natural(self, theta: np.ndarray) -> float:
        lp = priors.log_prior(theta, self.spec)
        if lp == -np.inf or self.counts is None:
            return lp
        pi, i_tot0, beta, eta, p_icu, kappa = theta
        inc = self._incidence(pi, i_tot0, beta, kappa)
        if inc is None:
            return -np.inf
        mu = observation.expected_admissions(inc, self.kernel, p_icu)
        return lp + observation.series_loglik(self.counts, mu, eta)

    def working(self, z: np.ndarray) -> float:
        theta = priors.from_unconstrained(z, self.spec)
        lp = self.natural(theta)
        if lp == -np.inf:
            return -np.inf
        return lp + priors.unconstrained_log_jacobian(z, self.spec)


def _block_indices(blocks) -> list[np.ndarray]:
    named = [tuple(b) for b in blocks]
    flat = [name for b in named for name in b]
    if sorted(flat) != sorted(PARAM_NAMES):
        raise ValueError(f"blocks must partition {PARAM_NAMES}, got {named}")
    return [np.array([PARAM_NAMES.index(name) for name in b], dtype=np.intp)
            for b in named]


def mh_sample(data, spec: PriorSpec, cal: HolidayCalendar | None = None,
              kernel: DelayKernel | None = None, n_iter: int = 100_000,
              n_chains: int = 4, seed: int | np.random.SeedSequence = 0,
              blocks=DEFAULT_BLOCKS, burn_in: int | None = None,
              thinning: int = 10,
              constants: EpiConstants = EpiConstants()) -> PosteriorDraws:
    """Draw from the model posterior with independent adaptive MH chains.

    Each chain starts from its own prior draw and owns a generator spawned
    from the seed, so results are reproducible bit-for-bit and chains can
    be compared for convergence.

    Raises:
        ConvergenceError: when any chain accepts nothing after burn-in.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    if kernel is None:
        kernel = observation.default_delay_kernel()
    if burn_in is None:
        burn_in = n_iter // 5
    block_idx = _block_indices(blocks)
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_val = seed if isinstance(seed, int) else None

    posterior = _CachedPosterior(data, spec, cal, kernel, constants)
    all_samples, all_lps, all_acc, all_prop = [], [], [], []
    iterations = None
    for child in seed_seq.spawn(n_chains):
        rng = np.random.default_rng(child)
        z0 = None
        for _ in range(100):
            theta0 = spec.sample(rng)
            z0 = priors.to_unconstrained(theta0, spec)
            if np.isfinite(posterior.working(z0)):
                break
        else:
            raise ConvergenceError("no prior draw with finite posterior in 100 tries")
        res = adaptive_block_rwm(posterior.working, z0, n_iter, rng,
                                 blocks=block_idx, burn_in=burn_in,
                                 thinning=thinning)
        z = res["samples"]
        theta = np.vstack([priors.from_unconstrained(zk, spec) for zk in z])
        jac = np.array([priors.unconstrained_log_jacobian(zk, spec) for zk in z])
        all_samples.append(theta)
        all_lps.append(res["log_density"] - jac)
        all_acc.append(res["accepted"])
        all_prop.append(res["proposed"])
        iterations = res["iterations"]

    return PosteriorDraws(
        param_names=PARAM_NAMES,
        draws=np.stack(all_samples),
        log_post=np.stack(all_lps),
        iterations=iterations,
        accepted=np.stack(all_acc),
        proposed=np.stack(all_prop),
        seed=seed_val,
        n_iter=n_iter,
        burn_in=burn_in,
        thinning=thinning,
        scenario=spec.scenario,
        constants=constants,
    )


def derived_quantities(draws: PosteriorDraws):
    """Per-draw reproduction numbers and the holiday-effect probability.

    Returns a dict with pooled arrays `r0` and `rn` plus the posterior
    probability that kappa exceeds 1.
    """
    stacked = draws.stacked()
    if stacked.size == 0:
        raise ValueError("no draws")
    beta = stacked[:, draws.param_names.index("beta")]
    pi = stacked[:, draws.param_names.index("pi")]
    kappa = stacked[:, draws.param_names.index("kappa")]
    r0 = beta * 2.0 / draws.constants.gamma
    return {
        "r0": r0,
        "rn": r0 * pi,
        "pr_kappa_gt_1": float(np.mean(kappa > 1.0)),
    }
