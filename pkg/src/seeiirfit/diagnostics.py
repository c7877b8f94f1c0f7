"""Convergence diagnostics: split-chain PSRF and autocorrelation ESS.

The potential scale reduction factor compares within- and between-chain
variance after splitting every chain in half, so a single drifting chain
is caught even when the chains agree on average.  The effective sample
size divides the pooled draw count by the integrated autocorrelation time,
estimated with Geyer's initial-monotone-positive-sequence truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSRF_THRESHOLD = 1.05


@dataclass(frozen=True)
class ParamDiagnostics:
    name: str
    psrf: float
    ess: float
    flagged: bool


@dataclass(frozen=True)
class DiagnosticsReport:
    params: tuple[ParamDiagnostics, ...]
    threshold: float = PSRF_THRESHOLD

    @property
    def any_flagged(self) -> bool:
        return any(p.flagged for p in self.params)

    def __getitem__(self, name: str) -> ParamDiagnostics:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def format_table(self) -> str:
        lines = [f"{'parameter':>10}  {'PSRF':>8}  {'ESS':>10}  flag"]
        for p in self.params:
            flag = "CHECK" if p.flagged else "ok"
            lines.append(f"{p.name:>10}  {p.psrf:8.4f}  {p.ess:10.1f}  {flag}")
        return "\n".join(lines)


def split_psrf(chains: np.ndarray) -> float:
    """Potential scale reduction factor over half-split chains.

    Args:
        chains: array of shape (n_chains, n_draws) for one parameter.
    """
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    half = n // 2
    split = np.vstack([chains[:, :half], chains[:, n - half:]])
    n = half

    chain_means = split.mean(axis=1)
    within = split.var(axis=1, ddof=1).mean()
    between = n * np.var(chain_means, ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else np.inf
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one chain via FFT."""
    n = len(x)
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real
    return acov / n


def ess(chains: np.ndarray) -> float:
    """Effective sample size of the pooled chains for one parameter."""
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    acov = np.mean([_autocovariance(c) for c in chains], axis=0)
    chain_var = np.mean([np.var(c, ddof=1) for c in chains])
    if chain_var == 0.0 and np.var(chains.mean(axis=1)) == 0.0:
        return float(m * n)
    var_plus = acov[0]
    if m > 1:
        var_plus += np.var(chains.mean(axis=1), ddof=1)
    rho = 1.0 - (chain_var - acov) / var_plus

    # Geyer: sum consecutive lag pairs while positive and non-increasing.
    tau = -1.0
    prev_pair = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
        t += 2
    tau = max(tau, 1.0 / np.log10(n + 10.0))
    return float(m * n / tau)


def diagnostics(draws, threshold: float = PSRF_THRESHOLD) -> DiagnosticsReport:
    """Per-parameter PSRF and ESS for a set of posterior draws.

    Requires at least two chains of at least 100 stored draws each.
    """
    if draws.n_chains < 2:
        raise ValueError(f"need at least 2 chains, got {draws.n_chains}")
    if draws.n_stored < 100:
        raise ValueError(f"need at least 100 stored draws per chain, got {draws.n_stored}")
    entries = []
    for k, name in enumerate(draws.param_names):
        chains = draws.draws[:, :, k]
        psrf = split_psrf(chains)
        entries.append(ParamDiagnostics(
            name=name,
            psrf=psrf,
            ess=ess(chains),
            flagged=bool(psrf > threshold or not np.isfinite(psrf)),
        ))
    return DiagnosticsReport(params=tuple(entries), threshold=threshold)
