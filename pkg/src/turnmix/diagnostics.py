"""Convergence diagnostics: rank-normalised split-Rhat and bulk effective sample size."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .errors import InvalidArgumentError


def _as_chains(draws) -> np.ndarray:
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise InvalidArgumentError("draws must be (chains, iterations)")
    if x.shape[1] < 4:
        raise InvalidArgumentError("need at least 4 iterations per chain")
    return x


def split_chains(x: np.ndarray) -> np.ndarray:
    """Split every chain in half (dropping the middle draw when odd)."""
    n = x.shape[1]
    half = n // 2
    return np.concatenate([x[:, :half], x[:, n - half:]], axis=0)


def rank_normalize(x: np.ndarray) -> np.ndarray:
    """Normal scores of the pooled fractional ranks (Blom offset 3/8)."""
    ranks = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((ranks - 0.375) / (x.size + 0.25))


def _is_constant(x):
    return np.ptp(x) == 0 or not np.all(np.isfinite(x))


def _rhat(x: np.ndarray) -> float:
    n = x.shape[1]
    chain_mean = x.mean(axis=1)
    within = x.var(axis=1, ddof=1).mean()
    between = n * chain_mean.var(ddof=1)
    var_plus = (n - 1) / n * within + between / n
    return math.sqrt(var_plus / within)


def split_rhat(draws) -> float:
    """Rank-normalised split-Rhat for one parameter, ``draws`` as (chains, iterations).

    Constant draws return 1 by convention.
    """
    x = _as_chains(draws)
    if x.shape[0] < 2:
        raise InvalidArgumentError("split-Rhat needs at least 2 chains")
    if _is_constant(x):
        return 1.0
    return _rhat(rank_normalize(split_chains(x)))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via FFT."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), n=size, axis=1)[:, :n]
    return acov / n


def _ess(x: np.ndarray) -> float:
    m, n = x.shape
    acov = _autocovariance(x)
    chain_mean = x.mean(axis=1)
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += chain_mean.var(ddof=1)
    rho = np.zeros(n)
    rho[0] = 1.0
    even = 1.0
    odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = odd
    # Geyer initial positive sequence
    t = 1
    while t < n - 3 and even + odd > 0:
        even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if even + odd >= 0:
            rho[t + 1] = even
            rho[t + 2] = odd
        t += 2
    max_t = t - 2
    # initial monotone sequence
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t])
            rho[t + 2] = rho[t + 1]
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * rho[: max_t + 1].sum() + rho[max_t + 1 : max_t + 2].sum()
    tau = max(tau, 1.0 / math.log10(total))
    return total / tau


def effective_sample_size(draws) -> float:
    """Bulk effective sample size on rank-normalised split chains.

    Constant draws return 0 by convention.
    """
    x = _as_chains(draws)
    if _is_constant(x):
        return 0.0
    return _ess(rank_normalize(split_chains(x)))


def summarize_diagnostics(posterior) -> list:
    """Per-parameter ``(name, rhat, ess_bulk)`` for a :class:`PosteriorDraws`."""
    rows = []
    for i, name in enumerate(posterior.names):
        x = posterior.draws[:, :, i]
        rows.append((name, split_rhat(x), effective_sample_size(x)))
    return rows
