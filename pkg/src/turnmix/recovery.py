"""Truth-versus-posterior comparisons for simulated fits."""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy import stats

from .model import N_FIXED, POSITIONS, parameter_names
from .posterior import player_effect_draws
from .sampler import PosteriorDraws
from .simulate import SimulatedDataset

RECOVERY_COLUMNS = ["parameter", "truth", "mean", "sd", "q2.5", "q97.5", "covered", "rank_quantile"]


def truth_vector(sim: SimulatedDataset) -> np.ndarray:
    return sim.truth.parameter_vector(sim.u, sim.data.player_position).pack()


def rank_quantile(draws, truth: float) -> float:
    """Share of posterior draws below ``truth`` (ties count half)."""
    x = np.asarray(draws, dtype=float).ravel()
    return float((np.sum(x < truth) + 0.5 * np.sum(x == truth)) / x.size)


def recovery_table(draws: PosteriorDraws, sim: SimulatedDataset) -> pd.DataFrame:
    """One row per fixed effect and per ``sigma[P]``, with 95% interval coverage."""
    truth = truth_vector(sim)
    names = parameter_names(sim.data.J)
    rows = []
    items = [(n, draws[n], truth[i]) for i, n in enumerate(names[:N_FIXED])]
    items += [(f"sigma[{p}]", np.exp(draws[f"log_sigma[{p}]"]), sim.truth.sigma[k]) for k, p in enumerate(POSITIONS)]
    for name, x, t in items:
        x = np.asarray(x).ravel()
        lo, hi = np.quantile(x, [0.025, 0.975])
        rows.append([name, float(t), float(x.mean()), float(x.std(ddof=1)), float(lo), float(hi),
                     bool(lo <= t <= hi), rank_quantile(x, t)])
    return pd.DataFrame(rows, columns=RECOVERY_COLUMNS)


def ranking_fidelity(draws: PosteriorDraws, sim: SimulatedDataset) -> dict:
    """Spearman correlation between posterior-mean and true player effects, per position."""
    pos = sim.data.player_position
    est = player_effect_draws(draws, pos).mean(axis=0)
    out = {}
    for k, p in enumerate(POSITIONS):
        sel = pos == k
        if sel.sum() < 3:
            out[p] = None
            continue
        out[p] = float(stats.spearmanr(est[sel], sim.u[sel]).statistic)
    return out
