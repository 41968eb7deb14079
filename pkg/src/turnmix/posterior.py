"""Posterior summaries, player ratings and plot-ready exports."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError
from .model import POSITIONS
from .sampler import PosteriorDraws

log = logging.getLogger(__name__)

DEFAULT_FLOORS = {"RB": 25, "TE": 10, "WR": 15}
HISTOGRAM_BINS = 64

SUMMARY_COLUMNS = ["parameter", "mean", "sd", "q2.5", "q97.5"]
RATING_COLUMNS = ["position", "rank", "player_id", "name", "plays", "mean", "q2.5", "q97.5"]


@dataclass(frozen=True)
class SummaryRow:
    name: str
    mean: float
    sd: float
    lower: float
    upper: float

    def as_list(self):
        return [self.name, self.mean, self.sd, self.lower, self.upper]


def _summary(name, x) -> SummaryRow:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InvalidArgumentError("no draws to summarize")
    if np.ptp(x) == 0:  # exact, free of summation rounding
        return SummaryRow(name, float(x[0]), 0.0, float(x[0]), float(x[0]))
    lo, hi = np.quantile(x, [0.025, 0.975], method="linear")
    sd = float(x.std(ddof=1))
    return SummaryRow(name, float(x.mean()), sd, float(lo), float(hi))


def _positions_from_meta(draws: PosteriorDraws):
    pos = draws.meta.get("player_position")
    return None if pos is None else np.asarray(pos, dtype=np.int64)


def derived_draws(draws: PosteriorDraws, name: str, player_position=None) -> np.ndarray:
    """Draws of a stored parameter, or of ``sigma[P]`` / ``u[j]`` derived from them."""
    if name in draws.names:
        return draws[name]
    if name.startswith("sigma[") and name.endswith("]"):
        return np.exp(draws[f"log_sigma[{name[6:-1]}]"])
    if name.startswith("u[") and name.endswith("]"):
        j = int(name[2:-1])
        pos = player_position if player_position is not None else _positions_from_meta(draws)
        if pos is None:
            raise KeyError(f"{name}: player positions unknown")
        return draws[f"u_tilde[{j}]"] * np.exp(draws[f"log_sigma[{POSITIONS[pos[j]]}]"])
    raise KeyError(name)


def summarize(draws: PosteriorDraws, names=None, player_position=None) -> list:
    """Mean, sd and equal-tailed 95% interval for each requested parameter.

    Besides stored names, ``sigma[RB]`` and ``u[j]`` (centred player effect,
    ``sigma_p * u_tilde_j`` per draw) are accepted.
    """
    if draws.draws.size == 0:
        raise InvalidArgumentError("draws are empty")
    names = list(draws.names) if names is None else list(names)
    return [_summary(n, derived_draws(draws, n, player_position)) for n in names]


def player_effect_draws(draws: PosteriorDraws, player_position=None) -> np.ndarray:
    """Centred player effects, shape (chains * draws, J)."""
    pos = player_position if player_position is not None else _positions_from_meta(draws)
    if pos is None:
        raise InvalidArgumentError("player positions unknown")
    pos = np.asarray(pos)
    J = pos.size
    idx = [draws.names.index(f"u_tilde[{j}]") for j in range(J)]
    lidx = [draws.names.index(f"log_sigma[{p}]") for p in POSITIONS]
    flat = draws.draws.reshape(-1, draws.draws.shape[2])
    return flat[:, idx] * np.exp(flat[:, lidx])[:, pos]


@dataclass(frozen=True)
class PlayerRating:
    player_id: object
    name: str
    position: str
    plays: int
    mean: float
    lower: float
    upper: float
    rank: int


def player_ratings(draws: PosteriorDraws, roster: pd.DataFrame, floors=None) -> list:
    """Players ranked within position by posterior mean of their centred effect.

    ``roster`` needs ``player_index``, ``player_id``, ``position`` and
    ``plays`` columns (``name`` optional). Rank 1 is the lowest mean, i.e.
    the most variable turner.
    """
    floors = {**DEFAULT_FLOORS, **(floors or {})}
    for col in ("player_index", "player_id", "position", "plays"):
        if col not in roster.columns:
            raise InvalidArgumentError(f"roster lacks column {col!r}")
    roster = roster.sort_values("player_index")
    pos = roster["position"].map(POSITIONS.index).to_numpy()
    effects = player_effect_draws(draws, pos)
    out = []
    for p in POSITIONS:
        keep = (roster["position"] == p).to_numpy() & (roster["plays"].to_numpy() >= floors.get(p, 0))
        rows = []
        for k in np.flatnonzero(keep):
            s = _summary("", effects[:, k])
            r = roster.iloc[k]
            rows.append((s.mean, str(r["player_id"]), r, s))
        rows.sort(key=lambda t: (t[0], t[1]))
        for rank, (_, _, r, s) in enumerate(rows, start=1):
            out.append(PlayerRating(
                player_id=r["player_id"], name=str(r.get("name", "") if pd.notna(r.get("name", "")) else ""),
                position=p, plays=int(r["plays"]), mean=s.mean, lower=s.lower, upper=s.upper, rank=rank,
            ))
    if not out:
        log.warning("no players pass the play-count floors")
    return out


def roster_from_table(table: pd.DataFrame, names=None) -> pd.DataFrame:
    """Per-player play counts from a model-frame table."""
    g = table.groupby("player_index", sort=True)
    roster = pd.DataFrame({
        "player_index": g.size().index,
        "player_id": g["player_id"].first().to_numpy(),
        "position": g["position"].first().to_numpy(),
        "plays": table.drop_duplicates(["player_index", "game_id", "play_id"])
        .groupby("player_index", sort=True).size().to_numpy(),
    })
    if names is not None:
        roster["name"] = roster["player_id"].map(names)
    return roster


def angle_histogram(angles, bins: int = HISTOGRAM_BINS):
    """Counts over equal-width bins spanning (-pi, pi].

    Bins are closed on the left, except the last, which also holds pi.
    """
    a = np.asarray(angles, dtype=float).ravel()
    counts, edges = np.histogram(a, bins=bins, range=(-math.pi, math.pi))
    return edges, counts


def _ratings_frame(ratings) -> pd.DataFrame:
    return pd.DataFrame(
        [[r.position, r.rank, r.player_id, r.name, r.plays, r.mean, r.lower, r.upper] for r in ratings],
        columns=RATING_COLUMNS,
    )


def join_combine(ratings, combine: pd.DataFrame):
    """Attach 40-yard times; returns the joined table and a correlation/join report."""
    for col in ("player_id", "forty_time_seconds"):
        if col not in combine.columns:
            raise InvalidArgumentError(f"combine table lacks column {col!r}")
    frame = _ratings_frame(ratings)
    times = combine.assign(player_id=combine["player_id"].astype(str)).drop_duplicates("player_id")
    joined = frame.assign(player_id=frame["player_id"].astype(str)).merge(
        times[["player_id", "forty_time_seconds"]], on="player_id", how="left")
    matched = joined["forty_time_seconds"].notna()
    report = {"rows": int(len(joined)), "matched": int(matched.sum()),
              "unmatched_player_ids": joined.loc[~matched, "player_id"].tolist(),
              "pearson": {}}
    groups = [("overall", joined[matched])] + [(p, joined[matched & (joined["position"] == p)]) for p in POSITIONS]
    for label, sub in groups:
        report["pearson"][label] = _pearson(sub["mean"], sub["forty_time_seconds"])
    return joined, report


def _pearson(a, b):
    if len(a) < 3 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def export_artifacts(out_dir, summaries, ratings, angles=None, combine: pd.DataFrame | None = None) -> dict:
    """Write the summary tables, ratings, histogram data and optional combine join.

    ``summaries`` is a list of :class:`SummaryRow`; rows whose names start
    with ``sigma[`` go to the random-effect table, the rest to fixed effects.
    """
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    fixed = [s.as_list() for s in summaries if not s.name.startswith(("sigma[", "u[", "u_tilde[", "log_sigma["))]
    sigma = [s.as_list() for s in summaries if s.name.startswith("sigma[")]
    written["fixed_effects"] = out / "fixed_effects.csv"
    pd.DataFrame(fixed, columns=SUMMARY_COLUMNS).to_csv(written["fixed_effects"], index=False, float_format="%.6g")
    written["random_effect_sd"] = out / "random_effect_sd.csv"
    pd.DataFrame(sigma, columns=SUMMARY_COLUMNS).to_csv(written["random_effect_sd"], index=False, float_format="%.6g")
    written["ratings"] = out / "ratings.csv"
    _ratings_frame(ratings).to_csv(written["ratings"], index=False, float_format="%.6g")
    if angles is not None:
        edges, counts = angle_histogram(angles)
        written["histogram"] = out / "turn_angle_histogram.csv"
        pd.DataFrame({"left": edges[:-1], "right": edges[1:], "count": counts}).to_csv(
            written["histogram"], index=False, float_format="%.17g")
    if combine is not None:
        joined, report = join_combine(ratings, combine)
        written["speed_turn_profile"] = out / "speed_turn_profile.csv"
        joined.to_csv(written["speed_turn_profile"], index=False, float_format="%.6g", na_rep="NA")
        written["join_report"] = out / "combine_join_report.json"
        written["join_report"].write_text(json.dumps(report, indent=2) + "\n")
    return written
