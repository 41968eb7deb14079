"""Frame-level covariates and assembly of modelling rows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from .circular import _keep_moving, bearings, wrap_angle
from .errors import AlignmentError, InvalidArgumentError, MissingDefenderError, SchemaError
from .ingest import FIELD_LENGTH, FIELD_WIDTH, CarrierSequence, PlayMeta
from .model import CONCENTRATION_COVARIATES, MEAN_COVARIATES, POSITIONS, ModelDataset

FIELD_CENTER_Y = FIELD_WIDTH / 2
N_DEFENDERS = 11
N_TEAMMATES = 10

ID_COLUMNS = ("game_id", "play_id", "frame_id", "player_id", "player_index", "position")
TABLE_COLUMNS = ID_COLUMNS + ("phi",) + MEAN_COVARIATES + CONCENTRATION_COVARIATES


class PlayerState(NamedTuple):
    """One player at one frame, in standardized coordinates."""

    player_id: int
    x: float
    y: float
    s: float = 0.0
    dir: float = 0.0


def _clamp(x, y):
    return min(max(x, 0.0), FIELD_LENGTH), min(max(y, 0.0), FIELD_WIDTH)


def vertical_from_center(y):
    """Signed yards from the field's long axis; positive on the offense's left (+y)."""
    return y - FIELD_CENTER_Y


def nearest_defender_features(carrier: PlayerState, defenders: Sequence[PlayerState]) -> tuple:
    """``(speed, relative motion angle, dx, |dy|, distance, yards to end zone, yards from center)``
    of the defender closest to ``carrier``; ties go to the lowest player id.
    """
    if len(defenders) == 0:
        raise MissingDefenderError("no defenders at this frame")
    cx, cy = _clamp(carrier.x, carrier.y)
    best = None
    for d in defenders:
        dx, dy = _clamp(d.x, d.y)
        dist = math.hypot(dx - cx, dy - cy)
        key = (dist, d.player_id)
        if best is None or key < best[0]:
            best = (key, d, dx, dy)
    (dist, _), d, dx, dy = best
    if dist > 0:
        toward = math.atan2(cy - dy, cx - dx)
        rel = wrap_angle(d.dir - toward)
    else:
        rel = 0.0
    return (
        float(d.s), float(rel), dx - cx, abs(dy - cy), dist,
        FIELD_LENGTH - dx, vertical_from_center(dy),
    )


def relative_count_features(carrier: PlayerState, teammates: Sequence[PlayerState],
                            defenders: Sequence[PlayerState]) -> tuple:
    """Defenders in front, defenders to the left, teammates in front, teammates to the left.

    "In front" means larger x (toward the target end zone); "left" means larger y.
    """
    if len(defenders) != N_DEFENDERS or len(teammates) != N_TEAMMATES:
        raise AlignmentError(
            f"expected {N_DEFENDERS} defenders and {N_TEAMMATES} teammates, "
            f"got {len(defenders)} and {len(teammates)}"
        )
    cx, cy = _clamp(carrier.x, carrier.y)

    def count(group):
        pts = [_clamp(p.x, p.y) for p in group]
        return sum(px > cx for px, _ in pts), sum(py > cy for _, py in pts)

    d_front, d_left = count(defenders)
    t_front, t_left = count(teammates)
    return d_front, d_left, t_front, t_left


@dataclass
class ModelFrame:
    phi: float
    phi_prev: float
    x: np.ndarray
    z: np.ndarray
    player_id: object
    position: str
    game_id: object
    play_id: object
    frame_id: int
    player_index: int = -1


def _states(rows: pd.DataFrame) -> list:
    return [
        PlayerState(int(r.nflId), float(r.x), float(r.y), float(r.s), float(r.dir) if np.isfinite(r.dir) else 0.0)
        for r in rows.itertuples(index=False)
    ]


def build_model_frames(sequence: CarrierSequence, play_meta: PlayMeta | None = None,
                       player_index: int = -1) -> list:
    """Modelling rows for every frame that has both a turn angle and a lagged one.

    Zero-length carrier steps are skipped, so ``K`` usable points give
    ``K - 3`` rows.
    """
    meta = play_meta or sequence.play
    carrier = sequence.carrier
    pts = carrier[["x", "y"]].to_numpy(dtype=float)
    keep = np.flatnonzero(_keep_moving(pts))
    if keep.size < 4:
        raise InvalidArgumentError("sequence has fewer than 4 usable points")
    b = bearings(pts[keep])
    phi = wrap_angle(np.diff(b))  # phi[k] is the turn at kept point k + 1
    cum = np.cumsum(carrier["dis"].to_numpy(dtype=float))
    line = meta.line_to_gain
    if not math.isfinite(line):
        raise InvalidArgumentError(f"play {meta.play_id}: no line of scrimmage or distance to go")
    club = carrier["club"].iloc[0] if "club" in carrier.columns else None
    if club is None:
        raise SchemaError("club", "tracking")
    by_frame = {f: g for f, g in sequence.frames.groupby("frameId")}
    is_run = float(meta.play_type == "run")
    is_te = float(sequence.position == "TE")
    is_wr = float(sequence.position == "WR")

    rows = []
    for k in range(1, len(phi)):
        i = keep[k + 1]
        c = carrier.iloc[i]
        frame_id = int(c["frameId"])
        others = by_frame[frame_id]
        others = others[others["nflId"].notna() & (others["nflId"] != sequence.carrier_id)]
        team = others[others["club"] == club]
        opp = others[(others["club"] != club) & (others["club"] != "football")]
        me = PlayerState(sequence.carrier_id, float(c["x"]), float(c["y"]), float(c["s"]), float(c["dir"]))
        defenders = _states(opp)
        counts = relative_count_features(me, _states(team), defenders)
        nearest = nearest_defender_features(me, defenders)
        cx, cy = _clamp(me.x, me.y)
        x = np.array([
            phi[k - 1], FIELD_LENGTH - cx, vertical_from_center(cy), line - cx, *counts, *nearest,
        ], dtype=float)
        z = np.array([float(c["s"]), float(c["a"]), float(cum[i]), is_run, is_te, is_wr])
        rows.append(ModelFrame(
            phi=float(phi[k]), phi_prev=float(phi[k - 1]), x=x, z=z, player_id=sequence.carrier_id,
            position=sequence.position, game_id=meta.game_id, play_id=meta.play_id, frame_id=frame_id,
            player_index=player_index,
        ))
    return rows


def player_table(player_ids, positions) -> pd.DataFrame:
    """Stable player indexing: sorted by position group, then id."""
    df = pd.DataFrame({"player_id": list(player_ids), "position": list(positions)}).drop_duplicates("player_id")
    if not df["position"].isin(POSITIONS).all():
        raise InvalidArgumentError("unknown position group")
    df["_g"] = df["position"].map(POSITIONS.index)
    df = df.sort_values(["_g", "player_id"], kind="stable").drop(columns="_g").reset_index(drop=True)
    df["player_index"] = np.arange(len(df))
    return df


def frames_to_table(frames: Sequence[ModelFrame]) -> pd.DataFrame:
    """Model frames as a table with the fixed column order; player indices are (re)assigned."""
    if not frames:
        return pd.DataFrame(columns=list(TABLE_COLUMNS))
    players = player_table([f.player_id for f in frames], [f.position for f in frames])
    index = dict(zip(players["player_id"], players["player_index"]))
    data = {
        "game_id": [f.game_id for f in frames],
        "play_id": [f.play_id for f in frames],
        "frame_id": [f.frame_id for f in frames],
        "player_id": [f.player_id for f in frames],
        "player_index": [index[f.player_id] for f in frames],
        "position": [f.position for f in frames],
        "phi": [f.phi for f in frames],
    }
    x = np.vstack([f.x for f in frames])
    z = np.vstack([f.z for f in frames])
    for k, name in enumerate(MEAN_COVARIATES):
        data[name] = x[:, k]
    for k, name in enumerate(CONCENTRATION_COVARIATES):
        data[name] = z[:, k]
    return pd.DataFrame(data, columns=list(TABLE_COLUMNS))


def dataset_to_table(data: ModelDataset) -> pd.DataFrame:
    n = data.n_rows
    ids = np.asarray(data.player_ids, dtype=object)
    table = {
        "game_id": data.game_id if data.game_id is not None else np.zeros(n, dtype=np.int64),
        "play_id": data.play_id if data.play_id is not None else np.zeros(n, dtype=np.int64),
        "frame_id": data.frame_id if data.frame_id is not None else np.arange(n),
        "player_id": ids[data.player_index],
        "player_index": data.player_index,
        "position": np.asarray(POSITIONS, dtype=object)[data.player_position[data.player_index]],
        "phi": data.phi,
    }
    for k, name in enumerate(MEAN_COVARIATES):
        table[name] = data.x[:, k]
    for k, name in enumerate(CONCENTRATION_COVARIATES):
        table[name] = data.z[:, k]
    return pd.DataFrame(table, columns=list(TABLE_COLUMNS))


def table_to_dataset(df: pd.DataFrame) -> ModelDataset:
    """Inverse of :func:`dataset_to_table`; player indices are taken as written."""
    for col in TABLE_COLUMNS:
        if col not in df.columns:
            raise SchemaError(col, "model-frame table")
    if df.empty:
        raise InvalidArgumentError("model-frame table has no rows")
    idx = df["player_index"].to_numpy(dtype=np.int64)
    J = int(idx.max()) + 1
    players = df.drop_duplicates("player_index").set_index("player_index").sort_index()
    if len(players) != J:
        raise InvalidArgumentError("player_index values must be contiguous from 0")
    if (df.groupby("player_index")["position"].nunique() > 1).any():
        raise InvalidArgumentError("a player appears under more than one position")
    pos = players["position"].map({p: i for i, p in enumerate(POSITIONS)})
    if pos.isna().any():
        raise InvalidArgumentError(f"position must be one of {POSITIONS}")
    return ModelDataset(
        phi=df["phi"].to_numpy(dtype=float),
        x=df[list(MEAN_COVARIATES)].to_numpy(dtype=float),
        z=df[list(CONCENTRATION_COVARIATES)].to_numpy(dtype=float),
        player_index=idx,
        player_position=pos.to_numpy(dtype=np.int64),
        player_ids=players["player_id"].tolist(),
        play_id=df["play_id"].to_numpy(),
        game_id=df["game_id"].to_numpy(),
        frame_id=df["frame_id"].to_numpy(),
    )


def write_table(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    df.to_csv(path, index=False, float_format="%.17g")
    return path


def read_table(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return pd.read_csv(path, float_precision="round_trip")


def build_all(sequences: Sequence[CarrierSequence], report=None) -> list:
    """Rows for every sequence; sequences that fail are skipped and reported."""
    rows = []
    for seq in sequences:
        try:
            rows.extend(build_model_frames(seq))
        except (AlignmentError, MissingDefenderError, InvalidArgumentError, SchemaError) as exc:
            if report is None:
                raise
            report.exclude(seq.play.game_id, seq.play.play_id, "feature_error", str(exc))
    return rows
