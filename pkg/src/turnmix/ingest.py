"""Loading Big Data Bowl 2025 style tracking tables and cutting ball-carrier sequences."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .circular import _keep_moving, wrap_angle
from .errors import InvalidArgumentError, SchemaError

log = logging.getLogger(__name__)

FIELD_LENGTH = 120.0
FIELD_WIDTH = 53.3
FIELD_SLACK = 1.0

TRACKING_REQUIRED = ("frameId", "x", "y", "s", "a", "dis", "o", "dir")
TRACKING_NUMERIC = ("x", "y", "s", "a", "dis", "o", "dir")
ANGLE_COLUMNS = ("o", "dir")

START_EVENTS = {"handoff": "handoff", "pass_outcome_caught": "catch"}
END_EVENTS = ("tackle", "out_of_bounds", "touchdown", "fumble")
RUN_POSITIONS = ("RB",)
PASS_POSITIONS = ("RB", "TE", "WR")
MIN_SEQUENCE_FRAMES = 4

# exclusion reason codes
MISSING_DIRECTION = "missing_direction"
NO_START_EVENT = "no_start_event"
NO_END_EVENT = "no_end_event"
NO_CARRIER = "no_carrier"
POSITION_FILTER = "position_filter"
START_MISMATCH = "start_event_mismatch"
CARRIER_GAP = "carrier_frames_missing"
TOO_SHORT = "too_short"


@dataclass
class IngestReport:
    """Counts and row-level problems collected while loading and extracting."""

    rows_read: int = 0
    rows_loaded: int = 0
    rows_dropped_missing_coordinates: int = 0
    row_errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    out_of_field_rows: int = 0
    excluded: Counter = field(default_factory=Counter)
    excluded_plays: list = field(default_factory=list)
    penalty_plays_kept: int = 0
    sequences: Counter = field(default_factory=Counter)

    def exclude(self, game_id, play_id, reason, detail=""):
        self.excluded[reason] += 1
        self.excluded_plays.append({"game_id": _plain(game_id), "play_id": _plain(play_id),
                                    "reason": reason, "detail": detail})

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_loaded": self.rows_loaded,
            "rows_dropped_missing_coordinates": self.rows_dropped_missing_coordinates,
            "row_errors": self.row_errors,
            "warnings": self.warnings,
            "out_of_field_rows": self.out_of_field_rows,
            "excluded_by_reason": dict(sorted(self.excluded.items())),
            "excluded_plays": self.excluded_plays,
            "penalty_plays_kept": self.penalty_plays_kept,
            "sequences_by_category": dict(sorted(self.sequences.items())),
            "sequences_total": int(sum(self.sequences.values())),
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


@dataclass
class TrackingDataset:
    """Typed tracking frames plus the optional play, player and player-play tables.

    Angles in ``o`` and ``dir`` are radians counter-clockwise from +x.
    """

    tracking: pd.DataFrame
    plays: pd.DataFrame | None = None
    players: pd.DataFrame | None = None
    player_play: pd.DataFrame | None = None
    report: IngestReport = field(default_factory=IngestReport)
    standardized: bool = False

    @property
    def n_frames(self) -> int:
        return len(self.tracking)


def degrees_to_math_angle(raw):
    """Clockwise-from-+y degrees to counter-clockwise-from-+x radians, wrapped."""
    return wrap_angle(math.pi / 2 - np.deg2rad(np.asarray(raw, dtype=float)))


def _read_csv(path, required=(), source=None) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    for col in required:
        if col not in df.columns:
            raise SchemaError(col, source or path.name)
    return df


def _parse_tracking(raw: pd.DataFrame, source: str, report: IngestReport) -> pd.DataFrame:
    report.rows_read += len(raw)
    if raw.empty:
        report.warnings.append(f"{source}: no tracking rows")
    blank = raw.replace({"NA": "", "NaN": "", "nan": ""})
    numeric = {}
    bad = np.zeros(len(raw), dtype=bool)
    for col in ("frameId",) + TRACKING_NUMERIC:
        text = blank[col].str.strip()
        values = pd.to_numeric(text, errors="coerce")
        unparsed = values.isna().to_numpy() & (text != "").to_numpy()
        for i in np.flatnonzero(unparsed):
            report.row_errors.append({"source": source, "row": int(i) + 2, "column": col, "value": raw[col].iat[i]})
        bad |= unparsed
        numeric[col] = values.to_numpy(dtype=float)

    out = raw.copy()
    for col, values in numeric.items():
        out[col] = values
    missing = ~bad & (np.isnan(numeric["x"]) | np.isnan(numeric["y"]))
    report.rows_dropped_missing_coordinates += int(missing.sum())
    out = out[~bad & ~missing].reset_index(drop=True)
    out["frameId"] = out["frameId"].astype(np.int64)
    for col in ANGLE_COLUMNS:
        vals = out[col].to_numpy(dtype=float)
        conv = np.full_like(vals, np.nan)
        ok = np.isfinite(vals)
        if ok.any():
            conv[ok] = degrees_to_math_angle(vals[ok])
        out[col] = conv
    for col in ("gameId", "playId"):
        if col in out.columns:
            out[col] = pd.to_numeric(out[col], errors="coerce").astype("Int64")
    if "nflId" in out.columns:
        out["nflId"] = pd.to_numeric(out["nflId"].replace("", np.nan), errors="coerce").astype("Int64")
    if "event" in out.columns:
        out["event"] = out["event"].replace({"NA": ""})
    outside = (
        (out["x"] < -FIELD_SLACK) | (out["x"] > FIELD_LENGTH + FIELD_SLACK)
        | (out["y"] < -FIELD_SLACK) | (out["y"] > FIELD_WIDTH + FIELD_SLACK)
    )
    report.out_of_field_rows += int(outside.sum())
    report.rows_loaded += len(out)
    return out


def load_dataset(tracking, plays=None, players=None, player_play=None) -> TrackingDataset:
    """Read one or more tracking files and the supporting tables.

    ``tracking`` may be a single path or an iterable of paths. Malformed
    numeric cells drop their row and are listed in the report; so are rows
    without coordinates.
    """
    paths = [tracking] if isinstance(tracking, (str, Path)) else list(tracking)
    if not paths:
        raise InvalidArgumentError("at least one tracking file is required")
    report = IngestReport()
    frames = [_parse_tracking(_read_csv(p, TRACKING_REQUIRED), Path(p).name, report) for p in paths]
    track = pd.concat(frames, ignore_index=True) if len(frames) > 1 else frames[0]

    plays_df = _read_csv(plays, ("gameId", "playId")) if plays is not None else None
    if plays_df is not None:
        plays_df = _numeric_ids(plays_df, ("gameId", "playId"))
        for col in ("yardsToGo", "absoluteYardlineNumber"):
            if col in plays_df.columns:
                plays_df[col] = pd.to_numeric(plays_df[col], errors="coerce")
    players_df = _read_csv(players, ("nflId", "position")) if players is not None else None
    if players_df is not None:
        players_df = _numeric_ids(players_df, ("nflId",))
    pp_df = _read_csv(player_play, ("gameId", "playId", "nflId")) if player_play is not None else None
    if pp_df is not None:
        pp_df = _numeric_ids(pp_df, ("gameId", "playId", "nflId"))
    log.info("loaded %d tracking rows (%d row errors)", report.rows_loaded, len(report.row_errors))
    return TrackingDataset(track, plays_df, players_df, pp_df, report)


def _numeric_ids(df, cols):
    df = df.copy()
    for c in cols:
        df[c] = pd.to_numeric(df[c], errors="coerce").astype("Int64")
    return df


def reflect_frames(frames: pd.DataFrame) -> pd.DataFrame:
    """Rotate the field by a half turn: x -> 120 - x, y -> 53.3 - y, angles + pi."""
    out = frames.copy()
    out["x"] = FIELD_LENGTH - out["x"]
    out["y"] = FIELD_WIDTH - out["y"]
    for col in ANGLE_COLUMNS:
        vals = out[col].to_numpy(dtype=float)
        ok = np.isfinite(vals)
        vals = vals.copy()
        if ok.any():
            vals[ok] = wrap_angle(vals[ok] + math.pi)
        out[col] = vals
    return out


def standardize_play_direction(dataset: TrackingDataset) -> TrackingDataset:
    """Rotate leftward plays so every offense attacks the end zone at x = 120.

    Plays without a known direction are dropped and reported.
    """
    if dataset.standardized:
        raise InvalidArgumentError("dataset is already standardized")
    df = dataset.tracking
    report = dataset.report
    if "playDirection" in df.columns:
        direction = df["playDirection"].str.strip().str.lower()
    else:
        direction = pd.Series("", index=df.index)
    known = direction.isin(("left", "right"))
    if not known.all():
        keys = _play_keys(df[~known])
        for g, p in keys:
            report.exclude(g, p, MISSING_DIRECTION)
        df = df[known]
        direction = direction[known]
    left = (direction == "left").to_numpy()
    out = df.copy()
    if left.any():
        out.loc[left] = reflect_frames(df.loc[left])
    return replace(dataset, tracking=out.reset_index(drop=True), standardized=True)


def _play_keys(df):
    if df.empty:
        return []
    g = df["gameId"] if "gameId" in df.columns else pd.Series(pd.NA, index=df.index)
    p = df["playId"] if "playId" in df.columns else pd.Series(pd.NA, index=df.index)
    return list(dict.fromkeys(zip(g.tolist(), p.tolist())))


@dataclass
class PlayMeta:
    game_id: object
    play_id: object
    play_type: str
    absolute_yardline: float = float("nan")
    yards_to_go: float = float("nan")
    possession_team: str | None = None
    play_direction: str | None = None
    penalty: bool = False

    @property
    def line_to_gain(self) -> float:
        """x of the first-down line in standardized coordinates."""
        los = self.absolute_yardline
        if self.play_direction == "left":
            los = FIELD_LENGTH - los
        return los + self.yards_to_go


@dataclass
class CarrierSequence:
    """One ball carrier's frames from the start event through the end event.

    ``frames`` holds every tracked player (and the ball) over that window.
    """

    play: PlayMeta
    carrier_id: int
    position: str
    start_event: str
    end_event: str
    frames: pd.DataFrame
    start_frame: int
    end_frame: int

    @property
    def carrier(self) -> pd.DataFrame:
        c = self.frames[self.frames["nflId"] == self.carrier_id]
        return c.sort_values("frameId").reset_index(drop=True)

    @property
    def category(self) -> str:
        return f"{self.play.play_type}:{self.position}"

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


def _play_events(frames: pd.DataFrame):
    """Frame-ordered (frameId, event) pairs, one per frame."""
    if "event" not in frames.columns:
        return []
    ev = frames.loc[frames["event"].astype(str).str.len() > 0, ["frameId", "event"]]
    ev = ev.drop_duplicates().sort_values("frameId", kind="stable")
    return list(zip(ev["frameId"].tolist(), ev["event"].tolist()))


def find_window(events):
    """First start event and the first end event after it (or ``None``s)."""
    start = end = None
    for frame, name in events:
        if start is None and name in START_EVENTS:
            start = (frame, START_EVENTS[name])
        elif start is not None and name in END_EVENTS and frame > start[0]:
            end = (frame, name)
            break
    return start, end


def _truthy(v) -> bool:
    return str(v).strip().lower() in ("1", "true", "t", "yes")


def _play_meta(dataset, game_id, play_id, frames, start_kind) -> PlayMeta:
    row = None
    if dataset.plays is not None:
        hit = dataset.plays[(dataset.plays["gameId"] == game_id) & (dataset.plays["playId"] == play_id)]
        if len(hit):
            row = hit.iloc[0]
    play_type = None
    if row is not None:
        if "playType" in row.index and str(row["playType"]).lower() in ("run", "pass"):
            play_type = str(row["playType"]).lower()
        elif "isDropback" in row.index and str(row["isDropback"]).strip() != "":
            play_type = "pass" if _truthy(row["isDropback"]) else "run"
    if play_type is None:
        play_type = "run" if start_kind == "handoff" else "pass"
    direction = None
    if "playDirection" in frames.columns:
        direction = str(frames["playDirection"].iloc[0]).strip().lower()
    penalty = row is not None and "playNullifiedByPenalty" in row.index and str(row["playNullifiedByPenalty"]).strip() == "Y"
    get = lambda col: float(row[col]) if row is not None and col in row.index and pd.notna(row[col]) else float("nan")  # noqa: E731
    return PlayMeta(
        game_id=game_id, play_id=play_id, play_type=play_type,
        absolute_yardline=get("absoluteYardlineNumber"), yards_to_go=get("yardsToGo"),
        possession_team=None if row is None or "possessionTeam" not in row.index else row["possessionTeam"],
        play_direction=direction, penalty=bool(penalty),
    )


def _carrier_id(dataset, game_id, play_id, play_type):
    if dataset.plays is not None and "ballCarrierId" in dataset.plays.columns:
        hit = dataset.plays[(dataset.plays["gameId"] == game_id) & (dataset.plays["playId"] == play_id)]
        if len(hit):
            v = pd.to_numeric(hit["ballCarrierId"].iloc[0], errors="coerce")
            if pd.notna(v):
                return int(v)
    pp = dataset.player_play
    if pp is None:
        return None
    flag = "hadRushAttempt" if play_type == "run" else "hadPassReception"
    if flag not in pp.columns:
        return None
    hit = pp[(pp["gameId"] == game_id) & (pp["playId"] == play_id) & pp[flag].map(_truthy)]
    return int(hit["nflId"].iloc[0]) if len(hit) else None


def _position(dataset, nfl_id):
    if dataset.players is None:
        return None
    hit = dataset.players.loc[dataset.players["nflId"] == nfl_id, "position"]
    return str(hit.iloc[0]).strip() if len(hit) else None


def extract_carrier_sequences(dataset: TrackingDataset) -> list:
    """Cut one :class:`CarrierSequence` per qualifying play.

    Non-qualifying plays are skipped with a reason code in
    ``dataset.report.excluded``.
    """
    if not dataset.standardized:
        raise InvalidArgumentError("standardize the play direction before extracting sequences")
    report = dataset.report
    df = dataset.tracking
    sequences = []
    if df.empty:
        return sequences
    for (game_id, play_id), frames in df.groupby(["gameId", "playId"], sort=True):
        seq = _extract_one(dataset, game_id, play_id, frames, report)
        if seq is not None:
            sequences.append(seq)
            report.sequences[seq.category] += 1
            report.penalty_plays_kept += int(seq.play.penalty)
    return sequences


def _extract_one(dataset, game_id, play_id, frames, report):
    start, end = find_window(_play_events(frames))
    if start is None:
        report.exclude(game_id, play_id, NO_START_EVENT)
        return None
    if end is None:
        report.exclude(game_id, play_id, NO_END_EVENT)
        return None
    meta = _play_meta(dataset, game_id, play_id, frames, start[1])
    expected_start = "handoff" if meta.play_type == "run" else "catch"
    if start[1] != expected_start:
        report.exclude(game_id, play_id, START_MISMATCH, f"{meta.play_type} play starting at {start[1]}")
        return None
    carrier = _carrier_id(dataset, game_id, play_id, meta.play_type)
    if carrier is None:
        report.exclude(game_id, play_id, NO_CARRIER)
        return None
    position = _position(dataset, carrier)
    allowed = RUN_POSITIONS if meta.play_type == "run" else PASS_POSITIONS
    if position not in allowed:
        report.exclude(game_id, play_id, POSITION_FILTER, f"carrier position {position}")
        return None
    window = frames[(frames["frameId"] >= start[0]) & (frames["frameId"] <= end[0])]
    track = window[window["nflId"] == carrier].sort_values("frameId")
    if track["frameId"].tolist() != list(range(start[0], end[0] + 1)):
        report.exclude(game_id, play_id, CARRIER_GAP)
        return None
    usable = int(_keep_moving(track[["x", "y"]].to_numpy(dtype=float)).sum())
    if usable < MIN_SEQUENCE_FRAMES:
        report.exclude(game_id, play_id, TOO_SHORT, f"{usable} usable frames")
        return None
    return CarrierSequence(
        play=meta, carrier_id=carrier, position=position, start_event=start[1], end_event=end[1],
        frames=window.reset_index(drop=True), start_frame=int(start[0]), end_frame=int(end[0]),
    )


def sequences_by_category(sequences: Iterable[CarrierSequence]) -> dict:
    return dict(sorted(Counter(s.category for s in sequences).items()))
