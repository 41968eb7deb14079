"""On-disk formats: draws CSV, run manifests and serialized carrier sequences."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError, SchemaError
from .ingest import CarrierSequence, PlayMeta
from .sampler import PosteriorDraws

STAT_COLUMNS = ("divergent__", "tree_depth__", "n_leapfrog__", "accept_stat__")


def write_draws(draws: PosteriorDraws, path) -> Path:
    """One row per post-warmup draw: chain, iteration, sampler stats, parameters.

    Floats are written with 17 significant digits so reruns are byte-identical.
    """
    path = Path(path)
    c, n, dim = draws.draws.shape
    chain = np.repeat(np.arange(c), n)
    iteration = np.tile(np.arange(1, n + 1), c)

    def stat(a, dtype, fill):
        return np.full(c * n, fill, dtype=dtype) if a is None else np.asarray(a, dtype=dtype).reshape(-1)

    cols = {
        "chain": chain, "iteration": iteration,
        "divergent__": stat(draws.divergences, np.int64, 0),
        "tree_depth__": stat(draws.tree_depth, np.int64, -1),
        "n_leapfrog__": stat(draws.n_leapfrog, np.int64, -1),
        "accept_stat__": stat(draws.accept_stat, float, np.nan),
    }
    frame = pd.DataFrame(cols)
    params = pd.DataFrame(draws.draws.reshape(c * n, dim), columns=draws.names)
    pd.concat([frame, params], axis=1).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_draws(path) -> PosteriorDraws:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    for col in ("chain", "iteration"):
        if col not in df.columns:
            raise SchemaError(col, path.name)
    df = df.sort_values(["chain", "iteration"], kind="stable")
    names = [c for c in df.columns if c not in ("chain", "iteration") and not c.endswith("__")]
    chains = np.unique(df["chain"].to_numpy())
    counts = df.groupby("chain").size().to_numpy()
    if len(set(counts)) != 1:
        raise InvalidArgumentError("chains in the draws file have different lengths")
    c, n = len(chains), int(counts[0])

    def grid(col, dtype):
        return df[col].to_numpy(dtype=dtype).reshape(c, n) if col in df.columns else None

    return PosteriorDraws(
        draws=df[names].to_numpy(dtype=float).reshape(c, n, len(names)),
        names=names,
        divergences=grid("divergent__", np.int64).astype(bool) if "divergent__" in df.columns else None,
        tree_depth=grid("tree_depth__", np.int64),
        n_leapfrog=grid("n_leapfrog__", np.int64),
        accept_stat=grid("accept_stat__", float),
    )


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def run_manifest(draws: PosteriorDraws, extra=None) -> dict:
    meta = dict(draws.meta)
    manifest = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": meta.pop("config", None),
        "chains": draws.n_chains,
        "draws_per_chain": draws.n_draws,
        "divergences": draws.divergence_count(),
        "tree_depth_histogram": draws.tree_depth_histogram(),
        "step_size": draws.step_size,
        "inverse_metric_range": None if draws.inv_metric is None else
        [float(np.min(draws.inv_metric)), float(np.max(draws.inv_metric))],
        **meta,
    }
    if extra:
        manifest.update(extra)
    return _jsonable(manifest)


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n")
    return path


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return json.loads(path.read_text())


# -- carrier sequences -----------------------------------------------------------

SEQUENCE_INDEX_COLUMNS = [
    "seq_id", "game_id", "play_id", "carrier_id", "position", "play_type", "start_event", "end_event",
    "start_frame", "end_frame", "absolute_yardline", "yards_to_go", "possession_team", "play_direction", "penalty",
]


def write_sequences(sequences, out_dir):
    """``sequences_index.csv`` (one row per sequence) and ``sequences.csv`` (all frames)."""
    out = Path(out_dir)
    index_rows, frames = [], []
    for k, s in enumerate(sequences):
        p = s.play
        index_rows.append([
            k, p.game_id, p.play_id, s.carrier_id, s.position, p.play_type, s.start_event, s.end_event,
            s.start_frame, s.end_frame, p.absolute_yardline, p.yards_to_go, p.possession_team,
            p.play_direction, int(p.penalty),
        ])
        frames.append(s.frames.assign(seq_id=k))
    index = pd.DataFrame(index_rows, columns=SEQUENCE_INDEX_COLUMNS)
    index.to_csv(out / "sequences_index.csv", index=False, float_format="%.17g")
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["seq_id"])
    cols = ["seq_id"] + [c for c in table.columns if c != "seq_id"]
    table[cols].to_csv(out / "sequences.csv", index=False, float_format="%.17g")
    return out / "sequences_index.csv", out / "sequences.csv"


def read_sequences(in_dir) -> list:
    d = Path(in_dir)
    index_path, frames_path = d / "sequences_index.csv", d / "sequences.csv"
    for p in (index_path, frames_path):
        if not p.exists():
            raise FileNotFoundError(f"no such file: {p}")
    index = pd.read_csv(index_path, keep_default_na=False, na_values=[""], float_precision="round_trip")
    for col in SEQUENCE_INDEX_COLUMNS:
        if col not in index.columns:
            raise SchemaError(col, index_path.name)
    frames = pd.read_csv(frames_path, keep_default_na=False, na_values=[""], float_precision="round_trip")
    if "nflId" in frames.columns:
        frames["nflId"] = frames["nflId"].astype("Int64")
    if "event" in frames.columns:
        frames["event"] = frames["event"].fillna("").astype(str)
    groups = dict(tuple(frames.groupby("seq_id"))) if len(frames) else {}
    out = []
    for r in index.itertuples(index=False):
        meta = PlayMeta(
            game_id=r.game_id, play_id=r.play_id, play_type=r.play_type,
            absolute_yardline=float(r.absolute_yardline), yards_to_go=float(r.yards_to_go),
            possession_team=None if pd.isna(r.possession_team) else r.possession_team,
            play_direction=None if pd.isna(r.play_direction) else r.play_direction,
            penalty=bool(r.penalty),
        )
        f = groups.get(r.seq_id, frames.iloc[0:0]).drop(columns="seq_id").reset_index(drop=True)
        out.append(CarrierSequence(
            play=meta, carrier_id=int(r.carrier_id), position=r.position, start_event=r.start_event,
            end_event=r.end_event, frames=f, start_frame=int(r.start_frame), end_frame=int(r.end_frame),
        ))
    return out
