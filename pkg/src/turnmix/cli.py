"""``turnmix`` command line.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error (and
``diagnose`` returns 2 when any R-hat reaches its threshold).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig
from .diagnostics import summarize_diagnostics
from .errors import (AlignmentError, ConfigError, DimensionError, InvalidArgumentError, SchemaError,
                     TurnmixError)
from .features import build_all, dataset_to_table, frames_to_table, read_table, table_to_dataset, write_table
from .fit import fit_model
from .ingest import IngestReport, extract_carrier_sequences, load_dataset, standardize_play_direction
from .model import N_FIXED, POSITIONS, parameter_names
from .posterior import export_artifacts, player_ratings, roster_from_table, summarize
from .recovery import ranking_fidelity, recovery_table
from .simulate import TRUTH_PRESETS, TrueParams, simulate_dataset
from .storage import (file_digest, read_draws, read_json, read_sequences, run_manifest, write_draws,
                      write_json, write_sequences)

log = logging.getLogger("turnmix")

VALIDATION_ERRORS = (ConfigError, InvalidArgumentError, SchemaError, DimensionError, AlignmentError,
                     FileNotFoundError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(values) != len(POSITIONS):
        raise argparse.ArgumentTypeError(f"expected {len(POSITIONS)} counts (RB,TE,WR)")
    return values


def _floors(text):
    out = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep or key not in POSITIONS:
            raise argparse.ArgumentTypeError(f"expected e.g. RB=25,TE=10,WR=15, got {text!r}")
        out[key] = int(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("-o", "--output-dir", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument("--chains", type=int)
    sampler.add_argument("--iter", dest="iterations", type=int, help="iterations per chain, warmup included")
    sampler.add_argument("--warmup", type=int)
    sampler.add_argument("--target-accept", type=float)
    sampler.add_argument("--max-depth", dest="max_tree_depth", type=int)

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--truth", help="'table3' or a JSON file of true parameters")
    sim.add_argument("--players", type=_int_list, help="players per position, e.g. 20,20,20")
    sim.add_argument("--rows", type=int, help="rows per player")

    parser = _Parser(prog="turnmix", description="Hierarchical von Mises turn-angle models.")
    parser.add_argument("--version", action="version", version=f"turnmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="extract ball-carrier sequences from tracking CSVs")
    p.add_argument("--tracking", nargs="+")
    p.add_argument("--plays")
    p.add_argument("--players")
    p.add_argument("--player-play")

    p = sub.add_parser("features", parents=[common], help="build the model-frame table from sequences")
    p.add_argument("--sequences", help="directory written by 'ingest'")

    p = sub.add_parser("fit", parents=[common, sampler], help="sample the posterior")
    p.add_argument("--data", help="model-frame CSV")

    p = sub.add_parser("summarize", parents=[common], help="tables, ratings and plot data from draws")
    p.add_argument("--draws")
    p.add_argument("--data")
    p.add_argument("--combine", help="CSV with player_id and forty_time_seconds")
    p.add_argument("--floors", type=_floors, help="minimum plays per position, e.g. RB=25,TE=10,WR=15")

    sub.add_parser("simulate", parents=[common, sim], help="synthetic model-frame table with known truth")
    sub.add_parser("recover", parents=[common, sim, sampler], help="simulate, fit and compare with the truth")

    p = sub.add_parser("diagnose", parents=[common], help="R-hat, ESS and divergences from a draws file")
    p.add_argument("--draws")
    p.add_argument("--rhat-threshold", type=float)
    return parser


def _resolve(args) -> RunConfig:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    overrides = {
        "output_dir": g("output_dir"),
        "seed": g("seed"),
        "inputs": {
            "tracking": g("tracking"), "plays": g("plays"),
            "players": g("players") if args.command == "ingest" else None,
            "player_play": g("player_play"), "sequences": g("sequences"), "data": g("data"),
            "draws": g("draws"), "combine": g("combine"),
        },
        "sampler": {k: g(k) for k in ("chains", "iterations", "warmup", "target_accept", "max_tree_depth")},
        "floors": g("floors"),
        "simulate": {"truth": g("truth"), "players": g("players") if args.command != "ingest" else None,
                     "rows": g("rows")},
        "diagnose": {"rhat_threshold": g("rhat_threshold")},
    }
    return RunConfig.resolve(g("config"), overrides)


def _require(cfg: RunConfig, *keys):
    """Check input paths before any long computation."""
    paths = {}
    for key in keys:
        value = cfg.inputs.get(key)
        if value in (None, [], ""):
            raise ConfigError(f"missing required input '{key}' (flag or config inputs.{key})")
        for v in value if isinstance(value, list) else [value]:
            if not Path(v).exists():
                raise FileNotFoundError(f"{key}: no such file or directory: {v}")
        paths[key] = value
    return paths


def _optional(cfg: RunConfig, key):
    value = cfg.inputs.get(key)
    if value and not Path(value).exists():
        raise FileNotFoundError(f"{key}: no such file: {value}")
    return value or None


def _out(cfg: RunConfig) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _truth(cfg: RunConfig) -> TrueParams:
    name = cfg["simulate"]["truth"]
    if name in TRUTH_PRESETS:
        return TRUTH_PRESETS[name]
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"unknown truth {name!r}: not a preset ({', '.join(TRUTH_PRESETS)}) or a file")
    try:
        return TrueParams.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"truth file {path} is malformed: {exc}") from None


# -- commands --------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    paths = _require(cfg, "tracking")
    extra = {k: _optional(cfg, k) for k in ("plays", "players", "player_play")}
    out = _out(cfg)
    dataset = standardize_play_direction(load_dataset(paths["tracking"], **extra))
    sequences = extract_carrier_sequences(dataset)
    write_sequences(sequences, out)
    dataset.report.write(out / "ingest_report.json")
    log.info("%d sequences written to %s", len(sequences), out)
    print(f"sequences: {len(sequences)}")
    for category, n in dataset.report.to_dict()["sequences_by_category"].items():
        print(f"  {category}: {n}")
    return 0


def cmd_features(cfg: RunConfig) -> int:
    paths = _require(cfg, "sequences")
    out = _out(cfg)
    sequences = read_sequences(paths["sequences"])
    report = IngestReport()
    frames = build_all(sequences, report)
    if not frames:
        raise InvalidArgumentError("no model frames could be built")
    write_table(frames_to_table(frames), out / "modelframes.csv")
    write_json({"sequences": len(sequences), "rows": len(frames),
                "excluded_by_reason": dict(report.excluded), "excluded_plays": report.excluded_plays},
               out / "features_report.json")
    print(f"rows: {len(frames)}")
    return 0


def _fit_and_write(cfg: RunConfig, data, out: Path, data_path: Path):
    draws = fit_model(data, cfg.sampler_config(), cfg.prior_config())
    write_draws(draws, out / "draws.csv")
    manifest = run_manifest(draws, {"data": str(data_path), "data_sha256": file_digest(data_path),
                                    "run_config": cfg.to_dict(), "version": __version__})
    write_json(manifest, out / "manifest.json")
    return draws


def cmd_fit(cfg: RunConfig) -> int:
    paths = _require(cfg, "data")
    cfg.sampler_config()
    out = _out(cfg)
    data = table_to_dataset(read_table(paths["data"]))
    draws = _fit_and_write(cfg, data, out, Path(paths["data"]))
    print(f"draws: {draws.n_chains} x {draws.n_draws}; divergences per chain: {draws.divergence_count().tolist()}")
    return 0


def cmd_summarize(cfg: RunConfig) -> int:
    paths = _require(cfg, "draws", "data")
    combine_path = _optional(cfg, "combine")
    out = _out(cfg)
    draws = read_draws(paths["draws"])
    table = read_table(paths["data"])
    data = table_to_dataset(table)
    expected = parameter_names(data.J)
    if draws.names != expected:
        raise InvalidArgumentError("draws columns do not match the model-frame table's players")
    names = expected[:N_FIXED] + [f"sigma[{p}]" for p in POSITIONS]
    rows = summarize(draws, names, data.player_position)
    ratings = player_ratings(draws, roster_from_table(table), cfg.floors())
    combine = pd.read_csv(combine_path) if combine_path else None
    written = export_artifacts(out, rows, ratings, angles=data.phi, combine=combine)
    for path in written.values():
        print(path)
    return 0


def _simulate(cfg: RunConfig):
    sim = cfg["simulate"]
    if int(sim["rows"]) < 1:
        raise ConfigError("rows must be positive")
    return simulate_dataset(_truth(cfg), tuple(sim["players"]), int(sim["rows"]), seed=int(cfg["seed"]))


def _write_simulation(sim, out: Path) -> Path:
    path = write_table(dataset_to_table(sim.data), out / "modelframes.csv")
    write_json(sim.manifest(), out / "truth.json")
    return path


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out(cfg)
    sim = _simulate(cfg)
    path = _write_simulation(sim, out)
    print(f"{sim.data.n_rows} rows for {sim.data.J} players -> {path}")
    return 0


def cmd_recover(cfg: RunConfig) -> int:
    cfg.sampler_config()
    out = _out(cfg)
    sim = _simulate(cfg)
    path = _write_simulation(sim, out)
    draws = _fit_and_write(cfg, sim.data, out, path)
    table = recovery_table(draws, sim)
    table.to_csv(out / "recovery.csv", index=False, float_format="%.17g")
    rhat = max(r for _, r, _ in summarize_diagnostics(draws) if np.isfinite(r))
    report = {
        "fixed_effects_covered": int(table["covered"].iloc[:N_FIXED].sum()),
        "fixed_effects": N_FIXED,
        "ranking_spearman": ranking_fidelity(draws, sim),
        "max_rhat": rhat,
        "divergences": int(draws.divergence_count().sum()),
    }
    write_json(report, out / "recovery.json")
    print(f"covered {report['fixed_effects_covered']}/{N_FIXED} fixed effects; max R-hat {rhat:.4f}")
    return 0


def cmd_diagnose(cfg: RunConfig, write_table_to=None) -> int:
    """Prints the table; also writes ``diagnostics.csv`` when an output directory is given explicitly."""
    paths = _require(cfg, "draws")
    threshold = float(cfg["diagnose"]["rhat_threshold"])
    draws = read_draws(paths["draws"])
    rows = summarize_diagnostics(draws)
    table = pd.DataFrame(rows, columns=["parameter", "rhat", "ess_bulk"])
    pd.set_option("display.max_rows", None)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    div = draws.divergence_count()
    print(f"divergences per chain: {div.tolist()} (total {int(div.sum())} of {draws.n_chains * draws.n_draws})")
    if write_table_to is not None:
        Path(write_table_to).mkdir(parents=True, exist_ok=True)
        table.to_csv(Path(write_table_to) / "diagnostics.csv", index=False, float_format="%.17g")
    bad = table[~(table["rhat"] < threshold)]
    if len(bad):
        print(f"{len(bad)} parameter(s) with R-hat >= {threshold}", file=sys.stderr)
        return 2
    return 0


COMMANDS = {
    "ingest": cmd_ingest, "features": cmd_features, "fit": cmd_fit, "summarize": cmd_summarize,
    "simulate": cmd_simulate, "recover": cmd_recover, "diagnose": cmd_diagnose,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, args.output_dir)
        return COMMANDS[args.command](cfg)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TurnmixError, RuntimeError, OSError, FloatingPointError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
