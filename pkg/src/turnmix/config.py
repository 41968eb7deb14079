"""Run configuration: built-in defaults, a JSON config file, then command-line flags.

Config file keys (all optional)::

    {
      "output_dir": "runs/a",
      "seed": 7,
      "inputs":   {"tracking": ["week1.csv"], "plays": "plays.csv", "players": "players.csv",
                   "player_play": "player_play.csv", "sequences": "out/", "data": "out/modelframes.csv",
                   "draws": "out/draws.csv", "combine": "combine.csv"},
      "sampler":  {"chains": 4, "iterations": 3500, "warmup": 1500, "target_accept": 0.8,
                   "max_tree_depth": 10, "init_radius": 2.0},
      "priors":   {"fixed_effect_sd": 5.0, "sigma_scale": 2.5, "sigma_df": 3.0, "log_kappa_max": 30.0},
      "floors":   {"RB": 25, "TE": 10, "WR": 15},
      "simulate": {"truth": "table3", "players": [20, 20, 20], "rows": 200},
      "diagnose": {"rhat_threshold": 1.05}
    }

When neither a flag nor the file names an output directory, the
``TURNMIX_OUTPUT_DIR`` environment variable is used, then ``turnmix-out``.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InvalidArgumentError
from .model import PriorConfig
from .posterior import DEFAULT_FLOORS
from .sampler import SamplerConfig

OUTPUT_ENV = "TURNMIX_OUTPUT_DIR"
FALLBACK_OUTPUT = "turnmix-out"

DEFAULTS = {
    "output_dir": None,
    "seed": 0,
    "inputs": {
        "tracking": [], "plays": None, "players": None, "player_play": None,
        "sequences": None, "data": None, "draws": None, "combine": None,
    },
    "sampler": {
        "chains": 4, "iterations": 3500, "warmup": 1500, "target_accept": 0.8,
        "max_tree_depth": 10, "init_radius": 2.0,
    },
    "priors": {"fixed_effect_sd": 5.0, "sigma_scale": 2.5, "sigma_df": 3.0, "log_kappa_max": 30.0},
    "floors": dict(DEFAULT_FLOORS),
    "simulate": {"truth": "table3", "players": [20, 20, 20], "rows": 200},
    "diagnose": {"rhat_threshold": 1.05},
}


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and key != "floors":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where}{key!r} must be an object")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


@dataclass
class RunConfig:
    """Resolved settings for one command."""

    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def resolve(cls, file_path=None, overrides=None, env=None) -> "RunConfig":
        """Defaults, then the config file, then ``overrides`` (flag values; ``None`` means unset)."""
        values = copy.deepcopy(DEFAULTS)
        if file_path is not None:
            values = _merge(values, load_config_file(file_path))
        values = _merge(values, _drop_unset(overrides or {}))
        if values["output_dir"] is None:
            env = os.environ if env is None else env
            values["output_dir"] = env.get(OUTPUT_ENV) or FALLBACK_OUTPUT
        cfg = cls(values)
        cfg.sampler_config()
        cfg.prior_config()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output_dir"])

    @property
    def inputs(self) -> dict:
        return self.values["inputs"]

    def sampler_config(self) -> SamplerConfig:
        try:
            return SamplerConfig(seed=int(self.values["seed"]), **self.values["sampler"])
        except (TypeError, InvalidArgumentError) as exc:
            raise ConfigError(f"invalid sampler settings: {exc}") from None

    def prior_config(self) -> PriorConfig:
        try:
            return PriorConfig(**self.values["priors"])
        except (TypeError, InvalidArgumentError) as exc:
            raise ConfigError(f"invalid prior settings: {exc}") from None

    def floors(self) -> dict:
        return {k: int(v) for k, v in self.values["floors"].items()}

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)


def _drop_unset(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            sub = _drop_unset(v)
            if sub:
                out[k] = sub
        elif v is not None:
            out[k] = v
    return out
