"""Hierarchical von Mises models for ball-carrier turn angles."""

__version__ = "0.1.0"

from .circular import (  # noqa: E402
    bearings, bessel_ratio, log_bessel_i0, turn_angle_series, vm_log_density, wrap_angle,
)
from .fit import fit_model  # noqa: E402
from .model import ModelDataset, PriorConfig, TurnAngleModel, log_posterior, log_posterior_gradient  # noqa: E402
from .sampler import PosteriorDraws, SamplerConfig, nuts_sample  # noqa: E402
from .simulate import TABLE3_TRUTH, TrueParams, simulate_dataset  # noqa: E402

__all__ = [
    "bearings", "bessel_ratio", "log_bessel_i0", "turn_angle_series", "vm_log_density", "wrap_angle",
    "fit_model", "ModelDataset", "PriorConfig", "TurnAngleModel", "log_posterior", "log_posterior_gradient",
    "PosteriorDraws", "SamplerConfig", "nuts_sample", "TABLE3_TRUTH", "TrueParams", "simulate_dataset",
]
