"""Synthetic model-frame datasets drawn from the exact generative model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circular import TWO_PI, wrap_angle
from .errors import InvalidArgumentError
from .model import (
    CONCENTRATION_COVARIATES,
    N_CONC,
    N_GROUPS,
    N_MEAN,
    POSITIONS,
    ModelDataset,
    ParameterVector,
)

# Best-Fisher becomes ill-conditioned past this; use the normal limit instead.
_VM_NORMAL_LIMIT = 1e6


def sample_von_mises(mu, kappa, rng=None, size=None):
    """Draw von Mises variates with the Best-Fisher rejection algorithm.

    ``mu`` and ``kappa`` broadcast against each other (and ``size``). A zero
    concentration gives uniform draws on (-pi, pi].
    """
    rng = rng if rng is not None else np.random.default_rng()
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0) or not np.all(np.isfinite(kappa)):
        raise InvalidArgumentError("kappa must be finite and >= 0")
    shape = np.broadcast_shapes(mu.shape, kappa.shape, () if size is None else tuple(np.atleast_1d(size)))
    mu = np.broadcast_to(mu, shape).ravel()
    kappa = np.broadcast_to(kappa, shape).ravel()
    out = np.empty(kappa.shape[0])

    flat = kappa == 0
    out[flat] = math.pi - TWO_PI * rng.uniform(size=int(flat.sum()))

    huge = kappa > _VM_NORMAL_LIMIT
    out[huge] = wrap_angle(mu[huge] + rng.standard_normal(int(huge.sum())) / np.sqrt(kappa[huge]))

    todo = np.flatnonzero(~flat & ~huge)
    if todo.size:
        k = kappa[todo]
        s = 0.5 / k
        r = s + np.sqrt(1.0 + s * s)
        pending = np.arange(todo.size)
        result = np.empty(todo.size)
        while pending.size:
            kk, rr = k[pending], r[pending]
            u1, u2, u3 = rng.uniform(size=(3, pending.size))
            zc = np.cos(math.pi * u1)
            f = np.clip((1.0 + rr * zc) / (rr + zc), -1.0, 1.0)
            c = kk * (rr - f)
            with np.errstate(divide="ignore"):
                ok = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
            sign = np.where(u3 > 0.5, 1.0, -1.0)
            result[pending[ok]] = sign[ok] * np.arccos(f[ok])
            pending = pending[~ok]
        out[todo] = wrap_angle(mu[todo] + result)
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


@dataclass
class TrueParams:
    """Generative truth on the natural scale (positive ``sigma``, centred ``u``)."""

    gamma0: float
    psi: np.ndarray
    sigma: np.ndarray
    alpha0: float = 0.0
    beta: np.ndarray = field(default_factory=lambda: np.zeros(N_MEAN))

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float).reshape(N_CONC)
        self.beta = np.asarray(self.beta, dtype=float).reshape(N_MEAN)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(N_GROUPS)
        if np.any(self.sigma <= 0):
            raise InvalidArgumentError("sigma must be positive")

    def parameter_vector(self, u, player_position) -> ParameterVector:
        """Unconstrained parameters matching this truth and realised effects ``u``."""
        sig = self.sigma[np.asarray(player_position)]
        return ParameterVector(self.alpha0, self.beta.copy(), self.gamma0, self.psi.copy(),
                               np.asarray(u, float) / sig, np.log(self.sigma))

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "beta": self.beta.tolist(),
            "gamma0": self.gamma0,
            "psi": dict(zip(CONCENTRATION_COVARIATES, self.psi.tolist())),
            "sigma": dict(zip(POSITIONS, self.sigma.tolist())),
        }

    @classmethod
    def from_dict(cls, d) -> "TrueParams":
        psi = d["psi"]
        sigma = d["sigma"]
        if isinstance(psi, dict):
            psi = [psi[c] for c in CONCENTRATION_COVARIATES]
        if isinstance(sigma, dict):
            sigma = [sigma[p] for p in POSITIONS]
        return cls(gamma0=d["gamma0"], psi=psi, sigma=sigma,
                   alpha0=d.get("alpha0", 0.0), beta=d.get("beta", np.zeros(N_MEAN)))


#: Posterior means of the published fit, used as simulation truth.
TABLE3_TRUTH = TrueParams(
    gamma0=1.309,
    psi=[0.709, -0.094, -0.015, 0.044, 0.064, -0.134],
    sigma=[0.135, 0.300, 0.304],
)

TRUTH_PRESETS = {"table3": TABLE3_TRUTH}


@dataclass(frozen=True)
class CovariateSpec:
    """Ranges for generated covariates; rows are grouped into plays of 0.1 s frames."""

    speed_low: float = 1.0
    speed_high: float = 9.0
    accel_sd: float = 1.5
    accel_max: float = 6.0
    frame_seconds: float = 0.1
    play_length: tuple = (10, 40)
    run_share_rb: float = 0.84


@dataclass
class SimulatedDataset:
    data: ModelDataset
    u: np.ndarray
    truth: TrueParams
    seed: int

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "truth": self.truth.to_dict(),
            "players_per_position": self.data.position_counts,
            "rows": int(self.data.n_rows),
            "u": self.u.tolist(),
            "player_ids": list(self.data.player_ids),
        }


def _player_rows(rng, n_rows, position, spec: CovariateSpec):
    lo, hi = spec.play_length
    lengths = []
    while sum(lengths) < n_rows:
        lengths.append(int(rng.integers(lo, hi + 1)))
    lengths[-1] -= sum(lengths) - n_rows
    speed = rng.uniform(spec.speed_low, spec.speed_high, n_rows)
    accel = np.minimum(np.abs(rng.normal(0.0, spec.accel_sd, n_rows)), spec.accel_max)
    play = np.repeat(np.arange(len(lengths)), lengths)
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    step = speed * spec.frame_seconds
    cum = np.cumsum(step)
    cum_dist = cum - np.repeat(cum[starts] - step[starts], lengths)
    if position == 0:
        is_run = np.repeat(rng.uniform(size=len(lengths)) < spec.run_share_rb, lengths).astype(float)
    else:
        is_run = np.zeros(n_rows)
    z = np.column_stack([
        speed, accel, cum_dist, is_run,
        np.full(n_rows, float(position == 1)), np.full(n_rows, float(position == 2)),
    ])
    x = rng.standard_normal((n_rows, N_MEAN))
    return x, z, play


def simulate_dataset(
    truth: TrueParams = TABLE3_TRUTH,
    players_per_position=(20, 20, 20),
    rows_per_player: int = 200,
    covariates: CovariateSpec | None = None,
    seed: int = 0,
    u=None,
) -> SimulatedDataset:
    """Generate a :class:`ModelDataset` plus the realised player effects.

    Player ``j`` gets its own random stream keyed on ``(seed, j)``, so the
    output does not depend on evaluation order. Pass ``u`` to fix the player
    effects instead of drawing them from ``N(0, sigma_p^2)``.
    """
    spec = covariates or CovariateSpec()
    counts = [int(c) for c in players_per_position]
    if len(counts) != N_GROUPS or min(counts) < 0 or sum(counts) == 0:
        raise InvalidArgumentError("players_per_position needs three non-negative counts")
    if rows_per_player < 1:
        raise InvalidArgumentError("rows_per_player must be positive")
    position = np.repeat(np.arange(N_GROUPS), counts)
    J = position.size
    if u is None:
        u_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        u = u_rng.standard_normal(J) * truth.sigma[position]
    else:
        u = np.asarray(u, dtype=float).reshape(J)

    xs, zs, phis, plays = [], [], [], []
    for j in range(J):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0, j]))
        x, z, play = _player_rows(rng, rows_per_player, position[j], spec)
        eta = truth.alpha0 + x @ truth.beta
        log_kappa = truth.gamma0 + z @ truth.psi + u[j]
        phis.append(sample_von_mises(2.0 * np.arctan(eta), np.exp(log_kappa), rng))
        xs.append(x)
        zs.append(z)
        plays.append(j * 10_000 + play)
    frame = np.concatenate([np.arange(rows_per_player)] * J)
    data = ModelDataset(
        phi=np.concatenate(phis),
        x=np.vstack(xs),
        z=np.vstack(zs),
        player_index=np.repeat(np.arange(J), rows_per_player),
        player_position=position,
        player_ids=[f"sim{j:04d}" for j in range(J)],
        play_id=np.concatenate(plays),
        game_id=np.zeros(J * rows_per_player, dtype=np.int64),
        frame_id=frame,
    )
    return SimulatedDataset(data=data, u=u, truth=truth, seed=seed)
