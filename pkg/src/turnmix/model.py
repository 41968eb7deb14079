"""Hierarchical von Mises regression: joint log-posterior and its gradient.

The unconstrained parameter vector is laid out as::

    [alpha0, beta (15), gamma0, psi (6), u_tilde (J), log_sigma (3)]

with the mean link ``tan(mu / 2) = alpha0 + x @ beta`` and the concentration
link ``log kappa = gamma0 + z @ psi + sigma[pos[j]] * u_tilde[j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .circular import LOG_TWO_PI, _log_i0_and_ratio
from .errors import DimensionError, InvalidArgumentError

MEAN_COVARIATES = (
    "phi_prev",
    "carrier_x_from_endzone",
    "carrier_y_from_center",
    "carrier_x_from_first_down",
    "defenders_in_front",
    "defenders_to_left",
    "teammates_in_front",
    "teammates_to_left",
    "defender_speed",
    "defender_rel_motion_angle",
    "defender_dx",
    "defender_abs_dy",
    "defender_distance",
    "defender_x_from_endzone",
    "defender_y_from_center",
)
CONCENTRATION_COVARIATES = ("speed", "acceleration", "cumulative_distance", "is_run", "is_te", "is_wr")
POSITIONS = ("RB", "TE", "WR")

N_MEAN = len(MEAN_COVARIATES)
N_CONC = len(CONCENTRATION_COVARIATES)
N_FIXED = 2 + N_MEAN + N_CONC  # alpha0, beta, gamma0, psi
N_GROUPS = len(POSITIONS)


@dataclass(frozen=True)
class PriorConfig:
    """Prior scales and the log-concentration overflow guard."""

    fixed_effect_sd: float = 5.0
    sigma_scale: float = 2.5
    sigma_df: float = 3.0
    log_kappa_max: float = 30.0

    def __post_init__(self):
        for name in ("fixed_effect_sd", "sigma_scale", "sigma_df", "log_kappa_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {v}")


@dataclass
class ModelDataset:
    """Column-oriented modelling rows.

    ``player_position[j]`` is an index into :data:`POSITIONS`.
    """

    phi: np.ndarray
    x: np.ndarray
    z: np.ndarray
    player_index: np.ndarray
    player_position: np.ndarray
    player_ids: Sequence = None
    play_id: np.ndarray = None
    game_id: np.ndarray = None
    frame_id: np.ndarray = None

    def __post_init__(self):
        self.phi = np.ascontiguousarray(self.phi, dtype=float)
        n = self.phi.shape[0]
        self.x = np.ascontiguousarray(np.reshape(self.x, (n, N_MEAN)), dtype=float)
        self.z = np.ascontiguousarray(np.reshape(self.z, (n, N_CONC)), dtype=float)
        self.player_index = np.asarray(self.player_index, dtype=np.int64)
        self.player_position = np.asarray(self.player_position, dtype=np.int64)
        if n == 0:
            raise InvalidArgumentError("dataset has no rows")
        if self.player_index.shape != (n,):
            raise DimensionError("player_index must have one entry per row")
        J = self.player_position.shape[0]
        if self.player_index.min() < 0 or self.player_index.max() >= J:
            raise InvalidArgumentError("player_index out of range")
        if np.any(np.bincount(self.player_index, minlength=J) == 0):
            raise InvalidArgumentError("every player needs at least one row")
        if self.player_position.min() < 0 or self.player_position.max() >= N_GROUPS:
            raise InvalidArgumentError("player_position must index POSITIONS")
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.z))):
            raise InvalidArgumentError("non-finite value in modelling rows")
        if self.player_ids is None:
            self.player_ids = list(range(J))

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @property
    def J(self) -> int:
        return self.player_position.shape[0]

    @property
    def position_counts(self) -> dict:
        counts = np.bincount(self.player_position, minlength=N_GROUPS)
        return {p: int(c) for p, c in zip(POSITIONS, counts)}

    def rows_per_player(self) -> np.ndarray:
        return np.bincount(self.player_index, minlength=self.J)

    def take(self, order) -> "ModelDataset":
        """Rows reordered (or subset) by ``order``; player table unchanged."""
        pick = lambda a: None if a is None else np.asarray(a)[order]  # noqa: E731
        return ModelDataset(
            self.phi[order], self.x[order], self.z[order], self.player_index[order],
            self.player_position, self.player_ids, pick(self.play_id), pick(self.game_id), pick(self.frame_id),
        )


@dataclass
class ParameterVector:
    alpha0: float
    beta: np.ndarray
    gamma0: float
    psi: np.ndarray
    u_tilde: np.ndarray
    log_sigma: np.ndarray = field(default_factory=lambda: np.zeros(N_GROUPS))

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def player_effects(self, player_position) -> np.ndarray:
        """Centred random intercepts ``u_j = sigma[pos[j]] * u_tilde[j]``."""
        return self.sigma[np.asarray(player_position)] * self.u_tilde

    def pack(self) -> np.ndarray:
        return pack(self)


def dimension(J: int) -> int:
    return N_FIXED + J + N_GROUPS


def unpack(theta, J: int) -> ParameterVector:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.shape[0] != dimension(J):
        raise DimensionError(f"expected a vector of length {dimension(J)} for J={J}, got shape {theta.shape}")
    i = 0
    alpha0 = float(theta[i]); i += 1
    beta = theta[i:i + N_MEAN].copy(); i += N_MEAN
    gamma0 = float(theta[i]); i += 1
    psi = theta[i:i + N_CONC].copy(); i += N_CONC
    u_tilde = theta[i:i + J].copy(); i += J
    log_sigma = theta[i:i + N_GROUPS].copy()
    return ParameterVector(alpha0, beta, gamma0, psi, u_tilde, log_sigma)


def pack(params: ParameterVector) -> np.ndarray:
    return np.concatenate([
        [params.alpha0], np.asarray(params.beta, float), [params.gamma0], np.asarray(params.psi, float),
        np.asarray(params.u_tilde, float), np.asarray(params.log_sigma, float),
    ])


def parameter_names(J: int) -> list:
    return (
        ["alpha0"]
        + [f"beta[{c}]" for c in MEAN_COVARIATES]
        + ["gamma0"]
        + [f"psi[{c}]" for c in CONCENTRATION_COVARIATES]
        + [f"u_tilde[{j}]" for j in range(J)]
        + [f"log_sigma[{p}]" for p in POSITIONS]
    )


class Evaluation(NamedTuple):
    value: float
    gradient: np.ndarray | None
    overflow: bool


def _log_half_t_norm(df, scale):
    return (
        math.log(2.0) + math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
        - 0.5 * math.log(df * math.pi) - math.log(scale)
    )


class TurnAngleModel:
    """Log-posterior of the turn-angle mixed model over a fixed dataset.

    Instances are immutable after construction and safe to share between
    threads.
    """

    def __init__(self, data: ModelDataset, priors: PriorConfig | None = None):
        self.data = data
        self.priors = priors or PriorConfig()
        self.J = data.J
        self.dim = dimension(self.J)
        self.names = parameter_names(self.J)
        self._pos = data.player_position
        self._group_onehot = np.eye(N_GROUPS)[self._pos]  # (J, 3)
        self._fixed_norm = -0.5 * math.log(2 * math.pi * self.priors.fixed_effect_sd ** 2)
        self._half_t_norm = _log_half_t_norm(self.priors.sigma_df, self.priors.sigma_scale)
        self._cos_phi = np.cos(data.phi)
        self._sin_phi = np.sin(data.phi)

    # -- pieces --------------------------------------------------------------

    def _linear_predictors(self, p: ParameterVector):
        d = self.data
        eta = p.alpha0 + d.x @ p.beta
        offset = p.player_effects(self._pos)
        log_kappa = p.gamma0 + d.z @ p.psi + offset[d.player_index]
        return eta, log_kappa

    def _prior_terms(self, p: ParameterVector, exact: bool):
        pr = self.priors
        fixed = np.concatenate([[p.alpha0], p.beta, [p.gamma0], p.psi])
        sd2 = pr.fixed_effect_sd ** 2
        nu, s = pr.sigma_df, pr.sigma_scale
        # log(sigma^2 / (nu s^2)) keeps both terms finite for huge sigma
        t = 2 * p.log_sigma - math.log(nu * s * s)
        half_t = self._half_t_norm - 0.5 * (nu + 1) * np.logaddexp(0.0, t)
        parts = [
            N_FIXED * self._fixed_norm,
            -0.5 * math.log(2 * math.pi) * self.J,
        ]
        terms = np.concatenate([-0.5 * fixed ** 2 / sd2, -0.5 * p.u_tilde ** 2, half_t, p.log_sigma])
        if exact:
            return math.fsum(parts + terms.tolist())
        return sum(parts) + float(terms.sum())

    # -- public --------------------------------------------------------------

    def evaluate(self, theta, gradient: bool = True, exact: bool = False) -> Evaluation:
        """Log-posterior (and gradient) at ``theta``.

        ``exact=True`` sums the likelihood terms with :func:`math.fsum`, which
        makes the value independent of row order. Returns ``-inf`` with
        ``overflow=True`` when any log-concentration exceeds the guard.
        """
        p = unpack(theta, self.J)
        if not np.all(np.isfinite(theta)):
            return Evaluation(-math.inf, None, True)
        d = self.data
        with np.errstate(over="ignore", invalid="ignore"):
            eta, log_kappa = self._linear_predictors(p)
        # also rejects nan from sigma overflowing
        if not np.all(log_kappa <= self.priors.log_kappa_max):
            return Evaluation(-math.inf, None, True)
        kappa = np.exp(log_kappa)
        # tan-half identities: cos/sin of phi - 2 atan(eta) without trig calls
        e2 = eta * eta
        inv = 1.0 / (1.0 + e2)
        one_m = 1.0 - e2
        two_e = 2.0 * eta
        cos_r = (self._cos_phi * one_m + self._sin_phi * two_e) * inv
        log_i0, ratio = _log_i0_and_ratio(kappa)
        terms = kappa * cos_r - log_i0
        if exact:
            loglik = math.fsum(terms.tolist()) - d.n_rows * LOG_TWO_PI
        else:
            loglik = float(terms.sum()) - d.n_rows * LOG_TWO_PI
        value = loglik + self._prior_terms(p, exact)
        if not math.isfinite(value):
            return Evaluation(-math.inf, None, True)
        if not gradient:
            return Evaluation(value, None, False)

        pr = self.priors
        sd2 = pr.fixed_effect_sd ** 2
        sin_r = (self._sin_phi * one_m - self._cos_phi * two_e) * inv
        g_eta = 2.0 * kappa * sin_r * inv
        g_lk = kappa * (cos_r - ratio)
        per_player = np.bincount(d.player_index, weights=g_lk, minlength=self.J)
        sigma = p.sigma
        sig_j = sigma[self._pos]
        grad = np.empty(self.dim)
        i = 0
        grad[i] = g_eta.sum() - p.alpha0 / sd2; i += 1
        grad[i:i + N_MEAN] = g_eta @ d.x - p.beta / sd2; i += N_MEAN
        grad[i] = g_lk.sum() - p.gamma0 / sd2; i += 1
        grad[i:i + N_CONC] = g_lk @ d.z - p.psi / sd2; i += N_CONC
        grad[i:i + self.J] = sig_j * per_player - p.u_tilde; i += self.J
        nu, s = pr.sigma_df, pr.sigma_scale
        d_prior = 1.0 - (nu + 1) * 0.5 * (1.0 + np.tanh(0.5 * (2 * p.log_sigma - math.log(nu * s * s))))
        grad[i:] = (p.u_tilde * sig_j * per_player) @ self._group_onehot + d_prior
        return Evaluation(value, grad, False)

    def log_density_and_gradient(self, theta):
        """Sampler hook: ``(value, gradient)``; gradient is ``None`` on overflow."""
        ev = self.evaluate(theta, gradient=True)
        return ev.value, ev.gradient

    __call__ = log_density_and_gradient

    def log_likelihood(self, theta, exact: bool = True) -> float:
        p = unpack(theta, self.J)
        eta, log_kappa = self._linear_predictors(p)
        return centered_log_likelihood_from_predictors(self.data.phi, eta, log_kappa, self.priors, exact)


def centered_log_likelihood_from_predictors(phi, eta, log_kappa, priors=None, exact=True):
    priors = priors or PriorConfig()
    if not np.all(log_kappa <= priors.log_kappa_max):
        return -math.inf
    kappa = np.exp(log_kappa)
    log_i0, _ = _log_i0_and_ratio(kappa)
    terms = kappa * np.cos(phi - 2.0 * np.arctan(eta)) - log_i0
    total = math.fsum(terms.tolist()) if exact else float(terms.sum())
    return total - len(phi) * LOG_TWO_PI


def centered_log_likelihood(data: ModelDataset, alpha0, beta, gamma0, psi, u, priors=None) -> float:
    """Likelihood written directly in terms of the centred effects ``u``."""
    eta = alpha0 + data.x @ np.asarray(beta, float)
    log_kappa = gamma0 + data.z @ np.asarray(psi, float) + np.asarray(u, float)[data.player_index]
    return centered_log_likelihood_from_predictors(data.phi, eta, log_kappa, priors)


def log_posterior(theta, data: ModelDataset, priors: PriorConfig | None = None) -> float:
    """Joint log-posterior with order-independent summation; ``-inf`` on overflow."""
    return TurnAngleModel(data, priors).evaluate(theta, gradient=False, exact=True).value


def log_posterior_gradient(theta, data: ModelDataset, priors: PriorConfig | None = None) -> np.ndarray:
    ev = TurnAngleModel(data, priors).evaluate(theta, gradient=True)
    if ev.overflow:
        return np.full(dimension(data.J), np.nan)
    return ev.gradient

