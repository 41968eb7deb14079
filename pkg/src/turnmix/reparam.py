"""Sampling coordinates for the turn-angle model.

NUTS does not run on ``theta`` directly. Three exact changes of variables
are stacked, and draws are mapped back afterwards:

1. covariate scaling: slopes are expressed per standard deviation of their
   column and intercepts at the column means;
2. centring: a player whose rows pin down ``u_j`` better than the prior
   does is sampled as ``u_j = sigma_p * u_tilde_j`` (adding
   ``-log sigma_p[j]`` for the Jacobian); weakly informed players keep
   ``u_tilde_j``, which avoids the funnel at small ``sigma_p``;
3. whitening: ``eta = mode + L q`` with ``L L^T`` the inverse Hessian of
   the negative log density at its mode, so the sampler sees roughly unit,
   uncorrelated scales from its first iteration.

All three maps are smooth bijections, so the posterior over ``theta`` is
untouched; only the geometry the sampler sees changes.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import optimize

from .model import N_CONC, N_FIXED, N_GROUPS, N_MEAN, TurnAngleModel

log = logging.getLogger(__name__)

_MIN_CURVATURE = 1e-3
_SIGMA_FLOOR = 0.05
_CENTER_CURVATURE = 5.0

_A0 = 0
_B = slice(1, 1 + N_MEAN)
_G0 = 1 + N_MEAN
_P = slice(2 + N_MEAN, 2 + N_MEAN + N_CONC)


def column_moments(a):
    """Column means and standard deviations; constant columns are left untouched."""
    mean = a.mean(axis=0)
    scale = a.std(axis=0)
    flat = scale < 1e-12
    mean[flat] = 0.0
    scale[flat] = 1.0
    return mean, scale


class SamplingTransform:
    """Maps between sampler coordinates ``q`` and model parameters ``theta``."""

    def __init__(self, model: TurnAngleModel, centered: bool = True):
        self.model = model
        self.dim = model.dim
        self.J = model.J
        self.centered = centered
        self.pos = model.data.player_position
        self.n_per_group = np.bincount(self.pos, minlength=N_GROUPS).astype(float)
        self.x_mean, self.x_scale = column_moments(model.data.x)
        self.z_mean, self.z_scale = column_moments(model.data.z)
        self._u = slice(N_FIXED, N_FIXED + self.J)
        self._ls = slice(N_FIXED + self.J, N_FIXED + self.J + N_GROUPS)
        self.center_mask = np.full(self.J, bool(centered))
        self.center = np.zeros(self.dim)
        self.factor = np.eye(self.dim)

    # -- eta <-> theta ---------------------------------------------------------

    def _mask(self, centered):
        if centered is None:
            return self.center_mask
        return np.full(self.J, bool(centered))

    def eta_to_theta(self, eta, centered=None) -> np.ndarray:
        mask = self._mask(centered)
        eta = np.asarray(eta, dtype=float)
        th = eta.copy()
        if mask.any():
            with np.errstate(over="ignore"):
                scale = np.where(mask, np.exp(-eta[..., self._ls])[..., self.pos], 1.0)
            th[..., self._u] = eta[..., self._u] * scale
        th[..., _B] = eta[..., _B] / self.x_scale
        th[..., _A0] = eta[..., _A0] - th[..., _B] @ self.x_mean
        th[..., _P] = eta[..., _P] / self.z_scale
        th[..., _G0] = eta[..., _G0] - th[..., _P] @ self.z_mean
        return th

    def theta_to_eta(self, theta, centered=None) -> np.ndarray:
        mask = self._mask(centered)
        theta = np.asarray(theta, dtype=float)
        eta = theta.copy()
        eta[..., _A0] = theta[..., _A0] + theta[..., _B] @ self.x_mean
        eta[..., _B] = theta[..., _B] * self.x_scale
        eta[..., _G0] = theta[..., _G0] + theta[..., _P] @ self.z_mean
        eta[..., _P] = theta[..., _P] * self.z_scale
        if mask.any():
            scale = np.where(mask, np.exp(theta[..., self._ls])[..., self.pos], 1.0)
            eta[..., self._u] = theta[..., self._u] * scale
        return eta

    def log_density_eta(self, eta, centered=None):
        """``(value, gradient)`` in eta coordinates, Jacobian included."""
        mask = self._mask(centered)
        theta = self.eta_to_theta(eta, centered)
        ev = self.model.evaluate(theta, gradient=True)
        if ev.overflow:
            return -math.inf, None
        g = ev.gradient
        out = g.copy()
        out[_B] = (g[_B] - g[_A0] * self.x_mean) / self.x_scale
        out[_P] = (g[_P] - g[_G0] * self.z_mean) / self.z_scale
        value = ev.value
        if mask.any():
            ls = eta[self._ls]
            n_centered = np.bincount(self.pos[mask], minlength=N_GROUPS)
            value -= float(ls @ n_centered)
            with np.errstate(over="ignore"):
                out[self._u][mask] = g[self._u][mask] / np.exp(ls)[self.pos[mask]]
            pull = np.bincount(self.pos, weights=np.where(mask, g[self._u] * theta[self._u], 0.0), minlength=N_GROUPS)
            out[self._ls] = g[self._ls] - pull - n_centered
        return value, out

    # -- q <-> eta -------------------------------------------------------------

    def q_to_theta(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.eta_to_theta(self.center + q @ self.factor.T)

    def theta_to_q(self, theta) -> np.ndarray:
        eta = self.theta_to_eta(theta)
        return np.linalg.solve(self.factor, (eta - self.center).T).T

    def __call__(self, q):
        value, g = self.log_density_eta(self.center + self.factor @ q)
        if g is None:
            return value, None
        return value, self.factor.T @ g

    # -- whitening -------------------------------------------------------------

    def find_mode(self, start=None, max_iter: int = 5000) -> np.ndarray:
        """A central point of the posterior in eta coordinates, or ``None``.

        The joint mode is a poor anchor for hierarchical models: with
        centred effects the density is unbounded as ``sigma -> 0`` and all
        ``u -> 0``, and with non-centred ones the mode drifts to large
        ``sigma``. Instead: (1) L-BFGS with non-centred effects from the
        origin, which pins down the fixed effects and ``u``; (2) set each
        ``sigma_p`` to the root mean square of its group's ``u`` and centre
        the players whose likelihood curvature in ``u_j`` exceeds the prior's
        ``1 / sigma_p^2``; (3) with ``sigma`` held there, Newton steps for
        everything else.
        """
        def neg(eta):
            v, g = self.log_density_eta(eta, centered=False)
            if g is None:
                return math.inf, np.zeros(self.dim)
            return -v, -g

        x0 = np.zeros(self.dim) if start is None else np.asarray(start, dtype=float)
        res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B", options={"maxiter": max_iter})
        if not np.all(np.isfinite(res.x)) or not math.isfinite(res.fun):
            log.warning("mode search failed (%s); whitening skipped", res.message)
            return None
        log.debug("mode search: %s after %d iterations", res.message, res.nit)
        theta = self.eta_to_theta(res.x, centered=False)
        u = theta[self._u] * np.exp(theta[self._ls])[self.pos]
        rms = np.sqrt(np.bincount(self.pos, weights=u * u, minlength=N_GROUPS) / np.maximum(self.n_per_group, 1))
        theta[self._ls] = np.log(np.clip(rms, _SIGMA_FLOOR, None))
        theta[self._u] = u / np.exp(theta[self._ls])[self.pos]
        if self.centered:
            self.center_mask = self._informed_players(self.theta_to_eta(theta, centered=False))
        return self._newton(self.theta_to_eta(theta))

    def _informed_players(self, eta, step: float = 1e-5) -> np.ndarray:
        """Non-centred curvature in ``u_tilde_j`` is ``1 + sigma^2 I_j``; centre where ``I_j sigma^2 >= 1``."""
        curvature = np.empty(self.J)
        for k, i in enumerate(range(self._u.start, self._u.stop)):
            e = np.zeros(self.dim)
            e[i] = step
            _, gp = self.log_density_eta(eta + e, centered=False)
            _, gm = self.log_density_eta(eta - e, centered=False)
            if gp is None or gm is None:
                return np.ones(self.J, dtype=bool)
            curvature[k] = -(gp[i] - gm[i]) / (2 * step)
        return curvature >= _CENTER_CURVATURE

    def _newton(self, x, steps: int = 30, tol: float = 1e-6):
        """Maximise over every coordinate except the log-sigmas."""
        free = np.ones(self.dim, dtype=bool)
        free[self._ls] = False
        value, g = self.log_density_eta(x)
        if g is None:
            return x
        g = np.where(free, g, 0.0)
        for _ in range(steps):
            if np.max(np.abs(g)) < tol:
                break
            try:
                H = self.hessian(x)
            except FloatingPointError:
                break
            w, V = np.linalg.eigh(H[np.ix_(free, free)])
            direction = np.zeros(self.dim)
            direction[free] = V @ ((V.T @ g[free]) / np.maximum(np.abs(w), _MIN_CURVATURE))
            t = 1.0
            while t > 1e-8:
                cand = x + t * direction
                v, gc = self.log_density_eta(cand)
                if gc is not None and v >= value:
                    break
                t *= 0.5
            else:
                break
            x, value, g = cand, v, np.where(free, gc, 0.0)
        return x

    def hessian(self, eta, step: float = 1e-5, centered=None) -> np.ndarray:
        """Negative Hessian of the log density by central differences of the gradient."""
        H = np.empty((self.dim, self.dim))
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = step
            _, gp = self.log_density_eta(eta + e, centered)
            _, gm = self.log_density_eta(eta - e, centered)
            if gp is None or gm is None:
                raise FloatingPointError("gradient overflow while estimating curvature")
            H[i] = -(gp - gm) / (2 * step)
        return 0.5 * (H + H.T)

    def whiten(self, start=None) -> bool:
        """Set ``center``/``factor`` from a Laplace approximation. Returns success."""
        mode = self.find_mode(start)
        if mode is None:
            return False
        try:
            H = self.hessian(mode)
        except FloatingPointError:
            return False
        w, V = np.linalg.eigh(H)
        # non-convex directions get a unit scale, flat ones at most the prior scale
        floor = 1.0 / self.model.priors.fixed_effect_sd ** 2
        w = np.where(w > 0, np.maximum(w, floor), 1.0)
        # covariance V diag(1/w) V^T = (V diag(w^-1/2)) (V diag(w^-1/2))^T
        self.center = mode
        self.factor = V / np.sqrt(w)
        return True

    def describe(self) -> dict:
        return {
            "centered_random_effects": self.centered,
            "centered_players": int(self.center_mask.sum()),
            "whitened": not np.array_equal(self.factor, np.eye(self.dim)),
            "x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist(),
            "z_mean": self.z_mean.tolist(), "z_scale": self.z_scale.tolist(),
        }
