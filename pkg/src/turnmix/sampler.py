"""No-U-Turn Sampler with staged warmup adaptation.

Multinomial trajectory sampling with the generalised U-turn criterion
(including the extra checks across merged sub-trees), a diagonal Euclidean
metric, dual-averaging step-size adaptation and windowed variance
estimation during warmup.

The target is any callable ``f(q) -> (log_density, gradient)``; it may return
``(-inf, None)`` to signal an invalid point, which is treated as a divergence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InitializationError, InvalidArgumentError

log = logging.getLogger(__name__)

MAX_DELTA_H = 1000.0
INIT_RETRIES = 100


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    iterations: int = 3500
    warmup: int = 1500
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    init_radius: float = 2.0

    def __post_init__(self):
        if self.chains < 1:
            raise InvalidArgumentError("need at least one chain")
        if not (0 <= self.warmup < self.iterations):
            raise InvalidArgumentError("warmup must be smaller than iterations")
        if not (0 < self.target_accept < 1):
            raise InvalidArgumentError("target_accept must lie in (0, 1)")
        if self.max_tree_depth < 1:
            raise InvalidArgumentError("max_tree_depth must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")

    @property
    def draws_per_chain(self) -> int:
        return self.iterations - self.warmup

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PosteriorDraws:
    """Post-warmup draws, shape ``(chains, draws_per_chain, dim)``."""

    draws: np.ndarray
    names: list
    warmup: int = 0
    divergences: np.ndarray = None
    tree_depth: np.ndarray = None
    accept_stat: np.ndarray = None
    n_leapfrog: np.ndarray = None
    step_size: np.ndarray = None
    inv_metric: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 3 or self.draws.shape[2] != len(self.names):
            raise InvalidArgumentError("draws must be (chains, iterations, len(names))")
        c, n, _ = self.draws.shape
        if self.divergences is None:
            self.divergences = np.zeros((c, n), dtype=bool)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    def __getitem__(self, name) -> np.ndarray:
        """Draws of one parameter as ``(chains, iterations)``."""
        try:
            return self.draws[:, :, self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def divergence_count(self) -> np.ndarray:
        return self.divergences.sum(axis=1)

    def tree_depth_histogram(self) -> dict:
        if self.tree_depth is None:
            return {}
        depth, count = np.unique(self.tree_depth, return_counts=True)
        return {int(d): int(c) for d, c in zip(depth, count)}


# -- adaptation ---------------------------------------------------------------


class DualAveraging:
    """Step-size adaptation toward a target mean acceptance statistic."""

    def __init__(self, delta=0.8, gamma=0.05, kappa=0.75, t0=10.0):
        self.delta, self.gamma, self.kappa, self.t0 = delta, gamma, kappa, t0
        self.mu = 0.0
        self.restart()

    def restart(self, step_size=None):
        self.counter = 0
        self.s_bar = 0.0
        self.x_bar = 0.0
        if step_size is not None:
            self.mu = math.log(10 * step_size)

    def update(self, accept_stat: float) -> float:
        self.counter += 1
        accept_stat = min(1.0, accept_stat)
        eta = 1.0 / (self.counter + self.t0)
        self.s_bar = (1 - eta) * self.s_bar + eta * (self.delta - accept_stat)
        x = self.mu - self.s_bar * math.sqrt(self.counter) / self.gamma
        w = self.counter ** (-self.kappa)
        self.x_bar = (1 - w) * self.x_bar + w * x
        return math.exp(x)

    def final(self) -> float:
        return math.exp(self.x_bar)


class WindowedVariance:
    """Staged warmup schedule: fast buffer, doubling slow windows, fast buffer."""

    def __init__(self, dim, n_warmup, init_buffer=75, term_buffer=50, base_window=25):
        self.n_warmup = n_warmup
        if n_warmup < 20:
            self.enabled = False
            return
        self.enabled = True
        if init_buffer + base_window + term_buffer > n_warmup:
            init_buffer = int(0.15 * n_warmup)
            term_buffer = int(0.1 * n_warmup)
            base_window = n_warmup - (init_buffer + term_buffer)
        self.init_buffer, self.term_buffer = init_buffer, term_buffer
        self.window_size = base_window
        self.counter = 0
        self.next_window = init_buffer + base_window - 1
        self._reset_estimator(dim)

    def _reset_estimator(self, dim):
        self._n = 0
        self._mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    def _in_window(self):
        return self.init_buffer <= self.counter < self.n_warmup - self.term_buffer and self.counter != self.n_warmup

    def _end_of_window(self):
        return self.counter == self.next_window and self.counter != self.n_warmup

    def _advance_window(self):
        last = self.n_warmup - self.term_buffer - 1
        if self.next_window == last:
            return
        self.window_size *= 2
        self.next_window = self.counter + self.window_size
        if self.next_window != last and self.next_window + 2 * self.window_size >= self.n_warmup - self.term_buffer:
            self.next_window = last

    def observe(self, q):
        """Feed one warmup draw; returns a new inverse metric at window ends."""
        if not self.enabled:
            return None
        if self._in_window():
            self._n += 1
            delta = q - self._mean
            self._mean += delta / self._n
            self._m2 += delta * (q - self._mean)
        if self._end_of_window():
            self._advance_window()
            n = self._n
            var = self._m2 / max(n - 1, 1)
            var = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            self._reset_estimator(q.shape[0])
            self.counter += 1
            return var
        self.counter += 1
        return None


# -- trajectory ---------------------------------------------------------------


class _State:
    __slots__ = ("q", "p", "logp", "grad")

    def __init__(self, q, p, logp, grad):
        self.q, self.p, self.logp, self.grad = q, p, logp, grad


def _logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = max(a, b)
    return m + math.log1p(math.exp(-abs(a - b)))


class _Chain:
    def __init__(self, target, dim, inv_metric, rng, max_depth):
        self.target = target
        self.dim = dim
        self.inv_metric = inv_metric
        self.rng = rng
        self.max_depth = max_depth
        self.step_size = 1.0

    # kinetic energy and its momentum gradient
    def _kinetic(self, p):
        return 0.5 * float(np.dot(p * self.inv_metric, p))

    def _hamiltonian(self, s: _State):
        if s.grad is None or not math.isfinite(s.logp):
            return math.inf
        return -s.logp + self._kinetic(s.p)

    def _sample_momentum(self):
        return self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)

    def leapfrog(self, s: _State, eps: float) -> _State:
        p = s.p + 0.5 * eps * s.grad
        q = s.q + eps * self.inv_metric * p
        logp, grad = self.target(q)
        if grad is None or not math.isfinite(logp) or not np.all(np.isfinite(grad)):
            return _State(q, p, -math.inf, None)
        p = p + 0.5 * eps * grad
        return _State(q, p, logp, grad)

    def find_initial_step_size(self, q, logp, grad):
        eps = self.step_size
        s0 = _State(q, self._sample_momentum(), logp, grad)
        h0 = self._hamiltonian(s0)
        s1 = self.leapfrog(s0, eps)
        delta = h0 - self._hamiltonian(s1)
        direction = 1 if delta > math.log(0.8) else -1
        while True:
            s0 = _State(q, self._sample_momentum(), logp, grad)
            h0 = self._hamiltonian(s0)
            s1 = self.leapfrog(s0, eps)
            delta = h0 - self._hamiltonian(s1)
            if math.isnan(delta):
                delta = -math.inf
            if direction == 1 and not delta > math.log(0.8):
                break
            if direction == -1 and not delta < math.log(0.8):
                break
            eps = eps * 2 if direction == 1 else eps / 2
            if eps > 1e7:
                raise InitializationError("posterior appears improper: step size diverged")
            if eps == 0:
                raise InitializationError("no acceptably small step size found")
        self.step_size = eps

    @staticmethod
    def _no_u_turn(p_sharp_minus, p_sharp_plus, rho):
        return float(np.dot(p_sharp_plus, rho)) > 0 and float(np.dot(p_sharp_minus, rho)) > 0

    def _build_tree(self, s, depth, direction, h0, stats):
        """Returns (valid, end_state, proposal, log_w, rho, p_beg, p_end, ps_beg, ps_end)."""
        if depth == 0:
            s = self.leapfrog(s, direction * self.step_size)
            stats["n_leapfrog"] += 1
            h = self._hamiltonian(s)
            if math.isnan(h):
                h = math.inf
            if h - h0 > MAX_DELTA_H:
                stats["divergent"] = True
                return (False,) + (None,) * 8
            log_w = h0 - h
            stats["sum_metro"] += 1.0 if log_w > 0 else math.exp(log_w)
            p_sharp = self.inv_metric * s.p
            return True, s, s, log_w, s.p.copy(), s.p, s.p, p_sharp, p_sharp

        init = self._build_tree(s, depth - 1, direction, h0, stats)
        if not init[0]:
            return init
        _, s, prop_init, lw_init, rho_init, p_beg, p_init_end, ps_beg, ps_init_end = init
        final = self._build_tree(s, depth - 1, direction, h0, stats)
        if not final[0]:
            return final
        _, s, prop_final, lw_final, rho_final, p_final_beg, p_end, ps_final_beg, ps_end = final

        lw = _logaddexp(lw_init, lw_final)
        if lw_final > lw or self.rng.uniform() < math.exp(lw_final - lw):
            proposal = prop_final
        else:
            proposal = prop_init
        rho = rho_init + rho_final
        ok = (
            self._no_u_turn(ps_beg, ps_end, rho)
            and self._no_u_turn(ps_beg, ps_final_beg, rho_init + p_final_beg)
            and self._no_u_turn(ps_init_end, ps_end, rho_final + p_init_end)
        )
        return ok, s, proposal, lw, rho, p_beg, p_end, ps_beg, ps_end

    def transition(self, q, logp, grad):
        p0 = self._sample_momentum()
        s0 = _State(q, p0, logp, grad)
        h0 = self._hamiltonian(s0)
        fwd = bck = s0
        sample = s0
        ps0 = self.inv_metric * p0
        p_fwd_bck = p_fwd_fwd = p_bck_fwd = p_bck_bck = p0
        ps_fwd_bck = ps_fwd_fwd = ps_bck_fwd = ps_bck_bck = ps0
        rho = p0.copy()
        log_w = 0.0
        stats = {"n_leapfrog": 0, "sum_metro": 0.0, "divergent": False}
        depth = 0
        while depth < self.max_depth:
            if self.rng.uniform() > 0.5:
                rho_bck = rho
                p_bck_fwd, ps_bck_fwd = p_fwd_fwd, ps_fwd_fwd
                res = self._build_tree(fwd, depth, 1, h0, stats)
                if not res[0]:
                    break
                _, fwd, proposal, lw_sub, rho_fwd, p_fwd_bck, p_fwd_fwd, ps_fwd_bck, ps_fwd_fwd = res
            else:
                rho_fwd = rho
                p_fwd_bck, ps_fwd_bck = p_bck_bck, ps_bck_bck
                res = self._build_tree(bck, depth, -1, h0, stats)
                if not res[0]:
                    break
                _, bck, proposal, lw_sub, rho_bck, p_bck_fwd, p_bck_bck, ps_bck_fwd, ps_bck_bck = res
            depth += 1
            if lw_sub > log_w or self.rng.uniform() < math.exp(lw_sub - log_w):
                sample = proposal
            log_w = _logaddexp(log_w, lw_sub)
            rho = rho_bck + rho_fwd
            ok = (
                self._no_u_turn(ps_bck_bck, ps_fwd_fwd, rho)
                and self._no_u_turn(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck)
                and self._no_u_turn(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd)
            )
            if not ok:
                break
        n = stats["n_leapfrog"]
        accept = stats["sum_metro"] / n if n else 0.0
        return sample, depth, n, accept, stats["divergent"]


# -- driver -------------------------------------------------------------------


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent counter-based stream for one chain."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain)])))


def _initial_point(target, dim, rng, radius, init=None):
    if init is not None:
        q = np.asarray(init, dtype=float).copy()
        logp, grad = target(q)
        if grad is not None and math.isfinite(logp) and np.all(np.isfinite(grad)):
            return q, logp, grad
        raise InitializationError("supplied initial point has a non-finite log density")
    for _ in range(INIT_RETRIES):
        q = rng.uniform(-radius, radius, dim)
        logp, grad = target(q)
        if grad is not None and math.isfinite(logp) and np.all(np.isfinite(grad)):
            return q, logp, grad
    raise InitializationError(f"no finite starting point after {INIT_RETRIES} attempts")


def run_chain(target, dim, config: SamplerConfig, chain: int, init=None):
    rng = chain_rng(config.seed, chain)
    q, logp, grad = _initial_point(target, dim, rng, config.init_radius, init)
    sampler = _Chain(target, dim, np.ones(dim), rng, config.max_tree_depth)
    n_keep = config.draws_per_chain
    out = np.empty((n_keep, dim))
    depth = np.empty(n_keep, dtype=np.int16)
    n_leap = np.empty(n_keep, dtype=np.int32)
    accept = np.empty(n_keep)
    divergent = np.zeros(n_keep, dtype=bool)
    warmup_divergences = 0

    if config.warmup > 0:
        sampler.find_initial_step_size(q, logp, grad)
    adapt = DualAveraging(delta=config.target_accept)
    adapt.restart(sampler.step_size)
    windows = WindowedVariance(dim, config.warmup)

    for it in range(config.iterations):
        state, d, n, a, div = sampler.transition(q, logp, grad)
        q, logp, grad = state.q, state.logp, state.grad
        if it < config.warmup:
            warmup_divergences += div
            sampler.step_size = adapt.update(a)
            new_metric = windows.observe(q)
            if new_metric is not None:
                sampler.inv_metric = new_metric
                sampler.find_initial_step_size(q, logp, grad)
                adapt.restart(sampler.step_size)
            if it == config.warmup - 1:
                sampler.step_size = adapt.final()
            continue
        k = it - config.warmup
        out[k], depth[k], n_leap[k], accept[k], divergent[k] = q, d, n, a, div
    log.debug("chain %d: step %.4g, %d divergences", chain, sampler.step_size, divergent.sum())
    return {
        "draws": out, "tree_depth": depth, "n_leapfrog": n_leap, "accept_stat": accept,
        "divergent": divergent, "step_size": sampler.step_size, "inv_metric": sampler.inv_metric,
        "warmup_divergences": warmup_divergences,
    }


def nuts_sample(target, dim: int, config: SamplerConfig | None = None, names=None, init=None) -> PosteriorDraws:
    """Run ``config.chains`` independent NUTS chains on ``target``.

    Results are deterministic given ``config.seed``; chains use separate
    Philox streams keyed by ``(seed, chain index)``.
    """
    config = config or SamplerConfig()
    names = list(names) if names is not None else [f"theta[{i}]" for i in range(dim)]
    if len(names) != dim:
        raise InvalidArgumentError("names must have one entry per dimension")
    results = [run_chain(target, dim, config, c, init) for c in range(config.chains)]
    return PosteriorDraws(
        draws=np.stack([r["draws"] for r in results]),
        names=names,
        warmup=config.warmup,
        divergences=np.stack([r["divergent"] for r in results]),
        tree_depth=np.stack([r["tree_depth"] for r in results]),
        accept_stat=np.stack([r["accept_stat"] for r in results]),
        n_leapfrog=np.stack([r["n_leapfrog"] for r in results]),
        step_size=np.array([r["step_size"] for r in results]),
        inv_metric=np.stack([r["inv_metric"] for r in results]),
        meta={
            "config": config.to_dict(),
            "warmup_divergences": [int(r["warmup_divergences"]) for r in results],
        },
    )
