import math

import numpy as np
import pytest

from turnmix.model import N_FIXED, TurnAngleModel
from turnmix.reparam import SamplingTransform, column_moments
from turnmix.simulate import simulate_dataset


@pytest.fixture(scope="module")
def transform():
    sim = simulate_dataset(players_per_position=(2, 2, 2), rows_per_player=60, seed=11)
    return SamplingTransform(TurnAngleModel(sim.data))


def fd(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_column_moments_leave_constant_columns():
    a = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    m, s = column_moments(a)
    assert m[1] == 0 and s[1] == 1
    assert m[0] == pytest.approx(2.0) and s[0] == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("centered", [True, False])
def test_eta_theta_round_trip(transform, centered):
    theta = np.random.default_rng(0).normal(0, 0.3, transform.dim)
    back = transform.eta_to_theta(transform.theta_to_eta(theta, centered), centered)
    np.testing.assert_allclose(back, theta, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("centered", [True, False])
def test_eta_gradient_matches_finite_differences(transform, centered):
    eta = transform.theta_to_eta(np.random.default_rng(1).normal(0, 0.05, transform.dim), centered)
    _, g = transform.log_density_eta(eta, centered)
    num = fd(lambda e: transform.log_density_eta(e, centered)[0], eta)
    np.testing.assert_allclose(g, num, rtol=1e-5, atol=1e-5 * np.max(np.abs(num)))


def test_jacobian_term(transform):
    # log p_eta(eta) = log p_theta(theta(eta)) + log|det d theta / d eta|
    theta = np.random.default_rng(2).normal(0, 0.05, transform.dim)
    eta = transform.theta_to_eta(theta)
    jac = np.empty((transform.dim, transform.dim))
    h = 1e-6
    for i in range(transform.dim):
        e = np.zeros(transform.dim)
        e[i] = h
        jac[:, i] = (transform.eta_to_theta(eta + e) - transform.eta_to_theta(eta - e)) / (2 * h)
    logdet = np.linalg.slogdet(jac)[1]
    value, _ = transform.log_density_eta(eta)
    base = transform.model.evaluate(theta, gradient=False).value
    # the linear covariate scaling has a constant Jacobian that the density omits
    const = -np.sum(np.log(transform.x_scale)) - np.sum(np.log(transform.z_scale))
    assert value == pytest.approx(base + logdet - const, rel=1e-8)


def test_whitening_and_q_round_trip():
    sim = simulate_dataset(players_per_position=(2, 2, 2), rows_per_player=60, seed=12)
    t = SamplingTransform(TurnAngleModel(sim.data))
    assert t.whiten()
    assert t.describe()["whitened"]
    theta = t.q_to_theta(np.random.default_rng(3).uniform(-2, 2, t.dim))
    np.testing.assert_allclose(t.q_to_theta(t.theta_to_q(theta)), theta, rtol=1e-9, atol=1e-9)
    q = np.random.default_rng(4).uniform(-1, 1, t.dim)
    _, g = t(q)
    num = fd(lambda v: t(v)[0], q)
    np.testing.assert_allclose(g, num, rtol=1e-5, atol=1e-5 * np.max(np.abs(num)))


def test_whitened_anchor_is_near_truth():
    sim = simulate_dataset(players_per_position=(3, 3, 3), rows_per_player=150, seed=13)
    t = SamplingTransform(TurnAngleModel(sim.data))
    t.whiten()
    theta = t.eta_to_theta(t.center)
    truth = sim.truth.parameter_vector(sim.u, sim.data.player_position).pack()
    assert abs(theta[N_FIXED - 6] - truth[N_FIXED - 6]) < 0.2  # speed slope


@pytest.fixture(scope="module")
def mixed():
    sim = simulate_dataset(players_per_position=(2, 2, 2), rows_per_player=60, seed=14)
    t = SamplingTransform(TurnAngleModel(sim.data))
    t.center_mask = np.arange(t.J) % 2 == 0
    return t


def test_mixed_centering_round_trip_and_gradient(mixed):
    theta = np.random.default_rng(5).normal(0, 0.3, mixed.dim)
    eta = mixed.theta_to_eta(theta)
    np.testing.assert_allclose(mixed.eta_to_theta(eta), theta, rtol=1e-12, atol=1e-12)
    _, g = mixed.log_density_eta(eta)
    num = fd(lambda e: mixed.log_density_eta(e)[0], eta)
    np.testing.assert_allclose(g, num, rtol=1e-5, atol=1e-5 * np.max(np.abs(num)))


def test_mixed_centering_jacobian(mixed):
    theta = np.random.default_rng(6).normal(0, 0.3, mixed.dim)
    eta = mixed.theta_to_eta(theta)
    # only centred players contribute -log sigma to the density
    ls = theta[N_FIXED + mixed.J:]
    shift = -float(ls[mixed.pos[mixed.center_mask]].sum())
    full = mixed.log_density_eta(eta)[0] - mixed.log_density_eta(mixed.theta_to_eta(theta, False), False)[0]
    assert full == pytest.approx(shift, rel=1e-10, abs=1e-10)


def test_weakly_informed_players_stay_non_centred():
    sim = simulate_dataset(players_per_position=(3, 3, 3), rows_per_player=5, seed=15)
    t = SamplingTransform(TurnAngleModel(sim.data))
    t.whiten()
    assert t.center_mask.sum() < t.J
    assert t.describe()["centered_players"] == int(t.center_mask.sum())
