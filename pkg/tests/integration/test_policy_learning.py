"""Policy improvement against a hand-wired critic, and temperature control."""

import math

import numpy as np
import pytest

from omad.diffusion import ScoreNetwork, ScorePolicy, cosine_schedule, sample_action
from omad.ndiff import tensor as T
from omad.ndiff.optim import Adam
from omad.ndiff.tensor import no_grad
from omad.trainer import TemperatureState, synchronized_policy_loss, update_temperature

A_STAR = 0.5


def bowl(s, a):
    d = a - A_STAR
    return -(d * d).sum(axis=1)


def one_dim_policy(seed, hidden=(32, 32), H=4, beta_max=2.0):
    net = ScoreNetwork(1, 1, np.random.default_rng(seed), "agent0.score", hidden=hidden, time_dim=8,
                       input_norm=False)
    return ScorePolicy(0, net, cosine_schedule(H, 0.1, beta_max), 1)


def test_policy_loss_gradient_matches_finite_differences(numeric_grad, relative_error):
    policy = one_dim_policy(0, hidden=(6,), H=2, beta_max=1.5)
    states = np.linspace(-1, 1, 5).reshape(5, 1)

    def loss():
        value, _ = synchronized_policy_loss(states, [policy], bowl, 0.7, np.random.default_rng(11))
        return value

    policy.zero_grad()
    T.backward(loss())
    for p in policy.parameters():
        assert relative_error(p.grad, numeric_grad(loss, p)) < 1e-4, p.name


@pytest.mark.slow
def test_quadratic_bowl_pulls_actions_to_optimum():
    policy = one_dim_policy(1)
    optim = Adam(policy.parameters(), lr=3e-3)
    rng = np.random.default_rng(2)
    states = np.zeros((64, 1))
    for _ in range(2000):
        loss, _ = synchronized_policy_loss(states, [policy], bowl, 0.1, rng)
        optim.zero_grad()
        T.backward(loss)
        optim.step()
    with no_grad():
        actions = sample_action(np.zeros((2000, 1)), policy, rng).actions()
    assert abs(actions.mean() - A_STAR) < 0.1


def test_temperature_settles_where_entropy_meets_target():
    temperature = TemperatureState(1.0, target_entropy=3.0)
    optimizer = Adam(temperature.parameters(), lr=0.01)
    for _ in range(3000):
        # a stand-in bound that grows with alpha, crossing the target at log alpha = 2.5
        elbo = temperature.target_entropy - 5.0 + 2.0 * math.log(temperature.alpha)
        update_temperature(np.array([elbo]), temperature, optimizer)
        assert temperature.alpha > 0.0
    assert math.log(temperature.alpha) == pytest.approx(2.5, abs=0.05)
