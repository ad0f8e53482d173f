"""Categorical critic: support, projection, Bellman target and loss."""

import copy

import numpy as np
import pytest

from omad.critic import (
    CriticNetwork,
    bellman_target,
    critic_forward_pair,
    critic_loss,
    project_to_support,
    q_mean,
    support_atoms,
)
from omad.errors import ConfigError, ShapeError
from omad.ndiff import tensor as T
from omad.ndiff.nn import Parameter


class TestSupport:
    def test_symmetric_grid(self):
        support = support_atoms(200.0, 101)
        np.testing.assert_array_equal(support.atoms, -support.atoms[::-1])
        assert support.atoms[50] == 0.0
        assert support.gap == pytest.approx(4.0)

    @pytest.mark.parametrize("v_max, n", [(10.0, 1), (0.0, 11), (-1.0, 11)])
    def test_rejects_degenerate_support(self, v_max, n):
        with pytest.raises(ConfigError):
            support_atoms(v_max, n)

    def test_q_mean(self):
        support = support_atoms(1.0, 3)
        assert q_mean(np.array([0.2, 0.3, 0.5]), support).item() == pytest.approx(0.3)


class TestProjection:
    def test_midpoint_splits_evenly(self):
        support = support_atoms(1.0, 3)
        out = project_to_support(np.array([[0.5, 0.5, 0.5]]), np.array([[0.2, 0.3, 0.5]]), support)
        np.testing.assert_allclose(out, [[0.0, 0.5, 0.5]], atol=1e-12)

    def test_exact_atom_keeps_mass(self):
        support = support_atoms(2.0, 5)
        out = project_to_support(support.atoms[None, :], np.full((1, 5), 0.2), support)
        np.testing.assert_allclose(out, np.full((1, 5), 0.2), atol=1e-12)

    def test_values_outside_support_clip_to_edges(self):
        support = support_atoms(1.0, 3)
        out = project_to_support(np.array([[-5.0, 0.0, 7.0]]), np.array([[0.3, 0.3, 0.4]]), support)
        np.testing.assert_allclose(out, [[0.3, 0.3, 0.4]], atol=1e-12)

    def test_randomized_mass_and_mean(self, rng):
        support = support_atoms(10.0, 21)
        for _ in range(1000):
            shifted = rng.uniform(-10.0, 10.0, size=(1, 21))
            probs = rng.dirichlet(np.ones(21))[None, :]
            out = project_to_support(shifted, probs, support)
            assert abs(out.sum() - 1.0) < 1e-12
            assert np.all(out >= 0.0)
            assert abs((out @ support.atoms).item() - (probs * shifted).sum()) < 1e-9

    def test_mean_is_monotone_in_the_shifted_atoms(self, rng):
        support = support_atoms(5.0, 11)
        for _ in range(500):
            probs = rng.dirichlet(np.ones(11))[None, :]
            lower = rng.uniform(-8.0, 8.0, size=(1, 11))
            upper = lower + rng.exponential(1.0, size=(1, 11)) * (rng.random((1, 11)) < 0.5)
            before = (project_to_support(lower, probs, support) @ support.atoms).item()
            after = (project_to_support(upper, probs, support) @ support.atoms).item()
            assert (probs * upper).sum() >= (probs * lower).sum()
            assert after >= before - 1e-12

    def test_mean_tracks_a_common_shift_past_the_edges(self, rng):
        support = support_atoms(5.0, 11)
        probs = rng.dirichlet(np.ones(11))[None, :]
        base = rng.uniform(-3.0, 3.0, size=(1, 11))
        offsets = np.linspace(-12.0, 12.0, 97)
        means = np.array([(project_to_support(base + c, probs, support) @ support.atoms).item() for c in offsets])
        assert np.all(np.diff(means) >= -1e-12)
        assert means[0] == pytest.approx(-5.0) and means[-1] == pytest.approx(5.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            project_to_support(np.zeros((2, 3)), np.zeros((2, 4)), support_atoms(1.0, 3))


class TestBellmanTarget:
    def test_shift_with_entropy_bonus(self):
        support = support_atoms(1.0, 3)
        shifted, probs = bellman_target(
            np.array([0.5]), np.array([False]), np.array([[0.1, 0.2, 0.7]]), support,
            gamma=0.9, alpha=0.5, elbo_sum=np.array([0.2]),
        )
        np.testing.assert_allclose(shifted, [[0.5 + 0.9 * (z + 0.1) for z in (-1.0, 0.0, 1.0)]])
        np.testing.assert_array_equal(probs, [[0.1, 0.2, 0.7]])

    def test_terminal_rows_collapse_to_reward(self):
        support = support_atoms(1.0, 3)
        shifted, _ = bellman_target(
            np.array([0.3, 0.3]), np.array([True, False]), np.full((2, 3), 1 / 3), support,
            gamma=0.99, alpha=1.0, elbo_sum=np.array([4.0, 0.0]),
        )
        np.testing.assert_allclose(shifted[0], 0.3)
        assert not np.allclose(shifted[1], 0.3)


class TestCriticLoss:
    def test_cross_entropy_of_point_mass(self):
        pred = T.Tensor(np.array([[0.25, 0.75]]))
        loss = critic_loss(pred, np.array([[0.0, 1.0]]), xi=0.0)
        assert loss.item() == pytest.approx(-np.log(0.75))

    def test_entropy_term(self):
        p = np.array([[0.25, 0.75]])
        loss = critic_loss(T.Tensor(p), p, xi=0.5)
        h = -(p * np.log(p)).sum()
        assert loss.item() == pytest.approx(1.5 * h)

    def test_zero_probability_is_floored(self):
        loss = critic_loss(T.Tensor(np.array([[0.0, 1.0]])), np.array([[1.0, 0.0]]), xi=0.0)
        assert loss.item() == pytest.approx(-np.log(1e-12))

    def test_gradient_matches_finite_differences(self, rng, numeric_grad, relative_error):
        logits = Parameter(rng.normal(size=(3, 5)), "logits")
        target = rng.dirichlet(np.ones(5), size=3)

        def loss():
            return critic_loss(T.softmax(logits, axis=-1), target, xi=0.005)

        logits.zero_grad()
        T.backward(loss())
        assert relative_error(logits.grad, numeric_grad(loss, logits)) < 1e-6

    def test_gradient_through_the_network(self, rng, numeric_grad):
        critic = CriticNetwork(1, 1, support_atoms(1.0, 2), rng, hidden=(4,))
        s, a = rng.normal(size=(5, 1)), rng.normal(size=(5, 1))
        target = rng.dirichlet(np.ones(2), size=5)

        def loss():
            return critic_loss(critic.distribution(s, a), target, xi=0.005)

        critic.zero_grad()
        T.backward(loss())
        for p in critic.parameters():
            np.testing.assert_allclose(p.grad, numeric_grad(loss, p), rtol=1e-5, atol=1e-8, err_msg=p.name)


class TestCriticNetwork:
    def make(self, rng):
        return CriticNetwork(4, 2, support_atoms(5.0, 11), rng, hidden=(8, 8))

    def test_distribution_rows_sum_to_one(self, rng):
        critic = self.make(rng)
        probs = critic.distribution(rng.normal(size=(6, 4)), rng.normal(size=(6, 2)))
        assert probs.shape == (6, 11)
        np.testing.assert_allclose(probs.data.sum(axis=1), 1.0)

    def test_pair_forward_shares_one_batch(self, rng):
        critic = self.make(rng).eval()
        s, a = rng.normal(size=(3, 4)), rng.normal(size=(3, 2))
        s2, a2 = rng.normal(size=(3, 4)), rng.normal(size=(3, 2))
        pred, boot = critic_forward_pair(critic, s, a, s2, a2)
        np.testing.assert_allclose(pred.data, critic.distribution(s, a).data)
        np.testing.assert_allclose(boot.data, critic.distribution(s2, a2).data)

    def test_training_pair_normalizes_over_both_halves(self, rng):
        critic = self.make(rng)
        twin = copy.deepcopy(critic)
        bn = critic.input_norm
        m0 = bn.current_momentum()
        s, a = rng.normal(size=(5, 4)), rng.normal(size=(5, 2))
        s2, a2 = rng.normal(loc=2.0, size=(5, 4)), rng.normal(loc=-1.0, size=(5, 2))
        pred, boot = critic_forward_pair(critic, s, a, s2, a2)

        rows = np.vstack([np.hstack([s, a]), np.hstack([s2, a2])])
        np.testing.assert_allclose(bn.running_mean, (1.0 - m0) * rows.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(bn.running_var, m0 + (1.0 - m0) * rows.var(axis=0), rtol=1e-12)
        assert bn.step_count == 1
        joint = twin.distribution(np.vstack([s, s2]), np.vstack([a, a2])).data
        np.testing.assert_array_equal(np.vstack([pred.data, boot.data]), joint)

    def test_eval_outputs_repeat_bitwise(self, rng):
        critic = self.make(rng)
        for _ in range(3):
            critic.distribution(rng.normal(size=(6, 4)), rng.normal(size=(6, 2)))
        critic.eval()
        s, a = rng.normal(size=(4, 4)), rng.normal(size=(4, 2))
        s2, a2 = rng.normal(size=(4, 4)), rng.normal(size=(4, 2))
        first = critic_forward_pair(critic, s, a, s2, a2)
        second = critic_forward_pair(critic, s, a, s2, a2)
        for x, y in zip(first, second):
            np.testing.assert_array_equal(x.data, y.data)
        np.testing.assert_array_equal(critic.q_values(s, a).data, critic.q_values(s, a).data)

    def test_pair_forward_shape_mismatch(self, rng):
        critic = self.make(rng)
        with pytest.raises(ShapeError):
            critic_forward_pair(critic, np.zeros((3, 4)), np.zeros((3, 2)), np.zeros((2, 4)), np.zeros((2, 2)))

    def test_wrong_action_width(self, rng):
        with pytest.raises(ShapeError):
            self.make(rng).logits(np.zeros((2, 4)), np.zeros((2, 3)))
