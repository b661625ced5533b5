import numpy as np
import pytest

from apps.core.exceptions import ArgumentError, DimensionError
from apps.environments.spaces import BoxSpace, DiscreteSpace
from apps.environments.tabular import TabularDecPOMDP, additive_game
from apps.flows.fields import FieldKind
from apps.trainer.policies import PolicySet, agent_features
from apps.trainer.rollout_service import evaluate, execute


def _policies(action_space, *, n_agents=2, obs_dim=3, shared=True, zero=False, seed=0):
    policies = PolicySet.create(
        n_agents=n_agents,
        obs_dim=obs_dim,
        action_space=action_space,
        kind=FieldKind.CONDITIONAL_MEANFLOW,
        hidden_dims=(8,),
        activation="tanh",
        seeds=[seed + i for i in range(n_agents)],
        shared=shared,
    )
    if zero:
        policies = policies.with_fields([f.with_net(f.net.zeros_like()) for f in policies.fields])
    return policies


def _constant_reward_env(horizon):
    return TabularDecPOMDP(
        name="constant",
        n_agents=2,
        n_actions=2,
        transitions=np.ones((1, 2, 2, 1)),
        rewards=np.ones((1, 2, 2)),
        obs_map=np.zeros((2, 1), dtype=np.int64),
        initial=np.ones(1),
        horizon=horizon,
    )


class TestPolicySet:
    def test_agent_features_append_one_hot(self):
        np.testing.assert_array_equal(agent_features([0.5, 0.5], 1, 3, True), [0.5, 0.5, 0.0, 1.0, 0.0])
        np.testing.assert_array_equal(agent_features([[2.0]], 0, 2, True), [[2.0, 1.0, 0.0]])
        np.testing.assert_array_equal(agent_features([2.0], 0, 2, False), [2.0])

    def test_shared_has_one_field(self):
        assert len(_policies(BoxSpace(2)).fields) == 1
        assert len(_policies(BoxSpace(2), shared=False).fields) == 2

    def test_field_count_checked(self):
        policies = _policies(BoxSpace(2))
        with pytest.raises(ArgumentError):
            PolicySet(fields=policies.fields, n_agents=2, action_space=BoxSpace(2), shared=False)

    def test_agent_out_of_range(self):
        with pytest.raises(ArgumentError):
            _policies(BoxSpace(2)).slot(2)


class TestExecute:
    def test_zero_field_returns_clipped_normals(self):
        policies = _policies(BoxSpace(2), zero=True)
        actions = execute(policies, np.zeros((2, 3)), np.random.default_rng(7))
        draws = np.random.default_rng(7)
        expected = np.stack([draws.standard_normal((1, 2))[0] for _ in range(2)])
        np.testing.assert_array_equal(actions, np.clip(expected, -1.0, 1.0))

    def test_zero_field_discrete_is_argmax_of_normals(self):
        policies = _policies(DiscreteSpace(3), zero=True)
        actions = execute(policies, np.zeros((2, 3)), np.random.default_rng(8))
        draws = np.random.default_rng(8)
        expected = [np.argmax(draws.standard_normal((1, 3))[0]) for _ in range(2)]
        np.testing.assert_array_equal(np.argmax(actions, axis=1), expected)
        np.testing.assert_array_equal(actions.sum(axis=1), [1.0, 1.0])

    def test_per_agent_streams_are_deterministic(self):
        policies = _policies(BoxSpace(2), shared=False)
        obs = np.random.default_rng(0).normal(size=(2, 3))
        first = execute(policies, obs, [np.random.default_rng(s) for s in (1, 2)])
        second = execute(policies, obs, [np.random.default_rng(s) for s in (1, 2)])
        np.testing.assert_array_equal(first, second)

    @pytest.mark.parametrize("shared", [True, False])
    def test_only_local_observations_are_read(self, shared):
        policies = _policies(BoxSpace(2), shared=shared)
        obs = np.random.default_rng(0).normal(size=(2, 3))
        corrupted = obs.copy()
        corrupted[1] = 1e6
        clean = execute(policies, obs, [np.random.default_rng(s) for s in (1, 2)])
        noisy = execute(policies, corrupted, [np.random.default_rng(s) for s in (1, 2)])
        np.testing.assert_array_equal(clean[0], noisy[0])

    def test_one_observation_per_agent(self):
        with pytest.raises(DimensionError):
            execute(_policies(BoxSpace(2)), np.zeros((3, 3)), np.random.default_rng(0))

    def test_stream_count_checked(self):
        with pytest.raises(ArgumentError):
            execute(_policies(BoxSpace(2)), np.zeros((2, 3)), [np.random.default_rng(0)])


class TestEvaluate:
    def test_constant_reward_returns_horizon(self):
        env = _constant_reward_env(horizon=7)
        policies = _policies(env.action_space, obs_dim=env.obs_dim)
        assert evaluate(policies, env, 5, np.random.default_rng(0)) == (7.0, 0.0)

    def test_uniform_play_on_additive_game(self):
        # a zero field picks argmax of iid normals, i.e. a uniform arm
        env = additive_game()
        policies = _policies(env.action_space, obs_dim=env.obs_dim, zero=True)
        n = 2000
        mean, std = evaluate(policies, env, n, np.random.default_rng(1))
        assert abs(mean - 1.0) <= 3 * std / np.sqrt(n)

    def test_needs_an_episode(self):
        env = additive_game()
        with pytest.raises(ArgumentError):
            evaluate(_policies(env.action_space, obs_dim=env.obs_dim), env, 0)

    def test_agent_count_checked(self):
        env = additive_game()
        with pytest.raises(ArgumentError):
            evaluate(_policies(env.action_space, obs_dim=env.obs_dim, n_agents=3), env, 1)
