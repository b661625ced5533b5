"""Desk-scale training runs; deselected by default (``-m slow`` to run)."""

import numpy as np
import pytest

from apps.environments.datasets import OfflineDataset, Tier, generate_offline_dataset
from apps.environments.spread import ContinuousSpreadEnv
from apps.flows.samplers import sample_multi_step, sample_one_step
from apps.environments.tabular import matrix_game
from apps.trainer.config import CriticMode, Method
from apps.trainer.rollout_service import execute
from apps.trainer.tests.factories import TrainConfigFactory
from apps.trainer.training_service import fit, init_train_state, train_bc_baseline, train_step

pytestmark = pytest.mark.slow

TARGET = np.array([0.3, -0.5])


def _point_mass_dataset(env: ContinuousSpreadEnv, rows: int = 256) -> OfflineDataset:
    obs = np.zeros((rows, 1, env.obs_dim))
    return OfflineDataset(
        env_name=env.name,
        tier=Tier.EXPERT,
        seed=0,
        behavior="point mass",
        obs=obs,
        actions=np.broadcast_to(TARGET, (rows, 1, 2)).copy(),
        next_obs=obs,
        rewards=np.zeros(rows),
        dones=np.ones(rows),
        episodes=np.arange(rows),
        steps=np.zeros(rows, dtype=np.int64),
        expert_episodes=np.ones(rows, dtype=bool),
    )


def test_meanflow_bc_on_point_mass_samples_in_one_step():
    env = ContinuousSpreadEnv(landmarks=np.array([[0.5, 0.5]]), n_agents=1, horizon=2)
    cfg = TrainConfigFactory(
        seed=0, gradient_steps=5000, batch_size=64, lr=1e-3, hidden_dims=(64, 64), activation="relu", eval_every=5000
    )
    policies, _ = train_bc_baseline("meanflow", _point_mass_dataset(env), cfg, env)
    rng = np.random.default_rng(0)
    draws = np.stack([execute(policies, np.zeros((1, env.obs_dim)), rng)[0] for _ in range(1000)])
    assert np.mean(np.linalg.norm(draws - TARGET, axis=1)) <= 1e-2

    field = policies.field_for(0)
    obs = policies.features(0, np.zeros((1000, env.obs_dim)))
    one_step = sample_one_step(field, obs, None, np.random.default_rng(3))
    ten_step = sample_multi_step(field, obs, None, 10, np.random.default_rng(3))
    assert np.mean(np.linalg.norm(one_step - ten_step, axis=1)) <= 2e-2


def test_expert_bandit_arm_is_recovered():
    env = matrix_game("bandit", [0.0, 1.0, 0.2], expert=(1,))
    dataset = generate_offline_dataset(env, 500, Tier.EXPERT, seed=0)
    cfg = TrainConfigFactory(seed=0, gradient_steps=2000, batch_size=64, hidden_dims=(64, 64), eval_every=500)
    policies, report = fit(Method.VGM2P, dataset, env, cfg)
    rng = np.random.default_rng(1)
    arms = [int(np.argmax(execute(policies, env.observe(env.reset(rng)), rng)[0])) for _ in range(1000)]
    assert np.mean(np.equal(arms, 1)) >= 0.95
    assert report.final_return() >= 0.8


def _mean_final_return(method, env, overrides, seeds=range(6), n_transitions=2000):
    returns = []
    for seed in seeds:
        dataset = generate_offline_dataset(env, n_transitions, Tier.MIXED, seed)
        settings = {"gradient_steps": 2000, "eval_episodes": 20, **overrides}
        settings.setdefault("eval_every", settings["gradient_steps"])
        cfg = TrainConfigFactory(seed=seed, **settings)
        returns.append(fit(method, dataset, env, cfg)[1].final_return())
    return float(np.mean(returns))


def test_value_guidance_beats_meanflow_bc_on_additive_game(reference_envs):
    env = reference_envs["additive_game"]
    guided = _mean_final_return(Method.VGM2P, env, {"hidden_dims": (64, 64)})
    cloned = _mean_final_return(Method.BC_MF, env, {"hidden_dims": (64, 64)})
    assert guided > cloned
    assert guided - cloned >= 0.5 * (env.documented_optimum - cloned)


def test_joint_critic_not_worse_than_independent_on_chain(reference_envs):
    env = reference_envs["chain"]
    joint = _mean_final_return(Method.VGM2P, env, {"critic": CriticMode.JOINT, "hidden_dims": (64, 64)})
    independent = _mean_final_return(Method.VGM2P, env, {"critic": CriticMode.INDEPENDENT, "hidden_dims": (64, 64)})
    assert joint >= independent


SPREAD_TRAINING = {"hidden_dims": (64, 64), "batch_size": 64, "gradient_steps": 4000}


def test_value_guidance_beats_meanflow_bc_on_spread(reference_envs):
    env = reference_envs["spread"]
    guided = _mean_final_return(Method.VGM2P, env, SPREAD_TRAINING)
    cloned = _mean_final_return(Method.BC_MF, env, SPREAD_TRAINING)
    assert guided > cloned
    assert guided - cloned >= 0.5 * (env.documented_optimum - cloned)


def test_guidance_weight_insensitivity_on_spread(reference_envs):
    env = reference_envs["spread"]
    returns = {
        omega: _mean_final_return(Method.VGM2P, env, {**SPREAD_TRAINING, "omega": omega})
        for omega in (3.0, 5.0, 10.0, 20.0)
    }
    best = max(returns.values())
    for omega, value in returns.items():
        assert best - value <= 0.15 * abs(best), f"omega={omega}: {value:.3f} vs best {best:.3f}"


DELTA_ACTIONS = np.array([[0.3, -0.5], [-0.6, 0.2]])


def test_train_step_fits_a_two_agent_delta_dataset():
    env = ContinuousSpreadEnv(landmarks=np.array([[0.5, 0.5], [-0.5, -0.5]]), n_agents=2, horizon=2)
    rows = 256
    obs = np.zeros((rows, 2, env.obs_dim))
    dataset = OfflineDataset(
        env_name=env.name,
        tier=Tier.EXPERT,
        seed=0,
        behavior="delta actions",
        obs=obs,
        actions=np.broadcast_to(DELTA_ACTIONS, (rows, 2, 2)).copy(),
        next_obs=obs,
        rewards=np.zeros(rows),
        dones=np.ones(rows),
        episodes=np.arange(rows),
        steps=np.zeros(rows, dtype=np.int64),
        expert_episodes=np.ones(rows, dtype=bool),
    )
    cfg = TrainConfigFactory(seed=0, omega=1.0, lr=1e-3, batch_size=64, hidden_dims=(64, 64), activation="relu")
    state = init_train_state(
        Method.VGM2P, n_agents=2, obs_dim=env.obs_dim, action_space=env.action_space, cfg=cfg
    )
    transitions = dataset.transitions()
    rng = np.random.default_rng(0)
    losses = []
    for _ in range(2000):
        state, step = train_step(state, transitions.take(rng.integers(rows, size=cfg.batch_size)), cfg, rng)
        losses.append(step.policy_loss)
    assert np.mean(losses[-50:]) <= 1e-3
