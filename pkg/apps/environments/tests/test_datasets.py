import numpy as np
import pytest

from apps.core.exceptions import ArgumentError, DatasetError
from apps.core.renderers import read_document, write_document
from apps.environments.datasets import (
    Tier,
    check_tier_ordering,
    generate_offline_dataset,
    load_dataset,
    manifest_path,
    save_dataset,
)
from apps.environments.registry import get_env
from apps.environments.tabular import FORWARD, TabularState


class TestGeneration:
    def test_expert_bandit_uses_expert_arm(self):
        env = get_env("additive_game")
        dataset = generate_offline_dataset(env, 200, Tier.EXPERT, seed=0)
        arms = dataset.actions.argmax(axis=2)
        assert np.all(arms[:, 0] == 0)
        assert np.all(arms[:, 1] == 2)
        assert np.all(dataset.rewards == 2.0)

    def test_whole_episodes(self):
        env = get_env("chain")
        dataset = generate_offline_dataset(env, 20, Tier.POOR, seed=1)
        assert dataset.n_transitions == 24
        assert dataset.dones.sum() == dataset.n_episodes == 3

    def test_non_positive_size(self):
        with pytest.raises(ArgumentError):
            generate_offline_dataset(get_env("chain"), 0, Tier.EXPERT, seed=0)

    def test_unknown_tier(self):
        with pytest.raises(ArgumentError):
            generate_offline_dataset(get_env("chain"), 10, "legendary", seed=0)

    def test_deterministic(self):
        env = get_env("spread")
        first = generate_offline_dataset(env, 100, Tier.MEDIUM, seed=5)
        second = generate_offline_dataset(env, 100, Tier.MEDIUM, seed=5)
        np.testing.assert_array_equal(first.actions, second.actions)
        np.testing.assert_array_equal(first.rewards, second.rewards)

    def test_mixed_expert_fraction(self):
        dataset = generate_offline_dataset(get_env("climbing_game"), 10_000, Tier.MIXED, seed=3)
        assert dataset.n_episodes == 10_000
        assert dataset.expert_episode_fraction() == pytest.approx(0.30, abs=0.02)

    def test_mixed_episodes_are_pure(self):
        env = get_env("chain")
        dataset = generate_offline_dataset(env, 800, Tier.MIXED, seed=4)
        for episode in np.flatnonzero(dataset.expert_episodes):
            arms = dataset.actions[dataset.episodes == episode].argmax(axis=2)
            assert np.all(arms == FORWARD)

    def test_replay_reproduces_chain(self):
        env = get_env("chain")
        dataset = generate_offline_dataset(env, 80, Tier.MEDIUM, seed=2)
        rng = np.random.default_rng(0)
        state = None
        for idx in range(dataset.n_transitions):
            if dataset.steps[idx] == 0:
                state = TabularState(0)
            result = env.step(state, dataset.actions[idx], rng)
            np.testing.assert_array_equal(result.obs, dataset.next_obs[idx])
            assert result.reward == dataset.rewards[idx]
            state = result.state

    def test_transitions_view(self):
        dataset = generate_offline_dataset(get_env("chain"), 16, Tier.EXPERT, seed=0)
        batch = dataset.transitions()
        assert batch.rows == 16 and batch.n_agents == 2


class TestTierOrdering:
    @pytest.mark.parametrize("name", ["additive_game", "climbing_game", "chain"])
    def test_generated_tiers_are_ordered(self, name):
        env = get_env(name)
        datasets = {
            tier: generate_offline_dataset(env, 4000, tier, seed=7)
            for tier in (Tier.EXPERT.value, Tier.MIXED.value, Tier.POOR.value)
        }
        means = check_tier_ordering(datasets)
        assert means["expert"] == pytest.approx(env.documented_optimum)

    def test_spread_tiers_are_ordered(self):
        env = get_env("spread")
        datasets = {
            tier: generate_offline_dataset(env, 4000, tier, seed=7)
            for tier in (Tier.EXPERT.value, Tier.MIXED.value, Tier.POOR.value)
        }
        means = check_tier_ordering(datasets)
        assert means["expert"] > means["mixed"] > means["poor"]
        assert means["expert"] == pytest.approx(env.documented_optimum, rel=0.15)

    def test_violation_raises(self):
        env = get_env("additive_game")
        poor = generate_offline_dataset(env, 500, Tier.POOR, seed=0)
        with pytest.raises(DatasetError):
            check_tier_ordering({"expert": poor, "poor": poor})


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        dataset = generate_offline_dataset(get_env("spread"), 60, Tier.MIXED, seed=9)
        save_dataset(dataset, tmp_path / "spread.ndjson")
        loaded = load_dataset(tmp_path / "spread.ndjson")
        np.testing.assert_array_equal(loaded.obs, dataset.obs)
        np.testing.assert_array_equal(loaded.actions, dataset.actions)
        np.testing.assert_array_equal(loaded.rewards, dataset.rewards)
        np.testing.assert_array_equal(loaded.expert_episodes, dataset.expert_episodes)
        assert loaded.tier == "mixed"

    def test_fixed_seed_byte_identical(self, tmp_path):
        env = get_env("chain")
        for name in ("a", "b"):
            save_dataset(generate_offline_dataset(env, 50, Tier.MEDIUM, seed=1), tmp_path / f"{name}.ndjson")
        assert (tmp_path / "a.ndjson").read_bytes() == (tmp_path / "b.ndjson").read_bytes()

    def test_manifest_fields(self, tmp_path):
        manifest = save_dataset(
            generate_offline_dataset(get_env("chain"), 8, Tier.EXPERT, seed=0), tmp_path / "c.ndjson"
        )
        assert manifest["n_agents"] == 2
        assert manifest["obs_dim"] == 5
        assert manifest["action_dim"] == 3
        assert len(manifest["content_hash"]) == 64

    def test_tampered_records(self, tmp_path):
        path = tmp_path / "d.ndjson"
        save_dataset(generate_offline_dataset(get_env("chain"), 8, Tier.EXPERT, seed=0), path)
        path.write_bytes(path.read_bytes().replace(b'"t":0', b'"t":1', 1))
        with pytest.raises(DatasetError):
            load_dataset(path)

    def test_bad_manifest(self, tmp_path):
        path = tmp_path / "e.ndjson"
        save_dataset(generate_offline_dataset(get_env("chain"), 8, Tier.EXPERT, seed=0), path)
        manifest = read_document(manifest_path(path))
        manifest["tier"] = "legendary"
        write_document(manifest_path(path), manifest)
        with pytest.raises(DatasetError):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "missing.ndjson")
