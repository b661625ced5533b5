"""
Offline datasets
================
Datasets are rolled out episode by episode with a per-agent behaviour
policy chosen by tier:

* ``expert`` scripted expert for every agent
* ``medium`` expert with exploration noise
* ``poor``   uniform over the action space
* ``mixed``  whole episodes from the expert with probability
  ``expert_fraction`` (default 0.3), otherwise uniform

Generation stops at the first episode boundary at or past
``n_transitions``.

On disk a dataset is newline-delimited records
``{episode, t, obs, next_obs, act, reward, done}`` (agent-major arrays)
plus a ``.manifest.json`` sidecar whose ``content_hash`` is the sha256
of the records file.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.db import models
from rest_framework import serializers

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError, DatasetError
from apps.core.renderers import parse_document, read_document, render_line, sha256_file, write_document
from apps.values.transitions import JointTransitionBatch

from .registry import Environment
from .spread import ContinuousSpreadEnv

logger = logging.getLogger(__name__)

FORMAT_TAG = "vgm2p-dataset/1"

BehaviourPolicy = Callable[[int, Tensor, np.random.Generator], Tensor]


class Tier(models.TextChoices):
    EXPERT = "expert", "Expert"
    MEDIUM = "medium", "Medium"
    POOR = "poor", "Poor"
    MIXED = "mixed", "Mixed (expert / poor episodes)"


# ═══════════════════════════════════════════════════════════════════
# BEHAVIOUR POLICIES
# ═══════════════════════════════════════════════════════════════════


def expert_policy(env: Environment) -> BehaviourPolicy:
    if isinstance(env, ContinuousSpreadEnv):
        return lambda agent, obs, rng: env.expert_action(agent, obs)
    if env.expert_actions is None:
        raise ArgumentError(f"{env.name} has no expert table")

    def act(agent, obs, rng):
        return env.action_space.encode(env.expert_actions[agent, int(np.argmax(obs))])

    return act


def uniform_policy(env: Environment) -> BehaviourPolicy:
    space = env.action_space

    def act(agent, obs, rng):
        return space.encode(space.sample(rng))

    return act


def noisy_expert_policy(env: Environment, noise: float = 0.3) -> BehaviourPolicy:
    """Tabular: uniform action with probability ``noise``; continuous: Gaussian noise of std ``noise``."""
    expert = expert_policy(env)
    space = env.action_space
    if isinstance(env, ContinuousSpreadEnv):
        return lambda agent, obs, rng: space.decode(
            expert(agent, obs, rng) + noise * rng.standard_normal(space.dim)
        )

    def act(agent, obs, rng):
        if rng.random() < noise:
            return space.encode(space.sample(rng))
        return expert(agent, obs, rng)

    return act


# ═══════════════════════════════════════════════════════════════════
# DATASET
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True, eq=False)
class OfflineDataset:
    env_name: str
    tier: str
    seed: int
    behavior: str
    obs: Tensor
    actions: Tensor
    next_obs: Tensor
    rewards: Tensor
    dones: Tensor
    episodes: np.ndarray
    steps: np.ndarray
    expert_episodes: np.ndarray

    def __post_init__(self):
        rows = self.obs.shape[0]
        for name in ("actions", "next_obs", "rewards", "dones", "episodes", "steps"):
            if getattr(self, name).shape[0] != rows:
                raise DatasetError(f"{name} has {getattr(self, name).shape[0]} rows, expected {rows}")
        if self.actions.shape[1] != self.obs.shape[1]:
            raise DatasetError("obs and actions disagree on the number of agents")

    @property
    def n_transitions(self) -> int:
        return int(self.obs.shape[0])

    @property
    def n_agents(self) -> int:
        return int(self.obs.shape[1])

    @property
    def obs_dim(self) -> int:
        return int(self.obs.shape[2])

    @property
    def action_dim(self) -> int:
        return int(self.actions.shape[2])

    @property
    def n_episodes(self) -> int:
        return int(self.episodes.max()) + 1 if self.n_transitions else 0

    def transitions(self) -> JointTransitionBatch:
        return JointTransitionBatch(
            obs=self.obs, actions=self.actions, next_obs=self.next_obs, rewards=self.rewards, dones=self.dones
        )

    def episode_returns(self) -> Tensor:
        """Undiscounted team return of every episode."""
        return np.bincount(self.episodes, weights=self.rewards, minlength=self.n_episodes)

    def mean_return(self) -> float:
        return float(np.mean(self.episode_returns()))

    def expert_episode_fraction(self) -> float:
        return float(np.mean(self.expert_episodes)) if self.n_episodes else 0.0


def _tier_policies(env: Environment, tier: str, noise: float) -> tuple[BehaviourPolicy, BehaviourPolicy]:
    """(expert-side policy, poor-side policy) for the tier."""
    if tier == Tier.EXPERT:
        policy = expert_policy(env)
        return policy, policy
    if tier == Tier.MEDIUM:
        policy = noisy_expert_policy(env, noise)
        return policy, policy
    if tier == Tier.POOR:
        policy = uniform_policy(env)
        return policy, policy
    if tier == Tier.MIXED:
        return expert_policy(env), uniform_policy(env)
    raise ArgumentError(f"unknown tier {tier!r}")


def generate_offline_dataset(
    env: Environment,
    n_transitions: int,
    tier: str,
    seed: int,
    *,
    expert_fraction: float = 0.3,
    noise: float = 0.3,
) -> OfflineDataset:
    if n_transitions <= 0:
        raise ArgumentError(f"n_transitions must be positive, got {n_transitions}")
    if not 0.0 <= expert_fraction <= 1.0:
        raise ArgumentError(f"expert_fraction must be in [0, 1], got {expert_fraction}")
    expert_side, poor_side = _tier_policies(env, tier, noise)
    rng = np.random.default_rng(seed)

    rows: dict[str, list] = {k: [] for k in ("obs", "act", "next_obs", "reward", "done", "episode", "t")}
    expert_flags: list[bool] = []
    episode = 0
    while len(rows["obs"]) < n_transitions:
        if tier == Tier.MIXED:
            from_expert = bool(rng.random() < expert_fraction)
        else:
            from_expert = tier in (Tier.EXPERT, Tier.MEDIUM)
        policy = expert_side if from_expert else poor_side
        expert_flags.append(from_expert)

        state = env.reset(rng)
        obs = env.observe(state)
        done = False
        while not done:
            joint_action = np.stack([policy(i, obs[i], rng) for i in range(env.n_agents)])
            result = env.step(state, joint_action, rng)
            rows["obs"].append(obs)
            rows["act"].append(joint_action)
            rows["next_obs"].append(result.obs)
            rows["reward"].append(result.reward)
            rows["done"].append(result.done)
            rows["episode"].append(episode)
            rows["t"].append(state.t)
            state, obs, done = result.state, result.obs, result.done
        episode += 1

    dataset = OfflineDataset(
        env_name=env.name,
        tier=str(tier),
        seed=int(seed),
        behavior=_describe(tier, expert_fraction, noise),
        obs=np.asarray(rows["obs"], dtype=np.float64),
        actions=np.asarray(rows["act"], dtype=np.float64),
        next_obs=np.asarray(rows["next_obs"], dtype=np.float64),
        rewards=np.asarray(rows["reward"], dtype=np.float64),
        dones=np.asarray(rows["done"], dtype=np.float64),
        episodes=np.asarray(rows["episode"], dtype=np.int64),
        steps=np.asarray(rows["t"], dtype=np.int64),
        expert_episodes=np.asarray(expert_flags, dtype=bool),
    )
    logger.info(
        "Generated %s/%s dataset: %d transitions, %d episodes, mean return %.4f",
        env.name, tier, dataset.n_transitions, dataset.n_episodes, dataset.mean_return(),
    )
    return dataset


def _describe(tier: str, expert_fraction: float, noise: float) -> str:
    if tier == Tier.MIXED:
        return f"episode mixture: expert p={expert_fraction}, uniform p={1 - expert_fraction:.2f}"
    if tier == Tier.MEDIUM:
        return f"noisy expert (noise={noise})"
    if tier == Tier.EXPERT:
        return "scripted expert"
    return "uniform"


def check_tier_ordering(datasets: Mapping[str, OfflineDataset], min_gap_fraction: float = 0.1) -> dict[str, float]:
    """
    Mean returns must order expert >= mixed >= poor, with each gap at
    least ``min_gap_fraction`` of |expert return|.  Tiers that are not
    present are skipped.
    """
    means = {str(tier): ds.mean_return() for tier, ds in datasets.items()}
    ladder = [t.value for t in (Tier.EXPERT, Tier.MIXED, Tier.POOR) if t.value in means]
    if Tier.EXPERT.value in means:
        gap = min_gap_fraction * abs(means[Tier.EXPERT.value])
        for upper, lower in zip(ladder, ladder[1:]):
            if means[upper] - means[lower] < gap:
                raise DatasetError(
                    {
                        "detail": f"{upper} return does not exceed {lower} return by {gap:.4f}",
                        "means": means,
                    }
                )
    return means


# ═══════════════════════════════════════════════════════════════════
# FILE FORMAT
# ═══════════════════════════════════════════════════════════════════


class DatasetManifestSerializer(serializers.Serializer):
    format = serializers.CharField()
    env = serializers.CharField()
    tier = serializers.ChoiceField(choices=Tier.choices)
    seed = serializers.IntegerField()
    n_agents = serializers.IntegerField(min_value=1)
    obs_dim = serializers.IntegerField(min_value=1)
    action_dim = serializers.IntegerField(min_value=1)
    n_transitions = serializers.IntegerField(min_value=1)
    n_episodes = serializers.IntegerField(min_value=1)
    behavior = serializers.CharField()
    expert_episodes = serializers.ListField(child=serializers.IntegerField(min_value=0))
    content_hash = serializers.CharField(min_length=64, max_length=64)

    def validate_format(self, value):
        if value != FORMAT_TAG:
            raise serializers.ValidationError(f"expected {FORMAT_TAG}, got {value}")
        return value


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def save_dataset(dataset: OfflineDataset, path: str | Path) -> dict:
    """Write records and manifest; return the manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for idx in range(dataset.n_transitions):
            record = {
                "episode": int(dataset.episodes[idx]),
                "t": int(dataset.steps[idx]),
                "obs": dataset.obs[idx].tolist(),
                "next_obs": dataset.next_obs[idx].tolist(),
                "act": dataset.actions[idx].tolist(),
                "reward": float(dataset.rewards[idx]),
                "done": bool(dataset.dones[idx]),
            }
            fh.write(render_line(record) + b"\n")
    manifest = {
        "format": FORMAT_TAG,
        "env": dataset.env_name,
        "tier": dataset.tier,
        "seed": dataset.seed,
        "n_agents": dataset.n_agents,
        "obs_dim": dataset.obs_dim,
        "action_dim": dataset.action_dim,
        "n_transitions": dataset.n_transitions,
        "n_episodes": dataset.n_episodes,
        "behavior": dataset.behavior,
        "expert_episodes": np.flatnonzero(dataset.expert_episodes).tolist(),
        "content_hash": sha256_file(path),
    }
    write_document(manifest_path(path), manifest)
    logger.info("Saved %d transitions to %s", dataset.n_transitions, path)
    return manifest


def load_dataset(path: str | Path) -> OfflineDataset:
    path = Path(path)
    sidecar = manifest_path(path)
    if not path.exists() or not sidecar.exists():
        raise DatasetError(f"dataset {path} or its manifest is missing")
    serializer = DatasetManifestSerializer(data=read_document(sidecar))
    if not serializer.is_valid():
        raise DatasetError(serializer.errors)
    manifest = serializer.validated_data
    if sha256_file(path) != manifest["content_hash"]:
        raise DatasetError(f"content hash mismatch for {path}")

    with open(path, "rb") as fh:
        records = [parse_document(line) for line in fh if line.strip()]
    if len(records) != manifest["n_transitions"]:
        raise DatasetError(f"expected {manifest['n_transitions']} records, found {len(records)}")

    expert = np.zeros(manifest["n_episodes"], dtype=bool)
    expert[manifest["expert_episodes"]] = True
    return OfflineDataset(
        env_name=manifest["env"],
        tier=manifest["tier"],
        seed=manifest["seed"],
        behavior=manifest["behavior"],
        obs=np.asarray([r["obs"] for r in records], dtype=np.float64),
        actions=np.asarray([r["act"] for r in records], dtype=np.float64),
        next_obs=np.asarray([r["next_obs"] for r in records], dtype=np.float64),
        rewards=np.asarray([r["reward"] for r in records], dtype=np.float64),
        dones=np.asarray([r["done"] for r in records], dtype=np.float64),
        episodes=np.asarray([r["episode"] for r in records], dtype=np.int64),
        steps=np.asarray([r["t"] for r in records], dtype=np.int64),
        expert_episodes=expert,
    )
