from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError, DimensionError

from .spaces import BoxSpace
from .tabular import StepResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpreadState:
    positions: Tensor
    t: int = 0


@dataclass(frozen=True, eq=False)
class ContinuousSpreadEnv:
    """
    Agents move in the box ``[-arena, arena]²`` and should cover the
    landmarks.  Positions advance by ``dt · clip(action, -1, 1)`` and are
    clamped to the arena; the team reward is minus the sum over
    landmarks of the distance to the nearest agent.

    Agent ``i`` observes its position, every landmark relative to itself
    and every other agent relative to itself.
    """

    landmarks: Tensor
    n_agents: int = 2
    horizon: int = 25
    arena: float = 1.0
    dt: float = 0.1
    gamma: float = 0.99
    name: str = "spread"
    documented_optimum: float | None = None

    def __post_init__(self):
        if self.landmarks.ndim != 2 or self.landmarks.shape[1] != 2:
            raise DimensionError("landmarks must be an (L, 2) array")
        if np.any(np.abs(self.landmarks) > self.arena):
            raise ArgumentError("landmarks must lie inside the arena")
        if self.n_agents < 1 or self.horizon < 1:
            raise ArgumentError("need at least one agent and one step")

    @property
    def action_space(self) -> BoxSpace:
        return BoxSpace(2)

    @property
    def obs_dim(self) -> int:
        return 2 + 2 * self.landmarks.shape[0] + 2 * (self.n_agents - 1)

    def reset(self, rng: np.random.Generator) -> SpreadState:
        return SpreadState(positions=rng.uniform(-self.arena, self.arena, size=(self.n_agents, 2)))

    def team_reward(self, positions: Tensor) -> float:
        distances = np.linalg.norm(self.landmarks[:, None, :] - positions[None, :, :], axis=-1)
        return -float(np.sum(distances.min(axis=1)))

    def observe(self, state: SpreadState) -> Tensor:
        rows = []
        for i, own in enumerate(state.positions):
            others = np.delete(state.positions, i, axis=0) - own
            rows.append(np.concatenate([own, (self.landmarks - own).ravel(), others.ravel()]))
        return np.stack(rows)

    def step(self, state: SpreadState, joint_action, rng: np.random.Generator | None = None) -> StepResult:
        action = np.asarray(joint_action, dtype=np.float64)
        if action.shape != (self.n_agents, 2):
            raise ArgumentError(f"joint action must be ({self.n_agents}, 2), got {action.shape}")
        if not np.all(np.isfinite(action)):
            raise ArgumentError("joint action has non-finite entries")
        positions = np.clip(
            state.positions + self.dt * self.action_space.decode(action), -self.arena, self.arena
        )
        next_state = SpreadState(positions=positions, t=state.t + 1)
        return StepResult(
            state=next_state,
            obs=self.observe(next_state),
            reward=self.team_reward(positions),
            done=next_state.t >= self.horizon,
        )

    def expert_action(self, agent: int, obs) -> Tensor:
        """Scripted assignment: agent ``i`` heads straight for landmark ``i mod L``."""
        obs = np.asarray(obs, dtype=np.float64)
        landmark = agent % self.landmarks.shape[0]
        offset = obs[2 + 2 * landmark: 4 + 2 * landmark]
        return np.clip(offset / self.dt, -1.0, 1.0)


REFERENCE_EPISODES = 200
REFERENCE_SEED = 0


def expert_return(
    env: ContinuousSpreadEnv, n_episodes: int = REFERENCE_EPISODES, seed: int = REFERENCE_SEED
) -> float:
    """Mean undiscounted return of the scripted expert over ``n_episodes`` seeded resets."""
    if n_episodes < 1:
        raise ArgumentError(f"n_episodes must be >= 1, got {n_episodes}")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n_episodes):
        state, done = env.reset(rng), False
        while not done:
            obs = env.observe(state)
            joint = np.stack([env.expert_action(i, obs[i]) for i in range(env.n_agents)])
            result = env.step(state, joint, rng)
            state, done = result.state, result.done
            total += result.reward
    return total / n_episodes


def _build_spread(n_agents: int, horizon: int) -> ContinuousSpreadEnv:
    landmarks = np.array([[-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]])[:n_agents]
    return ContinuousSpreadEnv(landmarks=landmarks, n_agents=n_agents, horizon=horizon)


@lru_cache(maxsize=None)
def _reference_return(n_agents: int, horizon: int) -> float:
    value = expert_return(_build_spread(n_agents, horizon))
    logger.debug("Spread reference return (%d agents, T=%d): %.4f", n_agents, horizon, value)
    return value


def spread_env(n_agents: int = 2, horizon: int = 25) -> ContinuousSpreadEnv:
    """
    The reference spread task.  It has no closed-form optimum, so
    ``documented_optimum`` holds the scripted expert return estimated
    over ``REFERENCE_EPISODES`` resets seeded with ``REFERENCE_SEED``.
    """
    return replace(_build_spread(n_agents, horizon), documented_optimum=_reference_return(n_agents, horizon))
