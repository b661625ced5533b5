"""
Finite Dec-POMDPs given by explicit tables.

``transitions`` has shape ``(S, A, ..., A, S)`` (one action axis per
agent) and ``rewards`` shape ``(S, A, ..., A)``.  Each agent observes a
deterministic projection ``obs_map[i, s]`` of the state, encoded
one-hot.  Episodes last ``horizon`` steps; the last step is terminal.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError, DimensionError, NumericError

from .spaces import DiscreteSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TabularState:
    s: int
    t: int = 0


@dataclass(frozen=True)
class StepResult:
    state: Any
    obs: Tensor
    reward: float
    done: bool


@dataclass(frozen=True, eq=False)
class TabularDecPOMDP:
    name: str
    n_agents: int
    n_actions: int
    transitions: np.ndarray
    rewards: np.ndarray
    obs_map: np.ndarray
    initial: np.ndarray
    gamma: float = 0.99
    horizon: int = 1
    expert_actions: np.ndarray | None = None
    documented_optimum: float | None = None
    n_obs: int = field(init=False)

    def __post_init__(self):
        n_states = self.initial.shape[0]
        joint = (self.n_actions,) * self.n_agents
        if self.transitions.shape != (n_states, *joint, n_states):
            raise DimensionError(
                f"transitions must be {(n_states, *joint, n_states)}, got {self.transitions.shape}"
            )
        if self.rewards.shape != (n_states, *joint):
            raise DimensionError(f"rewards must be {(n_states, *joint)}, got {self.rewards.shape}")
        if self.obs_map.shape != (self.n_agents, n_states):
            raise DimensionError(f"obs_map must be {(self.n_agents, n_states)}")
        for name in ("transitions", "rewards", "initial"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"{name} table has non-finite entries")
        if np.any(self.transitions < 0) or np.max(np.abs(self.transitions.sum(axis=-1) - 1.0)) > 1e-12:
            raise ArgumentError("transition rows must be distributions summing to 1")
        if abs(self.initial.sum() - 1.0) > 1e-12 or np.any(self.initial < 0):
            raise ArgumentError("initial distribution must sum to 1")
        if self.horizon < 1:
            raise ArgumentError(f"horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "n_obs", int(self.obs_map.max()) + 1)

    @property
    def n_states(self) -> int:
        return int(self.initial.shape[0])

    @property
    def obs_dim(self) -> int:
        return self.n_obs

    @property
    def action_space(self) -> DiscreteSpace:
        return DiscreteSpace(self.n_actions)

    def joint_actions(self):
        """Every joint action, in lexicographic order."""
        return itertools.product(range(self.n_actions), repeat=self.n_agents)

    # ── Dynamics ─────────────────────────────────────────────────

    def reset(self, rng: np.random.Generator) -> TabularState:
        return TabularState(s=int(rng.choice(self.n_states, p=self.initial)), t=0)

    def observe(self, state: TabularState) -> Tensor:
        """``(N, n_obs)`` one-hot local observations."""
        return np.eye(self.n_obs)[self.obs_map[:, state.s]]

    def action_indices(self, joint_action) -> tuple[int, ...]:
        joint_action = np.asarray(joint_action)
        if joint_action.ndim == 2:
            indices = self.action_space.decode(joint_action)
        else:
            indices = self.action_space.validate(joint_action)
        if indices.shape != (self.n_agents,):
            raise ArgumentError(f"joint action needs {self.n_agents} entries, got {indices.shape}")
        return tuple(int(a) for a in indices)

    def step(self, state: TabularState, joint_action, rng: np.random.Generator) -> StepResult:
        """
        ``joint_action`` is either ``N`` integer indices or ``(N, n_actions)``
        encoded rows (decoded by argmax).
        """
        actions = self.action_indices(joint_action)
        key = (state.s, *actions)
        s_next = int(rng.choice(self.n_states, p=self.transitions[key]))
        next_state = TabularState(s=s_next, t=state.t + 1)
        return StepResult(
            state=next_state,
            obs=self.observe(next_state),
            reward=float(self.rewards[key]),
            done=next_state.t >= self.horizon,
        )


# ═══════════════════════════════════════════════════════════════════
# REFERENCE GAMES
# ═══════════════════════════════════════════════════════════════════


def matrix_game(name: str, payoff, expert: tuple[int, ...], gamma: float = 0.99) -> TabularDecPOMDP:
    """One-step game with a single state and a team payoff table."""
    payoff = np.asarray(payoff, dtype=np.float64)
    n_agents = payoff.ndim
    n_actions = payoff.shape[0]
    joint = (n_actions,) * n_agents
    return TabularDecPOMDP(
        name=name,
        n_agents=n_agents,
        n_actions=n_actions,
        transitions=np.ones((1, *joint, 1)),
        rewards=payoff[None],
        obs_map=np.zeros((n_agents, 1), dtype=np.int64),
        initial=np.ones(1),
        gamma=gamma,
        horizon=1,
        expert_actions=np.asarray(expert, dtype=np.int64)[:, None],
        documented_optimum=float(payoff[expert]),
    )


BACK, STAY, FORWARD = 0, 1, 2


def chain_game(
    n_states: int = 5, horizon: int = 8, gamma: float = 0.99, full_observation: bool = False
) -> TabularDecPOMDP:
    """
    Two agents push a marker along a chain starting at position 0.

    The marker moves forward only when both agents choose forward, and
    back (clamped at 0) when either chooses back.  Each step pays the
    new position divided by ``n_states - 1``.  Agent 0 observes the
    position; agent 1 only observes it in pairs of cells (``s // 2``)
    unless ``full_observation`` is set.  Always-forward is optimal under
    either observation model, so the optimum does not change.
    """
    last = n_states - 1
    transitions = np.zeros((n_states, 3, 3, n_states))
    rewards = np.zeros((n_states, 3, 3))
    for s, a1, a2 in itertools.product(range(n_states), range(3), range(3)):
        if BACK in (a1, a2):
            s_next = max(s - 1, 0)
        elif a1 == a2 == FORWARD:
            s_next = min(s + 1, last)
        else:
            s_next = s
        transitions[s, a1, a2, s_next] = 1.0
        rewards[s, a1, a2] = s_next / last
    initial = np.zeros(n_states)
    initial[0] = 1.0
    positions = np.arange(n_states)
    obs_map = np.stack([positions, positions if full_observation else positions // 2])
    # forward every step: positions 1..last then stay at last
    optimum = sum(min(t + 1, last) / last for t in range(horizon))
    return TabularDecPOMDP(
        name="chain",
        n_agents=2,
        n_actions=3,
        transitions=transitions,
        rewards=rewards,
        obs_map=obs_map,
        initial=initial,
        gamma=gamma,
        horizon=horizon,
        expert_actions=np.full((2, n_states), FORWARD, dtype=np.int64),
        documented_optimum=float(optimum),
    )


ADDITIVE_PAYOFF = np.add.outer([1.0, 0.0, 0.5], [0.0, 0.5, 1.0])

CLIMBING_PAYOFF = np.array(
    [
        [11.0, -30.0, 0.0],
        [-30.0, 7.0, 6.0],
        [0.0, 0.0, 5.0],
    ]
)


def additive_game() -> TabularDecPOMDP:
    """Payoff f(a1) + g(a2); the optimum (0, 2) pays 2."""
    return matrix_game("additive_game", ADDITIVE_PAYOFF, expert=(0, 2))


def climbing_game() -> TabularDecPOMDP:
    """Non-additive payoff; the optimum (0, 0) pays 11 but sits next to -30 penalties."""
    return matrix_game("climbing_game", CLIMBING_PAYOFF, expert=(0, 0))
