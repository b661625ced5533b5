from __future__ import annotations

from apps.core.exceptions import ArgumentError

from .spread import ContinuousSpreadEnv, spread_env
from .tabular import TabularDecPOMDP, additive_game, chain_game, climbing_game

Environment = TabularDecPOMDP | ContinuousSpreadEnv


def make_reference_envs() -> dict[str, Environment]:
    """
    The desk-scale suite, keyed by name.

    ========================  ==================  ====================
    name                      kind                reference return
    ========================  ==================  ====================
    ``additive_game``         one-step, 2 × 3     2.0
    ``climbing_game``         one-step, 2 × 3     11.0
    ``chain``                 5 states, T = 8     6.5
    ``spread``                continuous, 2 ag.   scripted expert, MC
    ========================  ==================  ====================
    """
    return {
        "additive_game": additive_game(),
        "climbing_game": climbing_game(),
        "chain": chain_game(),
        "spread": spread_env(),
    }


def get_env(name: str) -> Environment:
    suite = make_reference_envs()
    if name not in suite:
        raise ArgumentError(f"unknown environment {name!r}; choose from {sorted(suite)}")
    return suite[name]
