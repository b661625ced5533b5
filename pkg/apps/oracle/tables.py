from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from django.conf import settings

from apps.core.exceptions import ArgumentError, EnumerationSizeError, NumericError

ROW_TOLERANCE = 1e-12

DEFAULT_ENUMERATION_CAP = 10**6


def enumeration_cap() -> int:
    return int(getattr(settings, "VGM2P", {}).get("ENUMERATION_CAP", DEFAULT_ENUMERATION_CAP))


def check_enumeration_size(joint_size: int, cap: int | None = None) -> None:
    """Refuse joint enumerations larger than ``cap`` (``settings.VGM2P["ENUMERATION_CAP"]`` when None)."""
    cap = enumeration_cap() if cap is None else cap
    if joint_size > cap:
        raise EnumerationSizeError(f"joint action space has {joint_size} entries, cap is {cap}")


@dataclass(frozen=True, eq=False)
class ExactPolicy:
    """π(a | o) as an ``(n_obs, n_actions)`` table; rows are distributions."""

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2:
            raise ArgumentError(f"policy table must be 2-D, got shape {table.shape}")
        if np.any(table < 0) or np.max(np.abs(table.sum(axis=1) - 1.0)) > ROW_TOLERANCE:
            raise ArgumentError("policy rows must be non-negative and sum to 1")
        object.__setattr__(self, "table", table)

    @classmethod
    def normalized(cls, weights) -> ExactPolicy:
        weights = np.asarray(weights, dtype=np.float64)
        return cls(weights / weights.sum(axis=1, keepdims=True))

    @classmethod
    def uniform(cls, n_obs: int, n_actions: int) -> ExactPolicy:
        return cls(np.full((n_obs, n_actions), 1.0 / n_actions))

    @property
    def n_obs(self) -> int:
        return int(self.table.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.table.shape[1])

    def support(self) -> np.ndarray:
        return self.table > 0


@dataclass(frozen=True, eq=False)
class ExactQ:
    """Q over (observation or state, action or joint action index)."""

    table: np.ndarray
    lambda_temp: float | None = None

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2:
            raise ArgumentError(f"Q table must be 2-D, got shape {table.shape}")
        if not np.all(np.isfinite(table)):
            raise NumericError("Q table has non-finite entries")
        object.__setattr__(self, "table", table)

    def values(self, policy: ExactPolicy) -> np.ndarray:
        """V(o) = Σ_a π(a|o) Q(o, a)."""
        return np.sum(policy.table * self.table, axis=1)


def total_variation(p, q) -> float:
    """Largest per-row total-variation distance ½ Σ |p - q| over the last axis."""
    p = np.atleast_2d(np.asarray(getattr(p, "table", p), dtype=np.float64))
    q = np.atleast_2d(np.asarray(getattr(q, "table", q), dtype=np.float64))
    if p.shape != q.shape:
        raise ArgumentError(f"cannot compare distributions of shapes {p.shape} and {q.shape}")
    return float(np.max(0.5 * np.sum(np.abs(p - q), axis=-1)))
