from __future__ import annotations

import logging

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError

from .fields import VelocityField

logger = logging.getLogger(__name__)


def _rows(obs) -> tuple[int, bool]:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim <= 1:
        return 1, True
    return obs.shape[0], False


def sample_one_step(field: VelocityField, obs, c, rng: np.random.Generator) -> Tensor:
    """a₁ ~ N(0, I); return a₁ - u(a₁, 0, 1 | o, c)."""
    rows, single = _rows(obs)
    a1 = rng.standard_normal((rows, field.action_dim))
    action = a1 - field.evaluate(a1, 0.0, 1.0, obs, _labels(c, rows))
    return action[0] if single else action


def sample_multi_step(field: VelocityField, obs, c, n_steps: int, rng: np.random.Generator) -> Tensor:
    """
    Integrate from k = 1 to 0 on a uniform grid of ``n_steps`` intervals,
    a_r = a_k - (k - r) u(a_k, r, k | o, c).  Flow-matching fields ignore r,
    which makes this the Euler scheme on their instantaneous field.
    """
    if int(n_steps) < 1:
        raise ArgumentError(f"n_steps must be >= 1, got {n_steps}")
    rows, single = _rows(obs)
    labels = _labels(c, rows)
    a = rng.standard_normal((rows, field.action_dim))
    grid = np.linspace(1.0, 0.0, int(n_steps) + 1)
    for k, r in zip(grid[:-1], grid[1:]):
        a = a - (k - r) * field.evaluate(a, r, k, obs, labels)
    return a[0] if single else a


def _labels(c, rows: int) -> np.ndarray:
    labels = np.asarray(1 if c is None else c, dtype=np.int64)
    if labels.ndim == 0:
        return np.full(rows, int(labels), dtype=np.int64)
    return labels.reshape(-1)
