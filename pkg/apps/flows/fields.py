"""
Velocity fields
===============
``AvgVelocityNet`` wraps an MLP with the input layout of one of three
field kinds:

* ``flow_matching``         concat(a_k, k, o)                 → v(a_k, k | o)
* ``meanflow``              concat(a_k, k, r, o)              → u(a_k, r, k | o)
* ``conditional_meanflow``  concat(a_k, k, r, o, onehot(c))   → u(a_k, r, k | o, c)

The one-hot condition feeds the first layer directly, so the first
layer's two condition columns are the learned per-condition embedding.

Every field exposes ``evaluate`` and ``jvp`` with the same signature;
flow-matching fields ignore ``r`` and every unconditional field ignores
``c``.  ``PointMassField`` is the closed-form average velocity of a
dataset concentrated on one action and is used as a reference.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np
from django.db import models

from apps.autodiff.mlp import MlpParams, MlpTrace, mlp_forward, mlp_jvp, mlp_trace
from apps.autodiff.tensor import Activation, DualTensor, Tensor
from apps.core.exceptions import ArgumentError, DimensionError, NumericError

logger = logging.getLogger(__name__)

N_CONDITIONS = 2


class FieldKind(models.TextChoices):
    FLOW_MATCHING = "flow_matching", "Flow Matching"
    MEANFLOW = "meanflow", "MeanFlow"
    CONDITIONAL_MEANFLOW = "conditional_meanflow", "Conditional MeanFlow"


class VelocityField(Protocol):
    kind: str
    action_dim: int

    def evaluate(self, a, r, k, obs, c=None) -> Tensor: ...

    def jvp(self, a, r, k, obs, c, da, dr, dk) -> tuple[Tensor, Tensor]: ...


# ═══════════════════════════════════════════════════════════════════
# BROADCAST HELPERS
# ═══════════════════════════════════════════════════════════════════


def as_rows(a, width: int, *, name: str) -> Tensor:
    array = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if array.ndim != 2 or array.shape[1] != width:
        raise DimensionError(f"{name} must have width {width}, got shape {np.shape(a)}")
    return array


def as_column(t, rows: int, *, name: str) -> Tensor:
    """Scalar or ``(B,)`` time → ``(B, 1)``."""
    array = np.asarray(t, dtype=np.float64)
    if array.ndim == 0:
        return np.full((rows, 1), float(array))
    array = array.reshape(-1, 1)
    if array.shape[0] != rows:
        raise DimensionError(f"{name} has {array.shape[0]} rows, expected {rows}")
    return array


def condition_one_hot(c, rows: int) -> Tensor:
    labels = np.asarray(1 if c is None else c)
    labels = np.full(rows, int(labels)) if labels.ndim == 0 else labels.reshape(-1)
    if labels.shape[0] != rows:
        raise DimensionError(f"condition labels have {labels.shape[0]} rows, expected {rows}")
    if not np.all((labels == 0) | (labels == 1)):
        raise ArgumentError("condition labels must be 0 or 1")
    return np.eye(N_CONDITIONS)[labels.astype(int)]


# ═══════════════════════════════════════════════════════════════════
# NETWORK FIELD
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class AvgVelocityNet:
    net: MlpParams
    action_dim: int
    obs_dim: int
    kind: str = FieldKind.CONDITIONAL_MEANFLOW

    def __post_init__(self):
        expected = self.input_width(self.kind, self.action_dim, self.obs_dim)
        if self.net.input_dim != expected:
            raise DimensionError(
                f"{self.kind} layout needs input width {expected}, network has {self.net.input_dim}"
            )
        if self.net.output_dim != self.action_dim:
            raise DimensionError(
                f"network output width {self.net.output_dim} != action_dim {self.action_dim}"
            )

    @classmethod
    def create(
        cls,
        *,
        action_dim: int,
        obs_dim: int,
        hidden_dims: Sequence[int] = (64, 64),
        kind: str = FieldKind.CONDITIONAL_MEANFLOW,
        activation: str = Activation.TANH,
        seed: int = 0,
    ) -> AvgVelocityNet:
        width = cls.input_width(kind, action_dim, obs_dim)
        net = MlpParams.initialize([width, *hidden_dims, action_dim], activation=activation, seed=seed)
        return cls(net=net, action_dim=action_dim, obs_dim=obs_dim, kind=kind)

    @staticmethod
    def input_width(kind: str, action_dim: int, obs_dim: int) -> int:
        if kind == FieldKind.FLOW_MATCHING:
            return action_dim + 1 + obs_dim
        if kind == FieldKind.MEANFLOW:
            return action_dim + 2 + obs_dim
        if kind == FieldKind.CONDITIONAL_MEANFLOW:
            return action_dim + 2 + obs_dim + N_CONDITIONS
        raise ArgumentError(f"unknown field kind {kind!r}")

    @property
    def conditional(self) -> bool:
        return self.kind == FieldKind.CONDITIONAL_MEANFLOW

    def with_net(self, net: MlpParams) -> AvgVelocityNet:
        return replace(self, net=net)

    # ── Input assembly ───────────────────────────────────────────

    def features(self, a, r, k, obs, c=None) -> Tensor:
        a = as_rows(a, self.action_dim, name="action")
        rows = a.shape[0]
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim == 1:
            obs = np.broadcast_to(obs, (rows, obs.shape[0]))
        obs = as_rows(obs, self.obs_dim, name="observation")
        if obs.shape[0] != rows:
            raise DimensionError(f"observation has {obs.shape[0]} rows, action has {rows}")
        columns = [a, as_column(k, rows, name="k")]
        if self.kind != FieldKind.FLOW_MATCHING:
            columns.append(as_column(r, rows, name="r"))
        columns.append(obs)
        if self.conditional:
            columns.append(condition_one_hot(c, rows))
        return np.concatenate(columns, axis=1)

    def tangent_features(self, da, dr, dk, rows: int) -> Tensor:
        """Tangent in input space: obs and condition are held fixed."""
        columns = [as_rows(da, self.action_dim, name="action tangent"), as_column(dk, rows, name="dk")]
        if self.kind != FieldKind.FLOW_MATCHING:
            columns.append(as_column(dr, rows, name="dr"))
        fixed = self.obs_dim + (N_CONDITIONS if self.conditional else 0)
        columns.append(np.zeros((rows, fixed)))
        return np.concatenate(columns, axis=1)

    # ── Evaluation ───────────────────────────────────────────────

    def evaluate(self, a, r, k, obs, c=None) -> Tensor:
        return mlp_forward(self.net, self.features(a, r, k, obs, c))

    def jvp(self, a, r, k, obs, c, da, dr, dk) -> tuple[Tensor, Tensor]:
        x = self.features(a, r, k, obs, c)
        out = mlp_jvp(self.net, DualTensor(x, self.tangent_features(da, dr, dk, x.shape[0])))
        return out.primal, out.tangent

    def trace(self, a, r, k, obs, c=None, net: MlpParams | None = None) -> MlpTrace:
        return mlp_trace(net or self.net, self.features(a, r, k, obs, c))


# ═══════════════════════════════════════════════════════════════════
# ANALYTIC FIELD
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class PointMassField:
    """
    Exact average velocity when every data action equals ``x0``.

    Along a_k = (1-k) x0 + k ε the field is u(x, r, k) = (x - x0) / k,
    independent of r, o and c, and its total k-derivative along
    (ε - x0, 0, 1) vanishes.
    """

    x0: Tensor
    kind: str = FieldKind.CONDITIONAL_MEANFLOW

    @property
    def action_dim(self) -> int:
        return int(np.asarray(self.x0).shape[-1])

    def _k(self, k, rows):
        column = as_column(k, rows, name="k")
        if np.any(column == 0.0):
            raise NumericError("point-mass field is undefined at k = 0", value=0.0)
        return column

    def evaluate(self, a, r, k, obs=None, c=None) -> Tensor:
        a = as_rows(a, self.action_dim, name="action")
        return (a - self.x0) / self._k(k, a.shape[0])

    def jvp(self, a, r, k, obs, c, da, dr, dk) -> tuple[Tensor, Tensor]:
        a = as_rows(a, self.action_dim, name="action")
        kk = self._k(k, a.shape[0])
        u = (a - self.x0) / kk
        du = as_rows(da, self.action_dim, name="action tangent") / kk - u / kk * as_column(
            dk, a.shape[0], name="dk"
        )
        return u, du
