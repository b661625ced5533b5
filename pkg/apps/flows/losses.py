"""
Flow losses
===========
Value functions (``*_loss``) work with any ``VelocityField``; trainable
objectives (``*_objective``) need an ``AvgVelocityNet`` and return a
``params -> LossEvaluation`` closure for ``loss_grad``.

Stop-gradient
~~~~~~~~~~~~~
Targets are computed once, with the network's current parameters,
when an objective is built.  They are plain arrays inside the closure,
so no gradient ever reaches the parameters through them.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from apps.autodiff.mlp import LossEvaluation, MlpParams, squared_error_loss
from apps.autodiff.tensor import Tensor, ensure_finite
from apps.core.exceptions import ArgumentError

from .batches import FlowBatch
from .fields import AvgVelocityNet, FieldKind, VelocityField

logger = logging.getLogger(__name__)

Objective = Callable[[MlpParams], LossEvaluation]


def _mean_squared(prediction: Tensor, target: Tensor) -> float:
    residual = np.atleast_2d(prediction) - np.atleast_2d(target)
    value = float(np.sum(residual * residual) / residual.shape[0])
    ensure_finite(np.asarray(value), name="loss")
    return value


def _conditions(field: VelocityField, batch: FlowBatch, conditional: bool | None) -> np.ndarray:
    is_conditional = getattr(field, "kind", None) == FieldKind.CONDITIONAL_MEANFLOW
    if conditional is None:
        conditional = is_conditional
    if conditional and not is_conditional:
        raise ArgumentError(f"a {field.kind} field cannot be evaluated with condition labels")
    return batch.c if conditional else np.ones(batch.rows, dtype=np.int64)


# ═══════════════════════════════════════════════════════════════════
# FLOW MATCHING
# ═══════════════════════════════════════════════════════════════════


def fm_loss(vnet: VelocityField, batch: FlowBatch) -> float:
    """mean ||v(a_k, k | o) - (ε - a)||²."""
    if vnet.kind != FieldKind.FLOW_MATCHING:
        raise ArgumentError(f"fm_loss needs a flow_matching field, got {vnet.kind}")
    prediction = vnet.evaluate(batch.a_k, batch.k, batch.k, batch.obs)
    return _mean_squared(prediction, batch.velocity)


def fm_objective(vnet: AvgVelocityNet, batch: FlowBatch) -> Objective:
    if vnet.kind != FieldKind.FLOW_MATCHING:
        raise ArgumentError(f"fm_objective needs a flow_matching field, got {vnet.kind}")
    a_k, target = batch.a_k, batch.velocity

    def objective(params: MlpParams) -> LossEvaluation:
        return squared_error_loss(vnet.trace(a_k, batch.k, batch.k, batch.obs, net=params), target)

    return objective


# ═══════════════════════════════════════════════════════════════════
# MEANFLOW
# ═══════════════════════════════════════════════════════════════════


def _average_velocity_target(
    unet: VelocityField,
    batch: FlowBatch,
    c: np.ndarray,
    field: Tensor,
) -> Tensor:
    """field - (k - r) · d/dk u(a_k, r, k | o, c), derivative along (field, 0, 1)."""
    a_k = batch.a_k
    _, du_dk = unet.jvp(
        a_k, batch.r, batch.k, batch.obs, c,
        da=field, dr=np.zeros(batch.rows), dk=np.ones(batch.rows),
    )
    ensure_finite(du_dk, name="MeanFlow JVP")
    return field - (batch.k - batch.r)[:, None] * du_dk


def mf_target(unet: VelocityField, batch: FlowBatch, conditional: bool | None = None) -> Tensor:
    """
    u_tgt = v_c - (k - r) · du/dk with v_c = ε - a.

    ``conditional`` feeds the batch's labels to a conditional field;
    when False a conditional field is evaluated at c = 1.
    """
    c = _conditions(unet, batch, conditional)
    return _average_velocity_target(unet, batch, c, batch.velocity)


def mf_loss(unet: VelocityField, batch: FlowBatch, conditional: bool | None = None) -> float:
    c = _conditions(unet, batch, conditional)
    target = _average_velocity_target(unet, batch, c, batch.velocity)
    prediction = unet.evaluate(batch.a_k, batch.r, batch.k, batch.obs, c)
    return _mean_squared(prediction, target)


def mf_objective(unet: AvgVelocityNet, batch: FlowBatch, conditional: bool | None = None) -> Objective:
    c = _conditions(unet, batch, conditional)
    target = _average_velocity_target(unet, batch, c, batch.velocity)
    a_k = batch.a_k

    def objective(params: MlpParams) -> LossEvaluation:
        return squared_error_loss(unet.trace(a_k, batch.r, batch.k, batch.obs, c, net=params), target)

    return objective


# ═══════════════════════════════════════════════════════════════════
# CLASSIFIER-FREE GUIDANCE
# ═══════════════════════════════════════════════════════════════════


def cfg_field(unet: VelocityField, batch: FlowBatch, omega: float) -> Tensor:
    """
    v_cfg = ω (ε - a) + (1 - ω) u(a_k, k, k | o, c = 1).

    The class-unconditional branch is the model itself at r = k with the
    condition fixed to 1.
    """
    if not np.isfinite(omega):
        raise ArgumentError(f"omega must be finite, got {omega}")
    unconditional = unet.evaluate(batch.a_k, batch.k, batch.k, batch.obs, np.ones(batch.rows, dtype=np.int64))
    return omega * batch.velocity + (1.0 - omega) * unconditional


def vgmp_target(unet: VelocityField, batch: FlowBatch, omega: float) -> Tensor:
    v_cfg = cfg_field(unet, batch, omega)
    return _average_velocity_target(unet, batch, batch.c, v_cfg)


def vgmp_loss(unet: VelocityField, batch: FlowBatch, omega: float) -> float:
    """mean ||u(a_k, r, k | o, c) - sg(v_cfg - (k - r) du/dk)||²."""
    target = vgmp_target(unet, batch, omega)
    prediction = unet.evaluate(batch.a_k, batch.r, batch.k, batch.obs, batch.c)
    return _mean_squared(prediction, target)


def vgmp_objective(unet: AvgVelocityNet, batch: FlowBatch, omega: float) -> Objective:
    if not unet.conditional:
        raise ArgumentError("vgmp_objective needs a conditional_meanflow field")
    target = vgmp_target(unet, batch, omega)
    a_k = batch.a_k

    def objective(params: MlpParams) -> LossEvaluation:
        return squared_error_loss(
            unet.trace(a_k, batch.r, batch.k, batch.obs, batch.c, net=params), target
        )

    return objective


# ═══════════════════════════════════════════════════════════════════
# SAMPLE QUALITY
# ═══════════════════════════════════════════════════════════════════


def energy_distance(x, y) -> float:
    """2 E|X - Y| - E|X - X'| - E|Y - Y'| between two sample sets."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))

    def mean_pairwise(p, q):
        return float(np.mean(np.linalg.norm(p[:, None, :] - q[None, :, :], axis=-1)))

    return 2.0 * mean_pairwise(x, y) - mean_pairwise(x, x) - mean_pairwise(y, y)
