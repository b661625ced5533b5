"""
Multilayer perceptrons
======================
Parameters, forward pass, forward-mode JVP and the reverse-mode pass
used by every training loss in the project.

Layout
~~~~~~
``Layer.weight`` has shape ``(out, in)`` and a layer computes
``h @ W.T + b``.  Hidden layers apply their activation; the last layer
is always affine.  Inputs may be a single row ``(in,)`` or a batch
``(B, in)``; outputs keep the same rank.

Reverse mode
~~~~~~~~~~~~
A scalar loss is any callable ``params -> LossEvaluation``.  The
evaluation carries the loss value and one ``Pullback`` per network
evaluation that contributed to it (trace + cotangent of the loss with
respect to that evaluation's output).  ``loss_grad`` sums the pulled
back gradients per parameter slot.  Anything not traced (targets,
bootstrapped values) is a constant, which is how stop-gradient is
realised.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from apps.core.exceptions import DimensionError, NumericError

from .tensor import (
    Activation,
    DualTensor,
    Tensor,
    activate,
    activation_derivative,
    ensure_finite,
)

logger = logging.getLogger(__name__)


# ═══════════════════════════════════════════════════════════════════
# PARAMETERS
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True, slots=True)
class Layer:
    weight: Tensor
    bias: Tensor

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True)
class MlpParams:
    """Immutable MLP parameters; also used to hold gradients and Adam moments."""

    layers: tuple[Layer, ...]
    activations: tuple[str, ...]
    seed: int = 0

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("an MLP needs at least one layer")
        if len(self.activations) != len(self.layers) - 1:
            raise DimensionError(
                f"{len(self.layers) - 1} hidden layer(s) need as many activations, "
                f"got {len(self.activations)}"
            )
        for idx, layer in enumerate(self.layers):
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.out_dim,):
                raise DimensionError(f"layer {idx}: weight/bias shapes do not agree")
            if idx and layer.in_dim != self.layers[idx - 1].out_dim:
                raise DimensionError(
                    f"layer {idx} expects width {layer.in_dim}, "
                    f"layer {idx - 1} produces {self.layers[idx - 1].out_dim}"
                )

    # ── Construction ─────────────────────────────────────────────

    @classmethod
    def initialize(
        cls,
        sizes: Sequence[int],
        activation: str | Sequence[str] = Activation.TANH,
        seed: int = 0,
    ) -> MlpParams:
        """
        Uniform init in ``±sqrt(6 / (fan_in + fan_out))`` with zero biases.

        ``sizes`` lists every width including input and output, e.g.
        ``[obs_dim, 64, 64, 1]``.
        """
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise DimensionError(f"invalid layer sizes {list(sizes)}")
        n_hidden = len(sizes) - 2
        if isinstance(activation, str):
            activations = (str(activation),) * n_hidden
        else:
            activations = tuple(str(a) for a in activation)
        rng = np.random.default_rng(seed)
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            layers.append(Layer(weight=weight, bias=np.zeros(fan_out)))
        return cls(layers=tuple(layers), activations=activations, seed=seed)

    @classmethod
    def affine(cls, weight, bias) -> MlpParams:
        """Single linear layer with the given weight ``(out, in)`` and bias."""
        weight = np.atleast_2d(np.asarray(weight, dtype=np.float64))
        bias = np.atleast_1d(np.asarray(bias, dtype=np.float64))
        return cls(layers=(Layer(weight=weight, bias=bias),), activations=())

    # ── Shape helpers ────────────────────────────────────────────

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    # ── Tree helpers (params / grads / moments share this shape) ──

    def arrays(self) -> tuple[Tensor, ...]:
        out: list[Tensor] = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return tuple(out)

    def with_arrays(self, arrays: Sequence[Tensor]) -> MlpParams:
        if len(arrays) != 2 * len(self.layers):
            raise DimensionError(
                f"expected {2 * len(self.layers)} arrays, got {len(arrays)}"
            )
        layers = []
        for idx, layer in enumerate(self.layers):
            weight = np.asarray(arrays[2 * idx], dtype=np.float64)
            bias = np.asarray(arrays[2 * idx + 1], dtype=np.float64)
            if weight.shape != layer.weight.shape or bias.shape != layer.bias.shape:
                raise DimensionError(f"layer {idx}: replacement shapes do not mirror params")
            layers.append(Layer(weight=weight, bias=bias))
        return MlpParams(layers=tuple(layers), activations=self.activations, seed=self.seed)

    def map(self, fn: Callable[..., Tensor], *others: MlpParams) -> MlpParams:
        columns = zip(self.arrays(), *(o.arrays() for o in others))
        return self.with_arrays([fn(*column) for column in columns])

    def zeros_like(self) -> MlpParams:
        return self.map(np.zeros_like)

    def n_parameters(self) -> int:
        return sum(a.size for a in self.arrays())


# ═══════════════════════════════════════════════════════════════════
# FORWARD / JVP
# ═══════════════════════════════════════════════════════════════════


def _as_batch(params: MlpParams, x) -> tuple[Tensor, bool]:
    array = np.asarray(x, dtype=np.float64)
    single = array.ndim == 1
    array = np.atleast_2d(array)
    if array.ndim != 2:
        raise DimensionError(f"layer 0 expects a vector or a (batch, width) matrix, got {array.shape}")
    if array.shape[1] != params.input_dim:
        raise DimensionError(
            f"layer 0 expects input width {params.input_dim}, got {array.shape[1]}"
        )
    return array, single


def mlp_forward(params: MlpParams, x) -> Tensor:
    h, single = _as_batch(params, x)
    last = len(params.layers) - 1
    for idx, layer in enumerate(params.layers):
        z = h @ layer.weight.T + layer.bias
        h = activate(params.activations[idx], z) if idx < last else z
    ensure_finite(h, name="MLP output")
    return h[0] if single else h


def mlp_jvp(params: MlpParams, x: DualTensor) -> DualTensor:
    """Push ``x.tangent`` through the network alongside ``x.primal``."""
    h, single = _as_batch(params, x.primal)
    dh = np.atleast_2d(np.asarray(x.tangent, dtype=np.float64))
    last = len(params.layers) - 1
    for idx, layer in enumerate(params.layers):
        z = h @ layer.weight.T + layer.bias
        dz = dh @ layer.weight.T
        if idx < last:
            kind = params.activations[idx]
            dh = activation_derivative(kind, z) * dz
            h = activate(kind, z)
        else:
            h, dh = z, dz
    ensure_finite(h, name="MLP output")
    ensure_finite(dh, name="JVP tangent")
    if single:
        return DualTensor(h[0], dh[0])
    return DualTensor(h, dh)


# ═══════════════════════════════════════════════════════════════════
# REVERSE MODE
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class MlpTrace:
    """Intermediate values of one forward pass, kept for the backward pass."""

    params: MlpParams
    inputs: tuple[Tensor, ...]
    preacts: tuple[Tensor, ...]
    output: Tensor
    single: bool = False

    def backward(self, cotangent) -> tuple[MlpParams, Tensor]:
        """Return (parameter gradients, input cotangent) for ``cotangent`` = dL/d(output)."""
        delta = np.atleast_2d(np.asarray(cotangent, dtype=np.float64))
        if delta.shape != np.atleast_2d(self.output).shape:
            raise DimensionError(
                f"cotangent shape {delta.shape} does not match output "
                f"{np.atleast_2d(self.output).shape}"
            )
        layers = self.params.layers
        last = len(layers) - 1
        grads: list[Tensor] = [np.empty(0)] * (2 * len(layers))
        for idx in reversed(range(len(layers))):
            if idx < last:
                delta = delta * activation_derivative(
                    self.params.activations[idx], self.preacts[idx]
                )
            grads[2 * idx] = delta.T @ self.inputs[idx]
            grads[2 * idx + 1] = delta.sum(axis=0)
            delta = delta @ layers[idx].weight
        input_grad = delta[0] if self.single else delta
        return self.params.with_arrays(grads), input_grad


def mlp_trace(params: MlpParams, x) -> MlpTrace:
    h, single = _as_batch(params, x)
    inputs, preacts = [], []
    last = len(params.layers) - 1
    for idx, layer in enumerate(params.layers):
        inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        preacts.append(z)
        h = activate(params.activations[idx], z) if idx < last else z
    ensure_finite(h, name="MLP output")
    output = h[0] if single else h
    return MlpTrace(
        params=params,
        inputs=tuple(inputs),
        preacts=tuple(preacts),
        output=output,
        single=single,
    )


@dataclass(frozen=True)
class Pullback:
    trace: MlpTrace
    cotangent: Tensor
    slot: int = 0


@dataclass(frozen=True)
class LossEvaluation:
    value: float
    pullbacks: tuple[Pullback, ...] = field(default_factory=tuple)


ScalarLoss = Callable[[MlpParams | tuple[MlpParams, ...]], LossEvaluation]


def loss_grad(
    params: MlpParams | Sequence[MlpParams],
    loss: ScalarLoss,
) -> tuple[float, MlpParams | tuple[MlpParams, ...]]:
    """
    Evaluate ``loss(params)`` and its gradient.

    ``params`` is a single network or a sequence of networks (slots);
    the gradient comes back in the same structure.
    """
    single = isinstance(params, MlpParams)
    slots = (params,) if single else tuple(params)
    evaluation = loss(params if single else slots)
    value = float(evaluation.value)
    if not np.isfinite(value):
        raise NumericError(f"loss is not finite ({value})", value=value)

    grads = [p.zeros_like() for p in slots]
    for pullback in evaluation.pullbacks:
        if not 0 <= pullback.slot < len(slots):
            raise DimensionError(f"pullback slot {pullback.slot} out of range")
        contribution, _ = pullback.trace.backward(pullback.cotangent)
        grads[pullback.slot] = grads[pullback.slot].map(np.add, contribution)
    return value, (grads[0] if single else tuple(grads))


def squared_error_loss(trace: MlpTrace, target, slot: int = 0) -> LossEvaluation:
    """
    ``mean_b ||output_b - target_b||²`` with ``target`` held constant.

    The building block of every regression loss here (FM, MeanFlow, TD).
    """
    output = np.atleast_2d(trace.output)
    residual = output - np.atleast_2d(np.asarray(target, dtype=np.float64))
    batch = residual.shape[0]
    value = float(np.sum(residual * residual) / batch)
    cotangent = 2.0 * residual / batch
    if trace.single:
        cotangent = cotangent[0]
    return LossEvaluation(value=value, pullbacks=(Pullback(trace, cotangent, slot),))
