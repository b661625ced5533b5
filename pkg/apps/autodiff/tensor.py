"""
Tensor primitives
=================
Dense float64 arrays (``Tensor``) and the dual pair used for forward-mode
differentiation (``DualTensor``).  Activations carry their own
derivative so both the JVP and the backward pass share one definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from django.db import models

from apps.core.exceptions import DimensionError, NumericError

Tensor = npt.NDArray[np.float64]


def as_tensor(value, *, name: str = "tensor") -> Tensor:
    """Coerce to a float64 array; rejects non-finite entries."""
    array = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{name} contains non-finite values")
    return array


def ensure_finite(array: Tensor, *, name: str) -> Tensor:
    if not np.all(np.isfinite(array)):
        bad = array[~np.isfinite(array)].ravel()[0]
        raise NumericError(f"{name} is not finite", value=float(bad))
    return array


@dataclass(frozen=True, slots=True)
class DualTensor:
    """Primal value plus a tangent of the same shape."""

    primal: Tensor
    tangent: Tensor

    def __post_init__(self):
        if np.shape(self.primal) != np.shape(self.tangent):
            raise DimensionError(
                f"tangent shape {np.shape(self.tangent)} does not match "
                f"primal shape {np.shape(self.primal)}"
            )

    @classmethod
    def seed(cls, primal, tangent) -> DualTensor:
        return cls(as_tensor(primal, name="primal"), as_tensor(tangent, name="tangent"))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.primal.shape


class Activation(models.TextChoices):
    TANH = "tanh", "tanh"
    RELU = "relu", "ReLU"
    IDENTITY = "identity", "identity"


def activate(kind: str, z: Tensor) -> Tensor:
    if kind == Activation.TANH:
        return np.tanh(z)
    if kind == Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def activation_derivative(kind: str, z: Tensor) -> Tensor:
    """Elementwise derivative evaluated at the pre-activation ``z``."""
    if kind == Activation.TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == Activation.RELU:
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)
