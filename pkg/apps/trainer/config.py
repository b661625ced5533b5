"""
Training configuration.

Defaults come from ``settings.VGM2P`` (each overridable through a
``VGM2P_<NAME>`` environment variable); keyword overrides win.  Every
resolved config passes through ``TrainConfigSerializer``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Any

from django.conf import settings
from django.db import models
from rest_framework import serializers

from apps.autodiff.tensor import Activation
from apps.core.exceptions import ArgumentError


class Method(models.TextChoices):
    VGM2P = "vgm2p", "Value-guided conditional MeanFlow"
    BC_FM = "bc-fm", "Behaviour cloning, Flow Matching"
    BC_MF = "bc-mf", "Behaviour cloning, MeanFlow"


class CriticMode(models.TextChoices):
    JOINT = "joint", "Joint TD on the summed value"
    INDEPENDENT = "independent", "Per-agent TD"


@dataclass(frozen=True)
class TrainConfig:
    omega: float = 5.0
    gamma: float = 0.995
    lr: float = 3e-4
    batch_size: int = 64
    gradient_steps: int = 20_000
    hidden_dims: tuple[int, ...] = (64, 64)
    activation: str = Activation.TANH
    tau: float = 0.005
    r_equals_k_fraction: float = 0.25
    eval_every: int = 500
    eval_episodes: int = 10
    fm_sampling_steps: int = 10
    lambda_temp: float = 1.0
    seed: int = 0
    shared: bool = True
    critic: str = CriticMode.JOINT
    agent_id_features: bool = True

    _SETTINGS_KEYS = {
        "omega": "OMEGA",
        "gamma": "GAMMA",
        "lr": "LR",
        "batch_size": "BATCH_SIZE",
        "gradient_steps": "GRADIENT_STEPS",
        "hidden_dims": "HIDDEN_DIMS",
        "activation": "ACTIVATION",
        "tau": "TAU",
        "r_equals_k_fraction": "R_EQUALS_K_FRACTION",
        "eval_every": "EVAL_EVERY",
        "eval_episodes": "EVAL_EPISODES",
        "fm_sampling_steps": "FM_SAMPLING_STEPS",
    }

    @classmethod
    def from_settings(cls, **overrides) -> TrainConfig:
        defaults = getattr(settings, "VGM2P", {})
        values: dict[str, Any] = {
            name: defaults[key] for name, key in cls._SETTINGS_KEYS.items() if key in defaults
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ArgumentError(f"unknown config field(s): {sorted(unknown)}")
        serializer = TrainConfigSerializer(data={**asdict(cls()), **data})
        if not serializer.is_valid():
            raise ArgumentError(serializer.errors)
        validated = dict(serializer.validated_data)
        validated["hidden_dims"] = tuple(validated["hidden_dims"])
        return cls(**validated)

    def as_dict(self) -> dict:
        data = asdict(self)
        data["hidden_dims"] = list(self.hidden_dims)
        return data

    def with_overrides(self, **overrides) -> TrainConfig:
        return TrainConfig.from_dict({**self.as_dict(), **overrides})


class TrainConfigSerializer(serializers.Serializer):
    omega = serializers.FloatField()
    gamma = serializers.FloatField(min_value=0.0)
    lr = serializers.FloatField(min_value=0.0)
    batch_size = serializers.IntegerField(min_value=1)
    gradient_steps = serializers.IntegerField(min_value=0)
    hidden_dims = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=True)
    activation = serializers.ChoiceField(choices=Activation.choices)
    tau = serializers.FloatField(min_value=0.0, max_value=1.0)
    r_equals_k_fraction = serializers.FloatField(min_value=0.0, max_value=1.0)
    eval_every = serializers.IntegerField(min_value=1)
    eval_episodes = serializers.IntegerField(min_value=1)
    fm_sampling_steps = serializers.IntegerField(min_value=1)
    lambda_temp = serializers.FloatField()
    seed = serializers.IntegerField(min_value=0)
    shared = serializers.BooleanField()
    critic = serializers.ChoiceField(choices=CriticMode.choices)
    agent_id_features = serializers.BooleanField()

    def validate_gamma(self, value):
        if value >= 1.0:
            raise serializers.ValidationError("gamma must be < 1")
        return value

    def validate_omega(self, value):
        if not math.isfinite(value):
            raise serializers.ValidationError("omega must be finite")
        return value

    def validate_lambda_temp(self, value):
        if not value > 0:
            raise serializers.ValidationError("lambda_temp must be positive")
        return value
