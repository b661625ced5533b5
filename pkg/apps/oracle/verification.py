"""
Batch numerical verification.

``run_verification`` builds random instances per seed and returns one
report dict per instance; ``write_reports`` emits them as one
structured-text line each.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from django.db import models

from apps.autodiff.mlp import MlpParams, mlp_forward, mlp_jvp
from apps.autodiff.tensor import Activation, DualTensor
from apps.core.exceptions import ArgumentError
from apps.core.renderers import render_line
from apps.flows.batches import make_flow_batch
from apps.flows.fields import PointMassField
from apps.flows.losses import mf_target

from .evaluation import random_policy
from .propositions import igm_check, verify_proposition_1, verify_proposition_2
from .tables import ExactQ

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.1, 1.0, 10.0)
JVP_TOLERANCE = 1e-4
JVP_MAX_DEPTH = 4
JVP_MAX_WIDTH = 64
# finite differences straddle relu kinks; smooth and linear layers only
JVP_ACTIVATIONS = (Activation.TANH, Activation.IDENTITY)
MEANFLOW_TOLERANCE = 1e-10


class Check(models.TextChoices):
    PROP1 = "prop1", "Value-guided conditioning equals the optimal policy"
    PROP2 = "prop2", "Factorised conditioning equals the joint optimum"
    IGM = "igm", "Individual-global-max consistency"
    JVP = "jvp", "Forward-mode derivative vs finite differences"
    MEANFLOW = "meanflow", "MeanFlow target fixed point"


def _prop1(seed: int, lambdas: Sequence[float]) -> list[dict]:
    rng = np.random.default_rng(seed)
    beta = random_policy(rng, 4, 3)
    q = ExactQ(rng.normal(size=(4, 3)))
    return [
        {"check": Check.PROP1.value, "seed": seed, "lambda": lam, **verify_proposition_1(beta, q, lam)}
        for lam in lambdas
    ]


def _prop2(seed: int, lambdas: Sequence[float]) -> list[dict]:
    rng = np.random.default_rng(seed)
    betas = [random_policy(rng, 2, 3) for _ in range(2)]
    tables = [ExactQ(rng.normal(size=(2, 3))) for _ in range(2)]
    return [
        {"check": Check.PROP2.value, "seed": seed, "lambda": lam, **verify_proposition_2(betas, tables, lam)}
        for lam in lambdas
    ]


def _igm(seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    tables = [ExactQ(rng.normal(size=(2, 3))) for _ in range(2)]
    reports = []
    for joint_obs in ((0, 0), (0, 1), (1, 0), (1, 1)):
        result = igm_check(tables, joint_obs)
        reports.append(
            {
                "check": Check.IGM.value,
                "seed": seed,
                "joint_obs": list(joint_obs),
                **result,
                "pass": result["consistent"],
            }
        )
    return reports


def _jvp(seed: int) -> list[dict]:
    """Random depth-1..4 MLP; relative error of the tangent against central differences."""
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, JVP_MAX_DEPTH + 1))
    sizes = [int(s) for s in rng.integers(2, JVP_MAX_WIDTH + 1, size=depth + 1)]
    activations = [str(JVP_ACTIVATIONS[i]) for i in rng.integers(0, len(JVP_ACTIVATIONS), size=depth - 1)]
    params = MlpParams.initialize(sizes, activations, seed=seed)
    x = rng.normal(size=(8, sizes[0]))
    v = rng.normal(size=(8, sizes[0]))
    h = 1e-5
    finite = (mlp_forward(params, x + h * v) - mlp_forward(params, x - h * v)) / (2 * h)
    tangent = mlp_jvp(params, DualTensor(x, v)).tangent
    error = float(np.linalg.norm(tangent - finite) / max(float(np.linalg.norm(finite)), 1e-12))
    return [
        {
            "check": Check.JVP.value,
            "seed": seed,
            "sizes": sizes,
            "activations": activations,
            "relative_error": error,
            "pass": error <= JVP_TOLERANCE,
        }
    ]


def _meanflow(seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=2)
    field = PointMassField(x0=x0)
    rows = 64
    batch = make_flow_batch(np.zeros((rows, 1)), np.tile(x0, (rows, 1)), None, rng)
    target = mf_target(field, batch)
    prediction = field.evaluate(batch.a_k, batch.r, batch.k)
    error = float(np.max(np.abs(target - prediction)))
    return [
        {"check": Check.MEANFLOW.value, "seed": seed, "max_error": error, "pass": error <= MEANFLOW_TOLERANCE}
    ]


def run_verification(
    check: str,
    seeds: Iterable[int],
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
) -> list[dict]:
    if check not in Check.values:
        raise ArgumentError(f"unknown check {check!r}; choose from {Check.values}")
    reports: list[dict] = []
    for seed in seeds:
        seed = int(seed)
        if check == Check.PROP1:
            reports.extend(_prop1(seed, lambdas))
        elif check == Check.PROP2:
            reports.extend(_prop2(seed, lambdas))
        elif check == Check.IGM:
            reports.extend(_igm(seed))
        elif check == Check.JVP:
            reports.extend(_jvp(seed))
        else:
            reports.extend(_meanflow(seed))
    failed = sum(not r["pass"] for r in reports)
    logger.info("Verification %s: %d instance(s), %d failed", check, len(reports), failed)
    return reports


def write_reports(path: str | Path, reports: Sequence[dict]) -> None:
    with open(path, "wb") as fh:
        for report in reports:
            fh.write(render_line(report) + b"\n")
