"""
Celery tasks for the trainer app.

Tasks
-----
1. ``train_and_evaluate``
   → Generates an offline dataset, trains one method on it and returns
     the final evaluation return (one ablation cell).

``run_sweep`` is the dispatcher: it expands a named sweep into a
``group`` of ``train_and_evaluate`` calls over seeds and collects one
row per (variant, seed).  In eager mode (tests, desk runs) the group
executes in-process.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

from celery import group, shared_task
from django.db import models

from apps.core.exceptions import ArgumentError
from apps.environments.datasets import Tier, generate_offline_dataset
from apps.environments.registry import get_env

from .config import CriticMode, Method, TrainConfig
from .training_service import fit

logger = logging.getLogger(__name__)


class Sweep(models.TextChoices):
    BC = "bc", "Value guidance vs MeanFlow behaviour cloning"
    IGM = "igm", "Joint vs independent critic"
    OMEGA = "omega", "Guidance weight"


OMEGA_GRID = (3.0, 5.0, 10.0, 20.0)


# ═══════════════════════════════════════════════════════════════════
# 1. TRAIN AND EVALUATE ONE CELL
# ═══════════════════════════════════════════════════════════════════

@shared_task(
    name="apps.trainer.tasks.train_and_evaluate",
    bind=True,
    acks_late=True,
)
def train_and_evaluate(
    self,
    *,
    method: str,
    env_name: str,
    seed: int,
    tier: str = Tier.MIXED,
    n_transitions: int = 2000,
    variant: str = "",
    overrides: dict | None = None,
) -> dict:
    env = get_env(env_name)
    cfg = TrainConfig.from_settings(**{**(overrides or {}), "seed": seed})
    dataset = generate_offline_dataset(env, n_transitions, tier, seed)
    _, report = fit(method, dataset, env, cfg)
    final = report.evaluations.iloc[-1]
    row = {
        "variant": variant or str(method),
        "method": str(method),
        "env": env_name,
        "tier": str(tier),
        "seed": int(seed),
        "omega": cfg.omega,
        "critic": str(cfg.critic),
        "final_return_mean": float(final["eval_return_mean"]),
        "final_return_std": float(final["eval_return_std"]),
        "dataset_mean_return": dataset.mean_return(),
        "optimum": env.documented_optimum,
    }
    logger.info(
        "Sweep cell %s/%s seed %d: return %.4f", env_name, row["variant"], seed, row["final_return_mean"]
    )
    return row


# ═══════════════════════════════════════════════════════════════════
# SWEEP DISPATCH
# ═══════════════════════════════════════════════════════════════════


def sweep_cells(
    sweep: str, seeds: Sequence[int], overrides: dict | None = None, n_transitions: int = 2000
) -> list[dict]:
    """Keyword arguments of every ``train_and_evaluate`` call in ``sweep``."""
    overrides = dict(overrides or {})
    cells: list[dict] = []
    if sweep == Sweep.BC:
        for env_name in ("additive_game", "spread"):
            for method in (Method.VGM2P, Method.BC_MF):
                cells.append(
                    {"method": method.value, "env_name": env_name, "variant": method.value, "overrides": overrides}
                )
    elif sweep == Sweep.IGM:
        for critic in (CriticMode.JOINT, CriticMode.INDEPENDENT):
            cells.append(
                {
                    "method": Method.VGM2P.value,
                    "env_name": "chain",
                    "variant": critic.value,
                    "overrides": {**overrides, "critic": critic.value},
                }
            )
    elif sweep == Sweep.OMEGA:
        for omega in OMEGA_GRID:
            cells.append(
                {
                    "method": Method.VGM2P.value,
                    "env_name": "spread",
                    "variant": f"omega={omega:g}",
                    "overrides": {**overrides, "omega": omega},
                }
            )
    else:
        raise ArgumentError(f"unknown sweep {sweep!r}; expected one of {Sweep.values}")
    return [{**cell, "seed": int(seed), "n_transitions": n_transitions} for cell in cells for seed in seeds]


def run_sweep(
    sweep: str,
    seeds: Sequence[int],
    overrides: dict | None = None,
    n_transitions: int = 2000,
    timeout: float | None = None,
) -> list[dict]:
    cells = sweep_cells(sweep, seeds, overrides, n_transitions)
    logger.info("Dispatching %s sweep: %d cell(s)", sweep, len(cells))
    result = group(train_and_evaluate.s(**cell) for cell in cells).apply_async()
    return result.get(timeout=timeout)
