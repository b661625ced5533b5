"""
Closed-form policy identities and their brute-force checks.

* ``exact_optimal_policy``           π*(a|o) ∝ β(a|o) exp(Q(o,a) / λ)
* ``condition_posterior``            p(c=1|o,a) = σ((Q(o,a) - V(o)) / λ)
* ``conditional_behavior_policy``    π_β(a|o,c) ∝ p(c|o,a) β(a|o)

Conditioning the behaviour policy on a posterior proportional to
exp(Q/λ) recovers π* exactly; with per-agent factorised behaviour and
an additive joint Q the product of per-agent conditioned policies is
the joint optimum.  The sigmoid posterior is only approximately
proportional to exp(Q/λ); that gap is measured, never asserted.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence

import numpy as np
from scipy.special import expit, softmax

from apps.core.exceptions import ArgumentError, DegenerateConditionError

from .tables import ExactPolicy, ExactQ, check_enumeration_size, total_variation

logger = logging.getLogger(__name__)

PROPOSITION_TOLERANCE = 1e-10


def _table(q) -> np.ndarray:
    return np.asarray(getattr(q, "table", q), dtype=np.float64)


def _positive(lambda_temp: float) -> float:
    if not lambda_temp > 0:
        raise ArgumentError(f"lambda_temp must be positive, got {lambda_temp}")
    return float(lambda_temp)


def exact_optimal_policy(q: ExactQ, beta: ExactPolicy, lambda_temp: float) -> ExactPolicy:
    lam = _positive(lambda_temp)
    with np.errstate(divide="ignore"):
        logits = np.log(beta.table) + _table(q) / lam
    return ExactPolicy.normalized(softmax(logits, axis=1))


def condition_posterior(q: ExactQ, v, lambda_temp: float) -> np.ndarray:
    """Elementwise σ((Q - V) / λ) with ``v`` one value per observation row."""
    lam = _positive(lambda_temp)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    return expit((_table(q) - v) / lam)


def exponential_posterior(q: ExactQ, lambda_temp: float) -> np.ndarray:
    """A posterior proportional to exp(Q / λ) per row (scaled so each row's max is 1)."""
    lam = _positive(lambda_temp)
    scaled = _table(q) / lam
    return np.exp(scaled - scaled.max(axis=1, keepdims=True))


def conditional_behavior_policy(beta: ExactPolicy, posterior) -> ExactPolicy:
    posterior = np.asarray(posterior, dtype=np.float64)
    if posterior.shape != beta.table.shape:
        raise ArgumentError(f"posterior shape {posterior.shape} != policy shape {beta.table.shape}")
    if np.any(posterior < 0) or np.any(posterior > 1):
        raise ArgumentError("posterior entries must lie in [0, 1]")
    weights = posterior * beta.table
    mass = weights.sum(axis=1)
    empty = np.flatnonzero(mass <= 0)
    if empty.size:
        raise DegenerateConditionError(f"observation row(s) {empty.tolist()} have zero posterior mass")
    return ExactPolicy.normalized(weights)


# ═══════════════════════════════════════════════════════════════════
# CHECKS
# ═══════════════════════════════════════════════════════════════════


def verify_proposition_1(beta: ExactPolicy, q: ExactQ, lambda_temp: float) -> dict:
    """
    Exact-posterior conditioning vs π*, plus the measured gap of the
    sigmoid posterior (``sigmoid_tv_gap``).
    """
    target = exact_optimal_policy(q, beta, lambda_temp)
    exact = conditional_behavior_policy(beta, exponential_posterior(q, lambda_temp))
    sigmoid = conditional_behavior_policy(
        beta, condition_posterior(q, q.values(beta), lambda_temp)
    )
    tv = total_variation(exact, target)
    return {
        "tv_distance": tv,
        "sigmoid_tv_gap": total_variation(sigmoid, target),
        "pass": tv <= 1e-12,
    }


def _joint_sum(tables: Sequence[np.ndarray], joint_obs: Sequence[int]) -> np.ndarray:
    """Σ_i table_i[o_i, a_i] laid out over joint actions (row-major)."""
    total = np.zeros(())
    for table, o in zip(tables, joint_obs):
        total = np.add.outer(total, table[o])
    return total.ravel()


def verify_proposition_2(
    betas: Sequence[ExactPolicy],
    q_tables: Sequence[ExactQ],
    lambda_temp: float,
    *,
    joint_q=None,
    cap: int | None = None,
) -> dict:
    """
    Compare Π_i π_β^i(·|o_i, c) with the joint optimum of Σ_i Q_i (or of
    ``joint_q``, shaped ``(n_obs_1, ..., n_obs_N, A_1, ..., A_N)``) at
    every joint observation, by enumeration.  ``cap`` bounds the joint action count and
    defaults to ``settings.VGM2P["ENUMERATION_CAP"]``.
    """
    if len(betas) != len(q_tables):
        raise ArgumentError(f"{len(betas)} behaviour tables but {len(q_tables)} Q tables")
    lam = _positive(lambda_temp)
    n_actions = [b.n_actions for b in betas]
    check_enumeration_size(int(np.prod(n_actions)), cap)

    conditioned = [
        conditional_behavior_policy(b, exponential_posterior(q, lam)) for b, q in zip(betas, q_tables)
    ]
    with np.errstate(divide="ignore"):
        log_conditioned = [np.log(p.table) for p in conditioned]
        log_betas = [np.log(b.table) for b in betas]

    worst = 0.0
    for joint_obs in itertools.product(*(range(b.n_obs) for b in betas)):
        if joint_q is None:
            q_joint = _joint_sum([_table(q) for q in q_tables], joint_obs)
        else:
            q_joint = np.asarray(joint_q, dtype=np.float64)[joint_obs].ravel()
        optimum = softmax(_joint_sum(log_betas, joint_obs) + q_joint / lam)
        product = np.exp(_joint_sum(log_conditioned, joint_obs))
        worst = max(worst, total_variation(product, optimum))
    return {"tv_distance": worst, "pass": worst <= PROPOSITION_TOLERANCE}


def igm_check(q_tables: Sequence[ExactQ], joint_obs: Sequence[int], joint_q=None) -> dict:
    """
    Argmax of the joint value over joint actions vs the tuple of
    per-agent argmaxes.  Both sides break ties at the lowest index.
    """
    tables = [_table(q) for q in q_tables]
    check_enumeration_size(int(np.prod([t.shape[1] for t in tables])))
    per_agent = tuple(int(np.argmax(t[o])) for t, o in zip(tables, joint_obs))
    if joint_q is None:
        values = np.zeros(())
        for t, o in zip(tables, joint_obs):
            values = np.add.outer(values, t[o])
    else:
        values = np.asarray(joint_q, dtype=np.float64)[tuple(joint_obs)]
    joint = tuple(int(i) for i in np.unravel_index(int(np.argmax(values)), values.shape))
    return {
        "joint_argmax": list(joint),
        "per_agent_argmaxes": list(per_agent),
        "consistent": joint == per_agent,
    }
