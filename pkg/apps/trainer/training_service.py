"""
Training Service Layer
======================
Centralized training of value-guided conditional MeanFlow policies and
of the unconditional behaviour-cloning baselines.

One gradient step of ``train_step`` runs, in order:

1. next actions a' ~ π(·|o', c=1) by one-step sampling, a TD update of
   the per-agent Q networks (joint or independent critic) and a Polyak
   update of the target networks;
2. policy actions â ~ π(·|o, c=1), advantages A_i = Q_i(o_i, a_i) -
   Q_i(o_i, â_i) under the freshly updated Q, labels c = [A_i ≥ 0];
3. a guided MeanFlow regression of each agent's field on (o_i, a_i, c).

Random streams all derive from ``np.random.SeedSequence(cfg.seed)``, so
a fixed seed reproduces every loss bit for bit.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from apps.autodiff.checkpoint import load_checkpoint, save_checkpoint
from apps.autodiff.mlp import loss_grad
from apps.autodiff.optim import AdamState, adam_step
from apps.autodiff.tensor import Tensor, ensure_finite
from apps.core.exceptions import ArgumentError, NumericError, TrainingDivergedError
from apps.environments.datasets import OfflineDataset
from apps.environments.registry import Environment
from apps.environments.spaces import with_agent_id
from apps.flows.batches import FlowBatch, make_flow_batch
from apps.flows.fields import AvgVelocityNet, FieldKind
from apps.flows.losses import fm_objective, mf_objective, vgmp_objective
from apps.values.ensemble import QEnsemble, advantage, target_update
from apps.values.td import independent_td_objective, joint_td_objective
from apps.values.transitions import JointTransitionBatch

from .config import CriticMode, Method, TrainConfig
from .policies import PolicySet
from .rollout_service import evaluate

logger = logging.getLogger(__name__)

FIELD_KINDS = {
    Method.VGM2P.value: FieldKind.CONDITIONAL_MEANFLOW,
    Method.BC_FM.value: FieldKind.FLOW_MATCHING,
    Method.BC_MF.value: FieldKind.MEANFLOW,
}


# ═══════════════════════════════════════════════════════════════════
# CONDITION LABELS
# ═══════════════════════════════════════════════════════════════════


def condition_label(advantages) -> np.ndarray:
    """c = 1 where A ≥ 0 (zero included), else 0."""
    advantages = ensure_finite(np.asarray(advantages, dtype=np.float64), name="advantage")
    return (advantages >= 0.0).astype(np.int64)


# ═══════════════════════════════════════════════════════════════════
# STATE
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class StepLosses:
    policy_loss: float
    q_loss: float = float("nan")
    wall_ms_policy: float = 0.0
    wall_ms_q: float = 0.0


@dataclass(frozen=True)
class TrainState:
    policies: PolicySet
    policy_opt: tuple[AdamState, ...]
    q: QEnsemble | None = None
    q_opt: tuple[AdamState, ...] = ()
    step: int = 0
    history: tuple[StepLosses, ...] = field(default=(), repr=False)


def _seeds(seq: np.random.SeedSequence, count: int) -> list[int]:
    return [int(s) for s in seq.generate_state(count)]


def init_train_state(
    method: str,
    *,
    n_agents: int,
    obs_dim: int,
    action_space,
    cfg: TrainConfig,
    seed_sequence: np.random.SeedSequence | None = None,
) -> TrainState:
    if str(method) not in FIELD_KINDS:
        raise ArgumentError(f"unknown method {method!r}; expected one of {sorted(FIELD_KINDS)}")
    seq = seed_sequence if seed_sequence is not None else np.random.SeedSequence(cfg.seed)
    policy_seq, q_seq = seq.spawn(2)
    sampling_steps = cfg.fm_sampling_steps if method == Method.BC_FM else 1
    policies = PolicySet.create(
        n_agents=n_agents,
        obs_dim=obs_dim,
        action_space=action_space,
        kind=FIELD_KINDS[str(method)],
        hidden_dims=cfg.hidden_dims,
        activation=cfg.activation,
        seeds=_seeds(policy_seq, n_agents),
        shared=cfg.shared,
        agent_id_features=cfg.agent_id_features,
        sampling_steps=sampling_steps,
    )
    policy_opt = tuple(AdamState.fresh(f.net, lr=cfg.lr) for f in policies.fields)
    if method != Method.VGM2P:
        return TrainState(policies=policies, policy_opt=policy_opt)

    q = QEnsemble.create(
        n_agents=n_agents,
        obs_dim=policies.fields[0].obs_dim,
        action_dim=action_space.dim,
        gamma=cfg.gamma,
        hidden_dims=cfg.hidden_dims,
        shared=cfg.shared,
        activation=cfg.activation,
        seed=_seeds(q_seq, 1)[0],
    )
    q_opt = tuple(AdamState.fresh(net, lr=cfg.lr) for net in q.online)
    return TrainState(policies=policies, policy_opt=policy_opt, q=q, q_opt=q_opt)


def _featurized(policies: PolicySet, batch: JointTransitionBatch) -> JointTransitionBatch:
    """The batch as the networks see it, agent ids appended when configured."""
    if not policies.agent_id_features:
        return batch
    n = batch.n_agents
    return replace(batch, obs=with_agent_id(batch.obs, n), next_obs=with_agent_id(batch.next_obs, n))


def _policy_actions(policies: PolicySet, obs, rng: np.random.Generator) -> list[Tensor]:
    actions = [policies.act(i, obs[:, i], rng) for i in range(policies.n_agents)]
    for i, action in enumerate(actions):
        if not np.all(np.isfinite(action)):
            raise NumericError(f"agent {i} sampled a non-finite action")
    return actions


def _diverged(state: TrainState, phase: str, error: NumericError) -> TrainingDivergedError:
    recent = [
        {"policy_loss": h.policy_loss, "q_loss": h.q_loss} for h in state.history[-5:]
    ]
    snapshot = {"step": state.step, "phase": phase, "value": error.value, "last_losses": recent}
    logger.error("Training diverged at step %d during %s update: %s", state.step, phase, error.detail)
    return TrainingDivergedError(
        f"non-finite {phase} loss at step {state.step}", value=error.value, snapshot=snapshot
    )


# ═══════════════════════════════════════════════════════════════════
# GRADIENT STEPS
# ═══════════════════════════════════════════════════════════════════


def _update_policies(
    state: TrainState, flow_batches: Sequence[FlowBatch], make_objective
) -> tuple[PolicySet, tuple[AdamState, ...], float]:
    policies = state.policies
    if policies.shared:
        flow_batches = [FlowBatch.concat(flow_batches)]
    fields, opts, losses = [], [], []
    for field_, opt, flow_batch in zip(policies.fields, state.policy_opt, flow_batches):
        value, grads = loss_grad(field_.net, make_objective(field_, flow_batch))
        net, opt = adam_step(field_.net, grads, opt)
        fields.append(field_.with_net(net))
        opts.append(opt)
        losses.append(value)
    return policies.with_fields(fields), tuple(opts), float(np.mean(losses))


def _update_q(
    state: TrainState, batch: JointTransitionBatch, next_actions: Sequence[Tensor], cfg: TrainConfig
) -> tuple[QEnsemble, tuple[AdamState, ...], float]:
    q = state.q
    make = joint_td_objective if cfg.critic == CriticMode.JOINT else independent_td_objective
    value, grads = loss_grad(q.online, make(q, batch, next_actions))
    online, opts = [], []
    for net, grad, opt in zip(q.online, grads, state.q_opt):
        net, opt = adam_step(net, grad, opt)
        online.append(net)
        opts.append(opt)
    return target_update(q.with_online(online), cfg.tau), tuple(opts), value


def train_step(
    state: TrainState,
    batch: JointTransitionBatch,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[TrainState, StepLosses]:
    """One centralized training step of the value-guided policy (see module docstring)."""
    if state.q is None:
        raise ArgumentError("train_step needs a Q ensemble; use train_bc_step for baselines")
    policies = state.policies
    if batch.n_agents != policies.n_agents:
        raise ArgumentError(f"batch has {batch.n_agents} agent(s), policies have {policies.n_agents}")
    featurized = _featurized(policies, batch)

    started = time.perf_counter()
    try:
        next_actions = _policy_actions(policies, batch.next_obs, rng)
    except NumericError as exc:
        raise _diverged(state, "target", exc) from exc
    try:
        q, q_opt, q_loss = _update_q(state, featurized, next_actions, cfg)
    except NumericError as exc:
        raise _diverged(state, "q", exc) from exc
    wall_ms_q = (time.perf_counter() - started) * 1e3

    started = time.perf_counter()
    try:
        policy_actions = _policy_actions(policies, batch.obs, rng)
        flow_batches = []
        for i in range(policies.n_agents):
            labels = condition_label(
                advantage(q, i, featurized.obs[:, i], batch.actions[:, i], policy_actions[i])
            )
            flow_batches.append(
                make_flow_batch(featurized.obs[:, i], batch.actions[:, i], labels, rng, cfg.r_equals_k_fraction)
            )
        policies, policy_opt, policy_loss = _update_policies(
            state,
            flow_batches,
            lambda field_, flow_batch: vgmp_objective(field_, flow_batch, cfg.omega),
        )
    except NumericError as exc:
        raise _diverged(state, "policy", exc) from exc
    wall_ms_policy = (time.perf_counter() - started) * 1e3

    losses = StepLosses(policy_loss, q_loss, wall_ms_policy, wall_ms_q)
    return (
        TrainState(
            policies=policies,
            policy_opt=policy_opt,
            q=q,
            q_opt=q_opt,
            step=state.step + 1,
            history=(*state.history[-4:], losses),
        ),
        losses,
    )


def train_bc_step(
    state: TrainState,
    batch: JointTransitionBatch,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[TrainState, StepLosses]:
    """Unconditional behaviour cloning: flow matching or MeanFlow regression on the dataset actions."""
    policies = state.policies
    if policies.kind == FieldKind.FLOW_MATCHING:
        def make_objective(field_, flow_batch):
            return fm_objective(field_, flow_batch)
    elif policies.kind == FieldKind.MEANFLOW:
        def make_objective(field_, flow_batch):
            return mf_objective(field_, flow_batch, conditional=False)
    else:
        raise ArgumentError(f"behaviour cloning needs an unconditional field, got {policies.kind}")

    featurized = _featurized(policies, batch)
    started = time.perf_counter()
    try:
        flow_batches = [
            make_flow_batch(featurized.obs[:, i], batch.actions[:, i], None, rng, cfg.r_equals_k_fraction)
            for i in range(policies.n_agents)
        ]
        policies, policy_opt, policy_loss = _update_policies(state, flow_batches, make_objective)
    except NumericError as exc:
        raise _diverged(state, "policy", exc) from exc
    losses = StepLosses(policy_loss, wall_ms_policy=(time.perf_counter() - started) * 1e3)
    return (
        replace(
            state,
            policies=policies,
            policy_opt=policy_opt,
            step=state.step + 1,
            history=(*state.history[-4:], losses),
        ),
        losses,
    )


# ═══════════════════════════════════════════════════════════════════
# REPORT
# ═══════════════════════════════════════════════════════════════════


@dataclass(frozen=True, eq=False)
class TrainReport:
    """
    One row per gradient step.  Evaluation columns are empty except on
    evaluation steps.  ``losses.csv`` drops the wall-clock columns so it
    is byte-identical across reruns with the same seed.
    """

    frame: pd.DataFrame

    COLUMNS = (
        "step",
        "policy_loss",
        "q_loss",
        "eval_return_mean",
        "eval_return_std",
        "wall_ms_policy",
        "wall_ms_q",
    )
    TIMING_COLUMNS = ("wall_ms_policy", "wall_ms_q")

    def __post_init__(self):
        if list(self.frame.columns) != list(self.COLUMNS):
            raise ArgumentError(f"report columns must be {list(self.COLUMNS)}")
        steps = self.frame["step"].to_numpy()
        if len(steps) > 1 and not np.all(np.diff(steps) > 0):
            raise ArgumentError("report steps must increase monotonically")

    @classmethod
    def from_rows(cls, rows: Sequence[dict]) -> TrainReport:
        frame = pd.DataFrame(list(rows), columns=list(cls.COLUMNS))
        frame["step"] = frame["step"].astype(np.int64)
        return cls(frame=frame)

    @classmethod
    def read_csv(cls, path: str | Path) -> TrainReport:
        return cls(frame=pd.read_csv(path))

    @property
    def evaluations(self) -> pd.DataFrame:
        return self.frame.dropna(subset=["eval_return_mean"])

    def final_return(self) -> float:
        evaluations = self.evaluations
        if evaluations.empty:
            return float("nan")
        return float(evaluations["eval_return_mean"].iloc[-1])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.frame.to_csv(path, index=False, float_format="%.17g")
        return path

    def losses_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.frame.drop(columns=list(self.TIMING_COLUMNS)).to_csv(path, index=False, float_format="%.17g")
        return path


# ═══════════════════════════════════════════════════════════════════
# TRAINING LOOP
# ═══════════════════════════════════════════════════════════════════


def fit(
    method: str,
    dataset: OfflineDataset,
    env: Environment,
    cfg: TrainConfig,
) -> tuple[PolicySet, TrainReport]:
    """
    Train ``method`` on ``dataset`` for ``cfg.gradient_steps`` steps.

    Batches are drawn uniformly with replacement.  The policy is
    evaluated on ``env`` every ``cfg.eval_every`` steps and after the
    last step, with the same evaluation stream for every method.
    """
    if dataset.n_agents != env.n_agents:
        raise ArgumentError(f"dataset has {dataset.n_agents} agent(s), env has {env.n_agents}")
    init_seq, batch_seq, step_seq, eval_seq = np.random.SeedSequence(cfg.seed).spawn(4)
    state = init_train_state(
        method,
        n_agents=env.n_agents,
        obs_dim=dataset.obs_dim,
        action_space=env.action_space,
        cfg=cfg,
        seed_sequence=init_seq,
    )
    step_fn = train_step if method == Method.VGM2P else train_bc_step
    transitions = dataset.transitions()
    batch_rng = np.random.default_rng(batch_seq)
    step_rng = np.random.default_rng(step_seq)
    eval_rng = np.random.default_rng(eval_seq)

    logger.info(
        "Training %s on %s/%s (%d transitions) for %d step(s), seed %d",
        method, dataset.env_name, dataset.tier, dataset.n_transitions, cfg.gradient_steps, cfg.seed,
    )
    rows = []
    for step in range(1, cfg.gradient_steps + 1):
        batch = transitions.take(batch_rng.integers(transitions.rows, size=cfg.batch_size))
        state, losses = step_fn(state, batch, cfg, step_rng)
        row = {
            "step": step,
            "policy_loss": losses.policy_loss,
            "q_loss": losses.q_loss,
            "eval_return_mean": np.nan,
            "eval_return_std": np.nan,
            "wall_ms_policy": losses.wall_ms_policy,
            "wall_ms_q": losses.wall_ms_q,
        }
        if step % cfg.eval_every == 0 or step == cfg.gradient_steps:
            mean, std = evaluate(state.policies, env, cfg.eval_episodes, eval_rng)
            row["eval_return_mean"], row["eval_return_std"] = mean, std
            logger.info(
                "step %d: policy_loss=%.6g q_loss=%.6g return=%.4f ± %.4f",
                step, losses.policy_loss, losses.q_loss, mean, std,
            )
        rows.append(row)
    return state.policies, TrainReport.from_rows(rows)


def train_bc_baseline(
    mode: str,
    dataset: OfflineDataset,
    cfg: TrainConfig,
    env: Environment,
) -> tuple[PolicySet, TrainReport]:
    """Unconditional BC with ``mode`` ∈ {flow_matching, meanflow}, evaluated like ``fit``."""
    methods = {FieldKind.FLOW_MATCHING.value: Method.BC_FM, FieldKind.MEANFLOW.value: Method.BC_MF}
    if str(mode) not in methods:
        raise ArgumentError(f"baseline mode must be flow_matching or meanflow, got {mode!r}")
    return fit(methods[str(mode)], dataset, env, cfg)


# ═══════════════════════════════════════════════════════════════════
# CHECKPOINTS
# ═══════════════════════════════════════════════════════════════════


def save_policies(path: str | Path, policies: PolicySet, *, config_hash: str = "", meta: dict | None = None) -> Path:
    first = policies.fields[0]
    layout = {
        "kind": str(first.kind),
        "action_dim": first.action_dim,
        "obs_dim": first.obs_dim,
        "n_agents": policies.n_agents,
        "shared": policies.shared,
        "agent_id_features": policies.agent_id_features,
        "sampling_steps": policies.sampling_steps,
    }
    networks = {f"policy_{slot}": f.net for slot, f in enumerate(policies.fields)}
    return save_checkpoint(path, networks, config_hash=config_hash, meta={**(meta or {}), "policy": layout})


def load_policies(path: str | Path, action_space) -> tuple[PolicySet, dict]:
    """Rebuild a ``PolicySet`` from a checkpoint; returns it with the header."""
    networks, header = load_checkpoint(path)
    layout = header["meta"].get("policy")
    if layout is None:
        raise ArgumentError(f"{path} holds no policy layout")
    fields = [
        AvgVelocityNet(net=networks[name], action_dim=layout["action_dim"], obs_dim=layout["obs_dim"], kind=layout["kind"])
        for name in sorted(networks, key=lambda n: int(n.rsplit("_", 1)[1]))
        if name.startswith("policy_")
    ]
    policies = PolicySet(
        fields=tuple(fields),
        n_agents=layout["n_agents"],
        action_space=action_space,
        shared=layout["shared"],
        agent_id_features=layout["agent_id_features"],
        sampling_steps=layout["sampling_steps"],
    )
    return policies, header
