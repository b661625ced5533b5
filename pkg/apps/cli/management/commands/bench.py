import time
from pathlib import Path

import numpy as np
import pandas as pd

from apps.cli.base import ExperimentCommand, RunOutcome, int_list
from apps.cli.run_service import existing_input, output_dir_for
from apps.core.exceptions import ArgumentError
from apps.core.renderers import sha256_file
from apps.environments.registry import get_env
from apps.flows.fields import FieldKind
from apps.flows.samplers import sample_multi_step, sample_one_step
from apps.trainer.config import TrainConfig
from apps.trainer.policies import PolicySet
from apps.trainer.training_service import load_policies

RESULT_NAME = "bench.csv"


class Command(ExperimentCommand):
    help = "Time one-step MeanFlow sampling against n-step Euler sampling at the same network size"
    command_name = "bench"

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", help="trained policy timed at every step count (default: fresh MeanFlow and flow-matching fields)")
        parser.add_argument("--env", default="spread")
        parser.add_argument("--steps", type=int_list, default=[1, 10], help="sampler step counts, e.g. 1,10")
        parser.add_argument("--actions", type=int, default=10_000, help="actions drawn per step count")
        parser.add_argument("--batch", type=int, default=1000, help="actions drawn per network call")
        parser.add_argument("--hidden", type=int_list)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out")

    def build_run_config(self, options) -> dict:
        if not options["steps"] or min(options["steps"]) < 1:
            raise ArgumentError("--steps needs positive step counts")
        if options["actions"] < 1 or options["batch"] < 1:
            raise ArgumentError("--actions and --batch must be positive")
        inputs = {}
        if options["checkpoint"]:
            inputs["checkpoint"] = existing_input(options["checkpoint"], "checkpoint")
        params = {
            "steps": options["steps"],
            "actions": options["actions"],
            "batch": options["batch"],
            "seed": options["seed"],
            "hidden_dims": options["hidden"] or TrainConfig.from_settings().as_dict()["hidden_dims"],
        }
        key = {"env": options["env"], **params, **{k: sha256_file(v) for k, v in inputs.items()}}
        return {
            "command": self.command_name,
            "env_name": options["env"],
            "output_dir": str(output_dir_for(self.command_name, key, options["out"])),
            "inputs": inputs,
            "params": params,
        }

    def _policies(self, run_config, env) -> tuple[PolicySet, PolicySet]:
        """(one-step policies, multi-step policies)."""
        if "checkpoint" in run_config["inputs"]:
            policies = load_policies(run_config["inputs"]["checkpoint"], env.action_space)[0]
            return policies, policies

        def fresh(kind):
            return PolicySet.create(
                n_agents=env.n_agents,
                obs_dim=env.obs_dim,
                action_space=env.action_space,
                kind=kind,
                hidden_dims=run_config["params"]["hidden_dims"],
                activation="tanh",
                seeds=list(range(env.n_agents)),
            )

        return fresh(FieldKind.MEANFLOW), fresh(FieldKind.FLOW_MATCHING)

    def execute_run(self, run_config: dict) -> RunOutcome:
        env = get_env(run_config["env_name"])
        params = run_config["params"]
        one_step, multi_step = self._policies(run_config, env)
        rng = np.random.default_rng(params["seed"])
        obs = np.stack([env.observe(env.reset(rng))[0] for _ in range(params["batch"])])
        obs = one_step.features(0, obs)

        rows = []
        for n_steps in params["steps"]:
            field = (one_step if n_steps == 1 else multi_step).field_for(0)
            labels = 1 if field.conditional else None
            drawn = 0
            started = time.perf_counter()
            while drawn < params["actions"]:
                if n_steps == 1:
                    sample_one_step(field, obs, labels, rng)
                else:
                    sample_multi_step(field, obs, labels, n_steps, rng)
                drawn += params["batch"]
            total_ms = (time.perf_counter() - started) * 1e3
            rows.append(
                {
                    "steps": n_steps,
                    "field": str(field.kind),
                    "actions": drawn,
                    "total_ms": total_ms,
                    "per_action_us": 1e3 * total_ms / drawn,
                }
            )
        frame = pd.DataFrame(rows)
        frame["relative_to_fastest"] = frame["per_action_us"] / frame["per_action_us"].min()
        path = Path(run_config["output_dir"]) / RESULT_NAME
        frame.to_csv(path, index=False)
        for row in rows:
            self.stdout.write(f"{row['steps']:>3} step(s) [{row['field']}]: {row['per_action_us']:.3f} µs/action")
        return RunOutcome(
            outputs={RESULT_NAME: path},
            inputs={k: Path(v) for k, v in run_config["inputs"].items()},
            timed=(RESULT_NAME,),
            summary=f"bench: {len(rows)} sampler(s), {params['actions']} action(s) each -> {path}",
        )
