from pathlib import Path

import numpy as np

from apps.autodiff.checkpoint import load_checkpoint
from apps.cli.base import ExperimentCommand, RunOutcome
from apps.cli.run_service import existing_input, output_dir_for
from apps.core.exceptions import ArgumentError
from apps.core.renderers import sha256_file, write_document
from apps.environments.registry import get_env
from apps.trainer.rollout_service import evaluate
from apps.trainer.training_service import load_policies

RESULT_NAME = "eval.json"


class Command(ExperimentCommand):
    help = "Roll out a trained checkpoint with decentralized one-step execution"
    command_name = "eval"

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", required=True)
        parser.add_argument("--env", help="defaults to the environment the checkpoint was trained on")
        parser.add_argument("--episodes", type=int, default=10)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out")

    def build_run_config(self, options) -> dict:
        checkpoint = existing_input(options["checkpoint"], "checkpoint")
        env_name = options["env"] or load_checkpoint(checkpoint)[1]["meta"].get("env", "")
        if not env_name:
            raise ArgumentError("--env is required for checkpoints without an environment")
        params = {"episodes": options["episodes"], "seed": options["seed"]}
        key = {"checkpoint": sha256_file(checkpoint), "env": env_name, **params}
        return {
            "command": self.command_name,
            "env_name": env_name,
            "output_dir": str(output_dir_for(self.command_name, key, options["out"])),
            "inputs": {"checkpoint": checkpoint},
            "params": params,
        }

    def execute_run(self, run_config: dict) -> RunOutcome:
        env = get_env(run_config["env_name"])
        policies, _ = load_policies(run_config["inputs"]["checkpoint"], env.action_space)
        params = run_config["params"]
        mean, std = evaluate(policies, env, params["episodes"], np.random.default_rng(params["seed"]))
        path = Path(run_config["output_dir"]) / RESULT_NAME
        write_document(
            path,
            {"env": env.name, "episodes": params["episodes"], "return_mean": mean, "return_std": std},
        )
        return RunOutcome(
            outputs={RESULT_NAME: path},
            inputs={"checkpoint": Path(run_config["inputs"]["checkpoint"])},
            summary=f"eval: {env.name} return {mean:.4f} ± {std:.4f} over {params['episodes']} episode(s)",
        )
