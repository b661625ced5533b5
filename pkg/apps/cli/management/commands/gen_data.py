from pathlib import Path

from apps.cli.base import ExperimentCommand, RunOutcome
from apps.cli.run_service import output_dir_for
from apps.environments.datasets import Tier, generate_offline_dataset, manifest_path, save_dataset
from apps.environments.registry import get_env

DATASET_NAME = "dataset.ndjson"


class Command(ExperimentCommand):
    help = "Generate an offline dataset of whole episodes for one environment and tier"
    command_name = "gen-data"

    def add_arguments(self, parser):
        parser.add_argument("--env", required=True, help="additive_game, climbing_game, chain or spread")
        parser.add_argument("--tier", choices=Tier.values, default=Tier.MIXED)
        parser.add_argument("--n-transitions", type=int, default=2000)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--expert-fraction", type=float, default=0.3)
        parser.add_argument("--noise", type=float, default=0.3)
        parser.add_argument("--out", help="output directory (default: derived from the config)")

    def build_run_config(self, options) -> dict:
        params = {
            "tier": options["tier"],
            "n_transitions": options["n_transitions"],
            "seed": options["seed"],
            "expert_fraction": options["expert_fraction"],
            "noise": options["noise"],
        }
        key = {"env": options["env"], **params}
        return {
            "command": self.command_name,
            "env_name": options["env"],
            "output_dir": str(output_dir_for(self.command_name, key, options["out"])),
            "params": params,
        }

    def execute_run(self, run_config: dict) -> RunOutcome:
        params = run_config["params"]
        dataset = generate_offline_dataset(
            get_env(run_config["env_name"]),
            params["n_transitions"],
            params["tier"],
            params["seed"],
            expert_fraction=params["expert_fraction"],
            noise=params["noise"],
        )
        path = Path(run_config["output_dir"]) / DATASET_NAME
        save_dataset(dataset, path)
        return RunOutcome(
            outputs={DATASET_NAME: path, manifest_path(path).name: manifest_path(path)},
            summary=(
                f"gen-data: {dataset.n_transitions} transitions in {dataset.n_episodes} episode(s), "
                f"mean return {dataset.mean_return():.4f} -> {path}"
            ),
        )
