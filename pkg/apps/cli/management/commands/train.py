from pathlib import Path

from apps.cli.base import ExperimentCommand, RunOutcome, int_list
from apps.cli.run_service import existing_input, output_dir_for
from apps.core.renderers import config_hash, sha256_file
from apps.environments.datasets import Tier, generate_offline_dataset, load_dataset
from apps.environments.registry import get_env
from apps.trainer.config import CriticMode, Method, TrainConfig
from apps.trainer.training_service import fit, save_policies

REPORT_NAME = "report.csv"
LOSSES_NAME = "losses.csv"
CHECKPOINT_NAME = "policy.ckpt"


class Command(ExperimentCommand):
    help = "Train VGM²P or a behaviour-cloning baseline on an offline dataset"
    command_name = "train"

    def add_arguments(self, parser):
        parser.add_argument("--env", required=True)
        parser.add_argument("--method", choices=Method.values, default=Method.VGM2P)
        parser.add_argument("--dataset", help="dataset file from gen-data (default: generate one)")
        parser.add_argument("--tier", choices=Tier.values, default=Tier.MIXED)
        parser.add_argument("--n-transitions", type=int, default=2000)
        parser.add_argument("--dataset-seed", type=int, default=None, help="defaults to --seed")

        hyper = parser.add_argument_group("hyperparameters (defaults from settings.VGM2P)")
        hyper.add_argument("--gamma", type=float)
        hyper.add_argument("--omega", type=float)
        hyper.add_argument("--lr", type=float)
        hyper.add_argument("--batch-size", type=int)
        hyper.add_argument("--hidden", type=int_list, help="comma-separated widths, e.g. 64,64")
        hyper.add_argument("--steps", type=int, help="gradient steps")
        hyper.add_argument("--tau", type=float)
        hyper.add_argument("--eval-every", type=int)
        hyper.add_argument("--eval-episodes", type=int)
        hyper.add_argument("--critic", choices=CriticMode.values)
        hyper.add_argument("--per-agent", action="store_true", help="one network per agent instead of sharing")
        hyper.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out")

    def build_run_config(self, options) -> dict:
        cfg = TrainConfig.from_settings(
            gamma=options["gamma"],
            omega=options["omega"],
            lr=options["lr"],
            batch_size=options["batch_size"],
            hidden_dims=options["hidden"],
            gradient_steps=options["steps"],
            tau=options["tau"],
            eval_every=options["eval_every"],
            eval_episodes=options["eval_episodes"],
            critic=options["critic"],
            shared=False if options["per_agent"] else None,
            seed=options["seed"],
        )
        inputs = {}
        params = {"method": options["method"]}
        if options["dataset"]:
            inputs["dataset"] = existing_input(options["dataset"], "dataset")
            dataset_key = sha256_file(inputs["dataset"])
        else:
            dataset_seed = options["seed"] if options["dataset_seed"] is None else options["dataset_seed"]
            params.update(tier=options["tier"], n_transitions=options["n_transitions"], dataset_seed=dataset_seed)
            dataset_key = config_hash(params)
        train = cfg.as_dict()
        key = {"env": options["env"], "params": params, "train": train, "dataset": dataset_key}
        return {
            "command": self.command_name,
            "env_name": options["env"],
            "output_dir": str(output_dir_for(self.command_name, key, options["out"])),
            "inputs": inputs,
            "params": params,
            "train": train,
        }

    def execute_run(self, run_config: dict) -> RunOutcome:
        env = get_env(run_config["env_name"])
        params = run_config["params"]
        if "dataset" in run_config["inputs"]:
            dataset = load_dataset(run_config["inputs"]["dataset"])
        else:
            dataset = generate_offline_dataset(env, params["n_transitions"], params["tier"], params["dataset_seed"])
        cfg = TrainConfig.from_dict(run_config["train"])

        policies, report = fit(params["method"], dataset, env, cfg)
        output_dir = Path(run_config["output_dir"])
        outputs = {
            REPORT_NAME: report.to_csv(output_dir / REPORT_NAME),
            LOSSES_NAME: report.losses_csv(output_dir / LOSSES_NAME),
            CHECKPOINT_NAME: save_policies(
                output_dir / CHECKPOINT_NAME,
                policies,
                config_hash=config_hash(run_config),
                meta={"method": params["method"], "env": env.name},
            ),
        }
        return RunOutcome(
            outputs=outputs,
            inputs={k: Path(v) for k, v in run_config["inputs"].items()},
            timed=(REPORT_NAME,),
            summary=f"train: {params['method']} on {env.name}, final return {report.final_return():.4f} -> {output_dir}",
        )
