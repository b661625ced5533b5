from pathlib import Path

import pandas as pd

from apps.cli.base import ExperimentCommand, RunOutcome
from apps.cli.run_service import existing_input, output_dir_for
from apps.core.exceptions import ArgumentError
from apps.core.renderers import sha256_file
from apps.trainer.tasks import Sweep, run_sweep
from apps.trainer.training_service import TrainReport

CURVE_NAME = "curve.csv"


class Command(ExperimentCommand):
    help = "Export plot data: a training curve and/or an ablation sweep (one row per variant and seed)"
    command_name = "export-plots"

    def add_arguments(self, parser):
        parser.add_argument("--sweep", choices=Sweep.values)
        parser.add_argument("--report", help="report.csv of a train run to export as a curve")
        parser.add_argument("--seeds", type=int, default=6)
        parser.add_argument("--steps", type=int, help="gradient steps per sweep cell")
        parser.add_argument("--n-transitions", type=int, default=2000)
        parser.add_argument("--out")

    def build_run_config(self, options) -> dict:
        if not options["sweep"] and not options["report"]:
            raise ArgumentError("pass --sweep and/or --report")
        inputs = {}
        if options["report"]:
            inputs["report"] = existing_input(options["report"], "report")
        params = {
            "sweep": options["sweep"] or "",
            "seeds": options["seeds"],
            "steps": options["steps"],
            "n_transitions": options["n_transitions"],
        }
        key = {**params, **{k: sha256_file(v) for k, v in inputs.items()}}
        return {
            "command": self.command_name,
            "output_dir": str(output_dir_for(self.command_name, key, options["out"])),
            "inputs": inputs,
            "params": params,
        }

    def execute_run(self, run_config: dict) -> RunOutcome:
        params = run_config["params"]
        output_dir = Path(run_config["output_dir"])
        outputs: dict[str, Path] = {}

        if "report" in run_config["inputs"]:
            report = TrainReport.read_csv(run_config["inputs"]["report"])
            curve = report.evaluations[["step", "eval_return_mean", "eval_return_std"]]
            curve.to_csv(output_dir / CURVE_NAME, index=False, float_format="%.17g")
            outputs[CURVE_NAME] = output_dir / CURVE_NAME

        if params["sweep"]:
            overrides = {"gradient_steps": params["steps"]} if params["steps"] else {}
            rows = run_sweep(
                params["sweep"], range(params["seeds"]), overrides=overrides, n_transitions=params["n_transitions"]
            )
            cells = pd.DataFrame(rows)
            name = f"sweep-{params['sweep']}.csv"
            cells.to_csv(output_dir / name, index=False, float_format="%.17g")
            outputs[name] = output_dir / name

            summary = (
                cells.groupby(["env", "variant"], sort=True)["final_return_mean"]
                .agg(["mean", "std", "count"])
                .reset_index()
            )
            summary_name = f"sweep-{params['sweep']}-summary.csv"
            summary.to_csv(output_dir / summary_name, index=False, float_format="%.17g")
            outputs[summary_name] = output_dir / summary_name

        return RunOutcome(
            outputs=outputs,
            inputs={k: Path(v) for k, v in run_config["inputs"].items()},
            summary=f"export-plots: {', '.join(sorted(outputs))} -> {output_dir}",
        )
