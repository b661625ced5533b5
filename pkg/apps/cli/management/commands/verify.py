from pathlib import Path

from apps.cli.base import ExperimentCommand, RunOutcome, float_list
from apps.cli.run_service import output_dir_for
from apps.oracle.verification import DEFAULT_LAMBDAS, Check, run_verification, write_reports

REPORTS_NAME = "reports.ndjson"


class Command(ExperimentCommand):
    help = "Check the exact tabular oracles and the differentiation primitives"
    command_name = "verify"

    def add_arguments(self, parser):
        parser.add_argument("--check", choices=Check.values, required=True)
        parser.add_argument("--seeds", type=int, default=100, help="number of random instances (seeds 0..N-1)")
        parser.add_argument("--lambdas", type=float_list, default=list(DEFAULT_LAMBDAS))
        parser.add_argument("--out")

    def build_run_config(self, options) -> dict:
        params = {"check": options["check"], "seeds": options["seeds"], "lambdas": options["lambdas"]}
        return {
            "command": self.command_name,
            "output_dir": str(output_dir_for(self.command_name, params, options["out"])),
            "params": params,
        }

    def execute_run(self, run_config: dict) -> RunOutcome:
        params = run_config["params"]
        reports = run_verification(params["check"], range(params["seeds"]), lambdas=params["lambdas"])
        path = Path(run_config["output_dir"]) / REPORTS_NAME
        write_reports(path, reports)

        by_seed: dict[int, bool] = {}
        for report in reports:
            by_seed[report["seed"]] = by_seed.get(report["seed"], True) and bool(report["pass"])
        for seed, passed in sorted(by_seed.items()):
            label = self.style.SUCCESS("PASS") if passed else self.style.ERROR("FAIL")
            self.stdout.write(f"{label} {params['check']} seed={seed}")

        failed = sum(not passed for passed in by_seed.values())
        return RunOutcome(
            outputs={REPORTS_NAME: path},
            passed=failed == 0,
            summary=f"verify {params['check']}: {len(by_seed) - failed}/{len(by_seed)} seed(s) passed",
        )
