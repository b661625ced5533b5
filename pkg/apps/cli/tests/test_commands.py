import pandas as pd
import pytest

from apps.cli.run_service import RunCommand, load_run_config, resolve_run_config
from apps.cli.runner import run
from apps.core.models import ExperimentRun, RunStatus
from apps.core.renderers import read_document, render_document, parse_document

pytestmark = [pytest.mark.django_db, pytest.mark.integration]

TRAIN = ["train", "--env", "additive_game", "--n-transitions", "60", "--steps", "6", "--eval-every", "3"]


class TestDispatch:
    def test_no_subcommand(self, capsys):
        assert run([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert run(["fit"]) == 2

    def test_top_level_help(self):
        assert run(["--help"]) == 0

    def test_subcommand_help(self, capsys):
        assert run(["verify", "--help"]) == 0
        assert "--check" in capsys.readouterr().out

    def test_unknown_flag(self, capsys):
        assert run(["verify", "--check", "prop1", "--bogus"]) == 2
        assert "usage" in capsys.readouterr().err


class TestRunConfig:
    def test_round_trip(self, tmp_path):
        resolved = resolve_run_config(
            {
                "command": RunCommand.TRAIN,
                "env_name": "chain",
                "output_dir": str(tmp_path),
                "params": {"method": "vgm2p"},
                "train": {"omega": 3.0, "hidden_dims": [8]},
            }
        )
        path = tmp_path / "config.json"
        path.write_bytes(render_document(resolved))
        assert load_run_config(path) == resolved
        assert parse_document(render_document(load_run_config(path))) == resolved

    def test_invalid_train_block(self, tmp_path):
        from rest_framework.exceptions import ValidationError

        with pytest.raises(ValidationError):
            resolve_run_config({"command": "train", "output_dir": str(tmp_path), "train": {"gamma": 2.0}})


class TestVerify:
    def test_prop1_prints_one_pass_line_per_seed(self, tmp_path, capsys):
        assert run(["verify", "--check", "prop1", "--seeds", "5", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert sum("PASS prop1 seed=" in line for line in out.splitlines()) == 5
        assert len((tmp_path / "reports.ndjson").read_bytes().splitlines()) == 15

        run_row = ExperimentRun.objects.get(command="verify")
        assert run_row.status == RunStatus.SUCCEEDED
        assert run_row.exit_code == 0
        assert run_row.manifest_hash

    def test_failed_check_exits_one(self, tmp_path, monkeypatch):
        monkeypatch.setattr(
            "apps.cli.management.commands.verify.run_verification",
            lambda check, seeds, lambdas: [{"check": check, "seed": 0, "pass": False}],
        )
        assert run(["verify", "--check", "igm", "--seeds", "1", "--out", str(tmp_path)]) == 1
        assert ExperimentRun.objects.get(command="verify").status == RunStatus.CHECK_FAILED

    def test_manifest_records_outputs(self, tmp_path):
        run(["verify", "--check", "jvp", "--seeds", "2", "--out", str(tmp_path)])
        manifest = read_document(tmp_path / "manifest.json")
        assert manifest["command"] == "verify"
        assert manifest["config"]["params"]["check"] == "jvp"
        assert set(manifest["outputs"]) == {"reports.ndjson"}


class TestGenData:
    def test_same_seed_same_bytes(self, tmp_path):
        args = ["gen-data", "--env", "chain", "--n-transitions", "50", "--seed", "3"]
        assert run([*args, "--out", str(tmp_path / "a")]) == 0
        assert run([*args, "--out", str(tmp_path / "b")]) == 0
        for name in ("dataset.ndjson", "dataset.manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_unknown_env(self, tmp_path):
        assert run(["gen-data", "--env", "smac", "--out", str(tmp_path)]) == 2
        assert ExperimentRun.objects.get(command="gen-data").status == RunStatus.ERRORED


class TestTrainAndEvaluate:
    def test_rerun_reproduces_losses(self, output_dir):
        assert run([*TRAIN, "--seed", "0"]) == 0
        (run_dir,) = list(output_dir.iterdir())
        first = (run_dir / "losses.csv").read_bytes()
        first_manifest = (run_dir / "manifest.json").read_bytes()
        assert run([*TRAIN, "--seed", "0"]) == 0
        assert (run_dir / "losses.csv").read_bytes() == first
        assert (run_dir / "manifest.json").read_bytes() == first_manifest

        report = pd.read_csv(run_dir / "report.csv")
        assert list(report.columns) == [
            "step", "policy_loss", "q_loss", "eval_return_mean", "eval_return_std", "wall_ms_policy", "wall_ms_q",
        ]
        assert report["step"].tolist() == list(range(1, 7))

    def test_dataset_file_and_evaluation(self, tmp_path):
        assert run(["gen-data", "--env", "additive_game", "--n-transitions", "40", "--out", str(tmp_path / "data")]) == 0
        dataset = tmp_path / "data" / "dataset.ndjson"
        assert run([*TRAIN, "--method", "bc-mf", "--dataset", str(dataset), "--out", str(tmp_path / "train")]) == 0
        manifest = read_document(tmp_path / "train" / "manifest.json")
        assert set(manifest["inputs"]) == {"dataset"}
        assert manifest["outputs"]["report.csv"] is None

        checkpoint = tmp_path / "train" / "policy.ckpt"
        assert run(["eval", "--checkpoint", str(checkpoint), "--episodes", "4", "--out", str(tmp_path / "eval")]) == 0
        result = read_document(tmp_path / "eval" / "eval.json")
        assert result["env"] == "additive_game"
        assert result["episodes"] == 4
        assert 0.0 <= result["return_mean"] <= 2.0

    def test_invalid_hyperparameter_is_a_usage_error(self, tmp_path):
        assert run([*TRAIN, "--gamma", "1.5", "--out", str(tmp_path)]) == 2

    def test_malformed_hidden_list(self, tmp_path):
        assert run([*TRAIN, "--hidden", "64,x", "--out", str(tmp_path)]) == 2

    def test_missing_dataset(self, tmp_path):
        assert run([*TRAIN, "--dataset", str(tmp_path / "nope.ndjson")]) == 2

    def test_missing_checkpoint(self, tmp_path):
        assert run(["eval", "--checkpoint", str(tmp_path / "nope.ckpt")]) == 2


class TestBenchAndExport:
    def test_bench_reports_each_step_count(self, tmp_path):
        assert run(["bench", "--steps", "1,4", "--actions", "200", "--batch", "100", "--out", str(tmp_path)]) == 0
        frame = pd.read_csv(tmp_path / "bench.csv")
        assert frame["steps"].tolist() == [1, 4]
        assert frame["field"].tolist() == ["meanflow", "flow_matching"]
        assert (frame["actions"] == 200).all()
        assert (frame["per_action_us"] > 0).all()

    def test_bench_rejects_zero_steps(self, tmp_path):
        assert run(["bench", "--steps", "0", "--out", str(tmp_path)]) == 2

    @pytest.mark.slow
    def test_one_step_sampling_is_five_times_cheaper_than_ten_step(self, tmp_path):
        assert run(["bench", "--steps", "1,10", "--actions", "10000", "--batch", "1000", "--out", str(tmp_path)]) == 0
        per_action = pd.read_csv(tmp_path / "bench.csv").set_index("steps")["per_action_us"]
        assert per_action[10] >= 5.0 * per_action[1]

    def test_export_curve(self, tmp_path):
        assert run([*TRAIN, "--out", str(tmp_path / "train")]) == 0
        assert run(["export-plots", "--report", str(tmp_path / "train" / "report.csv"), "--out", str(tmp_path / "plots")]) == 0
        curve = pd.read_csv(tmp_path / "plots" / "curve.csv")
        assert curve["step"].tolist() == [3, 6]

    def test_export_sweep(self, tmp_path):
        args = ["export-plots", "--sweep", "igm", "--seeds", "2", "--steps", "2", "--n-transitions", "30"]
        assert run([*args, "--out", str(tmp_path)]) == 0
        cells = pd.read_csv(tmp_path / "sweep-igm.csv")
        assert len(cells) == 4
        assert set(cells["variant"]) == {"joint", "independent"}
        summary = pd.read_csv(tmp_path / "sweep-igm-summary.csv")
        assert summary["count"].tolist() == [2, 2]

    def test_export_needs_something_to_export(self, tmp_path):
        assert run(["export-plots", "--out", str(tmp_path)]) == 2
