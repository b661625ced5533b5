import pytest

from apps.core.exceptions import ArgumentError
from apps.trainer.tasks import OMEGA_GRID, Sweep, run_sweep, sweep_cells, train_and_evaluate

TINY = {"gradient_steps": 4, "eval_every": 2, "eval_episodes": 2, "batch_size": 8, "hidden_dims": [8]}


class TestSweepCells:
    def test_bc_sweep(self):
        cells = sweep_cells(Sweep.BC, [0, 1])
        assert len(cells) == 8
        assert {(c["env_name"], c["method"]) for c in cells} == {
            ("additive_game", "vgm2p"),
            ("additive_game", "bc-mf"),
            ("spread", "vgm2p"),
            ("spread", "bc-mf"),
        }

    def test_igm_sweep_varies_the_critic(self):
        cells = sweep_cells("igm", [0])
        assert [c["overrides"]["critic"] for c in cells] == ["joint", "independent"]
        assert {c["env_name"] for c in cells} == {"chain"}

    def test_omega_sweep(self):
        cells = sweep_cells("omega", [3], overrides={"lr": 1e-3})
        assert [c["overrides"]["omega"] for c in cells] == list(OMEGA_GRID)
        assert all(c["overrides"]["lr"] == 1e-3 and c["seed"] == 3 for c in cells)

    def test_unknown_sweep(self):
        with pytest.raises(ArgumentError):
            sweep_cells("lr", [0])


class TestTrainAndEvaluate:
    def test_one_cell(self):
        row = train_and_evaluate.apply(
            kwargs={"method": "bc-mf", "env_name": "additive_game", "seed": 0, "n_transitions": 40, "overrides": TINY}
        ).get()
        assert row["variant"] == "bc-mf"
        assert row["optimum"] == 2.0
        assert 0.0 <= row["final_return_mean"] <= 2.0

    def test_run_sweep_collects_every_cell(self):
        rows = run_sweep("igm", [0], overrides=TINY, n_transitions=40)
        assert [r["variant"] for r in rows] == ["joint", "independent"]
        assert all(r["env"] == "chain" for r in rows)
