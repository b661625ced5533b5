import pytest

from apps.core.exceptions import ArgumentError
from apps.trainer.config import CriticMode, TrainConfig


class TestTrainConfig:
    def test_defaults_come_from_settings(self, settings):
        settings.VGM2P = {**settings.VGM2P, "GAMMA": 0.97, "BATCH_SIZE": 8}
        cfg = TrainConfig.from_settings()
        assert cfg.gamma == 0.97
        assert cfg.batch_size == 8

    def test_overrides_win_and_none_is_ignored(self):
        cfg = TrainConfig.from_settings(omega=10.0, lr=None)
        assert cfg.omega == 10.0
        assert cfg.lr == TrainConfig.from_settings().lr

    def test_dict_round_trip(self):
        cfg = TrainConfig.from_settings(hidden_dims=[8, 4], critic="independent", seed=3)
        assert cfg.hidden_dims == (8, 4)
        assert cfg.critic == CriticMode.INDEPENDENT
        assert TrainConfig.from_dict(cfg.as_dict()) == cfg

    def test_with_overrides(self):
        cfg = TrainConfig.from_settings(seed=1)
        assert cfg.with_overrides(seed=2).seed == 2
        assert cfg.with_overrides(seed=2).omega == cfg.omega

    @pytest.mark.parametrize(
        "overrides",
        [
            {"gamma": 1.0},
            {"gamma": -0.1},
            {"lr": -1e-3},
            {"batch_size": 0},
            {"tau": 1.5},
            {"r_equals_k_fraction": -0.1},
            {"hidden_dims": [0]},
            {"omega": float("inf")},
            {"lambda_temp": 0.0},
            {"activation": "sigmoid"},
            {"critic": "central"},
        ],
    )
    def test_invalid_values(self, overrides):
        with pytest.raises(ArgumentError):
            TrainConfig.from_settings(**overrides)

    def test_unknown_field(self):
        with pytest.raises(ArgumentError):
            TrainConfig.from_dict({"learning_rate": 0.1})
