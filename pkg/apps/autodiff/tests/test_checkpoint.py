import numpy as np
import pytest

from apps.autodiff.checkpoint import load_checkpoint, save_checkpoint
from apps.autodiff.mlp import MlpParams
from apps.core.exceptions import DatasetError


def test_round_trip_preserves_every_bit(tmp_path):
    nets = {
        "policy": MlpParams.initialize([5, 8, 2], activation="relu", seed=3),
        "q": MlpParams.initialize([4, 6, 6, 1], seed=4),
    }
    path = save_checkpoint(tmp_path / "model.ckpt", nets, config_hash="abc", meta={"kind": "x"})
    loaded, header = load_checkpoint(path)
    assert header["config_hash"] == "abc"
    assert header["meta"] == {"kind": "x"}
    for name, params in nets.items():
        assert loaded[name].activations == params.activations
        assert loaded[name].seed == params.seed
        for a, b in zip(params.arrays(), loaded[name].arrays()):
            assert np.array_equal(a, b)


def test_truncated_file_is_rejected(tmp_path):
    path = save_checkpoint(tmp_path / "m.ckpt", {"n": MlpParams.initialize([2, 2], seed=0)})
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DatasetError):
        load_checkpoint(path)
