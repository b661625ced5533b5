import numpy as np
import pytest

from apps.environments.registry import make_reference_envs
from apps.trainer.tests.factories import TrainConfigFactory


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def train_config():
    return TrainConfigFactory(seed=0)


@pytest.fixture(scope="session")
def reference_envs():
    return make_reference_envs()


@pytest.fixture
def output_dir(tmp_path, settings):
    settings.VGM2P = {**settings.VGM2P, "OUTPUT_ROOT": str(tmp_path / "runs")}
    return tmp_path / "runs"
