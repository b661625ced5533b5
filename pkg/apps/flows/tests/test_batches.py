import numpy as np
import pytest

from apps.core.exceptions import ArgumentError
from apps.flows.batches import FlowBatch, make_flow_batch


def _data(rows, obs_dim=3, action_dim=2, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(rows, obs_dim)), rng.normal(size=(rows, action_dim))


def test_full_fraction_forces_r_equal_k():
    obs, action = _data(50)
    batch = make_flow_batch(obs, action, None, np.random.default_rng(1), r_equals_k_fraction=1.0)
    assert np.array_equal(batch.r, batch.k)


def test_zero_fraction_orders_times_and_k_is_max_of_two_uniforms():
    obs, action = _data(100_000, obs_dim=1, action_dim=1)
    batch = make_flow_batch(obs, action, None, np.random.default_rng(2), r_equals_k_fraction=0.0)
    assert np.all(batch.r <= batch.k)
    assert abs(batch.k.mean() - 2.0 / 3.0) <= 0.01


def test_fraction_is_exact_count():
    obs, action = _data(40)
    batch = make_flow_batch(obs, action, None, np.random.default_rng(3), r_equals_k_fraction=0.25)
    assert int(np.sum(batch.r == batch.k)) >= 10


def test_same_seed_same_batch():
    obs, action = _data(16)
    labels = np.arange(16) % 2
    a = make_flow_batch(obs, action, labels, np.random.default_rng(7))
    b = make_flow_batch(obs, action, labels, np.random.default_rng(7))
    for name in ("epsilon", "k", "r", "c"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_empty_batch_rejected():
    with pytest.raises(ArgumentError):
        make_flow_batch(np.zeros((0, 2)), np.zeros((0, 1)), None, np.random.default_rng(0))


def test_fraction_out_of_range_rejected():
    obs, action = _data(4)
    with pytest.raises(ArgumentError):
        make_flow_batch(obs, action, None, np.random.default_rng(0), r_equals_k_fraction=1.5)


def test_interpolation_and_velocity():
    batch = FlowBatch(
        obs=np.zeros((1, 1)),
        action=np.array([[1.0, 0.0]]),
        epsilon=np.array([[0.0, 1.0]]),
        k=np.array([0.25]),
        r=np.array([0.0]),
        c=np.array([1]),
    )
    np.testing.assert_allclose(batch.a_k, [[0.75, 0.25]])
    np.testing.assert_array_equal(batch.velocity, [[-1.0, 1.0]])


def test_r_above_k_rejected():
    with pytest.raises(ArgumentError):
        FlowBatch(
            obs=np.zeros((1, 1)),
            action=np.zeros((1, 1)),
            epsilon=np.zeros((1, 1)),
            k=np.array([0.2]),
            r=np.array([0.5]),
            c=np.array([1]),
        )
