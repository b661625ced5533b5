import numpy as np
import pytest

from apps.autodiff.mlp import loss_grad
from apps.autodiff.optim import AdamState, adam_step
from apps.core.exceptions import ArgumentError
from apps.flows.batches import make_flow_batch
from apps.flows.fields import AvgVelocityNet, FieldKind, PointMassField
from apps.flows.losses import energy_distance, fm_objective, mf_objective
from apps.flows.samplers import sample_multi_step, sample_one_step

X0 = np.array([1.0, -2.0, 0.5])


def _zero_field(kind=FieldKind.CONDITIONAL_MEANFLOW):
    net = AvgVelocityNet.create(action_dim=3, obs_dim=2, hidden_dims=(8,), kind=kind, seed=0)
    return net.with_net(net.net.zeros_like())


def test_zero_field_returns_the_draw():
    drawn = np.random.default_rng(5).standard_normal((1, 3))[0]
    out = sample_one_step(_zero_field(), np.zeros(2), 1, np.random.default_rng(5))
    np.testing.assert_array_equal(out, drawn)


def test_point_mass_one_step_returns_x0():
    obs = np.zeros((100, 2))
    out = sample_one_step(PointMassField(X0), obs, 1, np.random.default_rng(0))
    np.testing.assert_allclose(out, np.tile(X0, (100, 1)), atol=1e-12)


def test_single_interval_matches_one_step():
    net = AvgVelocityNet.create(action_dim=3, obs_dim=2, hidden_dims=(8, 8), seed=4)
    obs = np.random.default_rng(1).normal(size=(6, 2))
    one = sample_one_step(net, obs, 1, np.random.default_rng(9))
    multi = sample_multi_step(net, obs, 1, 1, np.random.default_rng(9))
    np.testing.assert_array_equal(one, multi)


@pytest.mark.parametrize("n_steps", [1, 2, 10, 37])
def test_point_mass_flow_lands_on_x0(n_steps):
    out = sample_multi_step(PointMassField(X0), np.zeros((20, 2)), 1, n_steps, np.random.default_rng(2))
    np.testing.assert_allclose(out, np.tile(X0, (20, 1)), atol=1e-10)


@pytest.mark.parametrize("kind", [FieldKind.FLOW_MATCHING, FieldKind.MEANFLOW])
def test_zero_field_any_step_count(kind):
    drawn = np.random.default_rng(3).standard_normal((4, 3))
    out = sample_multi_step(_zero_field(kind), np.zeros((4, 2)), 1, 10, np.random.default_rng(3))
    np.testing.assert_array_equal(out, drawn)


def test_zero_steps_rejected():
    with pytest.raises(ArgumentError):
        sample_multi_step(_zero_field(), np.zeros(2), 1, 0, np.random.default_rng(0))


class TestEnergyDistance:
    def test_identical_sets_are_zero_apart(self):
        x = np.random.default_rng(0).normal(size=(50, 3))
        assert energy_distance(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_zero_field_samples_match_the_source(self):
        out = sample_one_step(_zero_field(), np.zeros((500, 2)), 1, np.random.default_rng(1))
        reference = np.random.default_rng(2).standard_normal((500, 3))
        assert energy_distance(out, reference) < 0.05

    def test_point_mass_samples_are_far_from_the_source(self):
        out = sample_one_step(PointMassField(X0), np.zeros((200, 2)), 1, np.random.default_rng(1))
        reference = np.random.default_rng(2).standard_normal((200, 3))
        assert energy_distance(out, reference) > 1.0
        assert energy_distance(out, np.tile(X0, (10, 1))) == pytest.approx(0.0, abs=1e-9)


GMM_MEANS = np.array([[-1.5, 0.0], [1.5, 0.5]])


def _gmm(rng, rows):
    component = rng.integers(2, size=rows)
    return GMM_MEANS[component] + 0.3 * rng.standard_normal((rows, 2))


def _fit(kind, make_objective, data, steps=4000, batch_size=256):
    field = AvgVelocityNet.create(action_dim=2, obs_dim=1, hidden_dims=(64, 64), kind=kind, seed=0)
    opt = AdamState.fresh(field.net, lr=1e-3)
    rng = np.random.default_rng(0)
    obs = np.zeros((batch_size, 1))
    for _ in range(steps):
        batch = make_flow_batch(obs, data[rng.integers(len(data), size=batch_size)], None, rng)
        _, grads = loss_grad(field.net, make_objective(field, batch))
        net, opt = adam_step(field.net, grads, opt)
        field = field.with_net(net)
    return field


@pytest.mark.slow
def test_one_step_meanflow_matches_many_step_flow_matching_on_a_mixture():
    data = _gmm(np.random.default_rng(0), 4096)
    meanflow = _fit(FieldKind.MEANFLOW, mf_objective, data)
    flow_matching = _fit(FieldKind.FLOW_MATCHING, fm_objective, data)

    obs = np.zeros((1000, 1))
    truth = _gmm(np.random.default_rng(1), 1000)
    one_step = sample_one_step(meanflow, obs, None, np.random.default_rng(2))
    euler = sample_multi_step(flow_matching, obs, None, 100, np.random.default_rng(2))
    # estimator floor: two independent draws from the mixture itself
    floor = energy_distance(_gmm(np.random.default_rng(3), 1000), truth)

    assert energy_distance(one_step, truth) <= 1.5 * max(energy_distance(euler, truth), floor)
