import numpy as np
import pytest

from apps.core.exceptions import ArgumentError, DimensionError
from apps.values.ensemble import QEnsemble, QInputMode, advantage, joint_q, target_update


def _ensemble(shared=True, n_agents=2, seed=0):
    return QEnsemble.create(
        n_agents=n_agents, obs_dim=3, action_dim=2, gamma=0.9, hidden_dims=(8,), shared=shared, seed=seed
    )


def _one_hot(index, width):
    return np.eye(width)[np.asarray(index)]


class TestQEnsemble:
    def test_shared_has_one_slot(self):
        q = _ensemble(shared=True, n_agents=3)
        assert len(q.online) == 1
        assert {q.slot(i) for i in range(3)} == {0}

    def test_per_agent_slots(self):
        q = _ensemble(shared=False, n_agents=3)
        assert len(q.online) == 3
        assert [q.slot(i) for i in range(3)] == [0, 1, 2]

    def test_agent_out_of_range(self):
        with pytest.raises(ArgumentError):
            _ensemble().slot(2)

    def test_gamma_range(self):
        with pytest.raises(ArgumentError):
            QEnsemble.create(n_agents=1, obs_dim=1, action_dim=1, gamma=1.0)

    def test_target_mirrors_online(self):
        q = _ensemble()
        other = QEnsemble.create(n_agents=2, obs_dim=3, action_dim=2, gamma=0.9, hidden_dims=(4,))
        with pytest.raises(DimensionError):
            QEnsemble(
                online=q.online, target=other.online, n_agents=2, gamma=0.9, obs_dim=3, action_dim=2
            )

    def test_feature_width_checked(self):
        with pytest.raises(DimensionError):
            _ensemble().evaluate(0, np.zeros((4, 2)), np.zeros((4, 2)))

    def test_outer_features_index_table(self):
        table = np.arange(6.0).reshape(2, 3)
        q = QEnsemble.from_tables([table], gamma=0.0)
        assert q.input_mode == QInputMode.OUTER
        obs = _one_hot([0, 1, 1], 2)
        act = _one_hot([2, 0, 1], 3)
        np.testing.assert_array_equal(q.evaluate(0, obs, act), [2.0, 3.0, 4.0])

    def test_lookup_layer_has_a_zero_bias(self):
        table = np.arange(6.0).reshape(2, 3)
        (layer,) = QEnsemble.from_tables([table], gamma=0.0).online[0].layers
        np.testing.assert_array_equal(layer.bias, [0.0])
        np.testing.assert_array_equal(layer.weight, table.reshape(1, -1))


class TestJointQ:
    @pytest.mark.parametrize("shared", [True, False])
    def test_additivity(self, shared):
        q = _ensemble(shared=shared, seed=4)
        rng = np.random.default_rng(0)
        obs = rng.normal(size=(16, 2, 3))
        actions = rng.normal(size=(16, 2, 2))
        expected = q.evaluate(0, obs[:, 0], actions[:, 0]) + q.evaluate(1, obs[:, 1], actions[:, 1])
        np.testing.assert_allclose(joint_q(q, obs, actions), expected, atol=1e-12)

    def test_agent_count_mismatch(self):
        q = _ensemble()
        with pytest.raises(ArgumentError):
            joint_q(q, np.zeros((4, 3, 3)), np.zeros((4, 3, 2)))


class TestTargetUpdate:
    def _diverged(self):
        q = _ensemble(seed=1)
        moved = tuple(net.map(lambda w: w + 1.0) for net in q.online)
        return q.with_online(moved)

    def test_hard_copy(self):
        q = target_update(self._diverged(), 1.0)
        for online, target in zip(q.online, q.target):
            for a, b in zip(online.arrays(), target.arrays()):
                np.testing.assert_array_equal(a, b)

    def test_zero_keeps_target(self):
        q = self._diverged()
        updated = target_update(q, 0.0)
        for before, after in zip(q.target, updated.target):
            for a, b in zip(before.arrays(), after.arrays()):
                np.testing.assert_array_equal(a, b)

    def test_convex_combination(self):
        q = self._diverged()
        updated = target_update(q, 0.005)
        for online, before, after in zip(q.online, q.target, updated.target):
            for o, t, new in zip(online.arrays(), before.arrays(), after.arrays()):
                np.testing.assert_allclose(new, 0.005 * o + 0.995 * t, atol=1e-12)

    def test_online_untouched(self):
        q = self._diverged()
        updated = target_update(q, 0.5)
        assert updated.online is q.online

    @pytest.mark.parametrize("tau", [-0.1, 1.5])
    def test_out_of_range(self, tau):
        with pytest.raises(ArgumentError):
            target_update(_ensemble(), tau)


class TestAdvantage:
    def test_same_action_is_zero(self):
        q = _ensemble(seed=2)
        rng = np.random.default_rng(1)
        obs, act = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
        np.testing.assert_array_equal(advantage(q, 0, obs, act, act), np.zeros(5))

    def test_lookup_table(self):
        table = np.array([[2.0, 1.0]])
        q = QEnsemble.from_tables([table], gamma=0.0)
        value = advantage(q, 0, _one_hot([0], 1), _one_hot([0], 2), _one_hot([1], 2))
        np.testing.assert_allclose(value, [1.0])

    def test_random_table(self):
        rng = np.random.default_rng(3)
        tables = [rng.normal(size=(4, 3)) for _ in range(2)]
        q = QEnsemble.from_tables(tables, gamma=0.0)
        o = rng.integers(4, size=50)
        a_data = rng.integers(3, size=50)
        a_pol = rng.integers(3, size=50)
        value = advantage(q, 1, _one_hot(o, 4), _one_hot(a_data, 3), _one_hot(a_pol, 3))
        np.testing.assert_allclose(value, tables[1][o, a_data] - tables[1][o, a_pol], atol=1e-12)
