import numpy as np
import pytest

from camproxy.data import ClusterAssignment
from camproxy.memory import ProxyMemory, init_memory, load_memory, save_memory, scores, update_entry
from camproxy.proxies import cluster_labeling


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def labeling_from_labels(labels):
    labels = np.asarray(labels)
    return cluster_labeling(
        ClusterAssignment(labels=labels, num_clusters=int(labels.max()) + 1)
    )


class TestInitMemory:
    def test_single_member_proxy(self):
        feats = np.array([unit([1.0, 2.0, -1.0]), unit([0.0, 1.0, 0.0])])
        memory = init_memory(feats, labeling_from_labels([0, 1]))
        np.testing.assert_allclose(memory.entries[:, 0], feats[0], atol=1e-15)
        np.testing.assert_allclose(memory.entries[:, 1], feats[1], atol=1e-15)

    def test_antipodal_members_rejected(self):
        feats = np.array([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(ValueError, match="zero-norm"):
            init_memory(feats, labeling_from_labels([0, 0]))

    def test_mean_then_normalize_scalar_oracle(self):
        rng = np.random.default_rng(4)
        feats = np.array([unit(rng.standard_normal(5)) for _ in range(3)])
        memory = init_memory(feats, labeling_from_labels([0, 0, 0]))
        mean = [sum(feats[i][t] for i in range(3)) / 3.0 for t in range(5)]
        norm = sum(v * v for v in mean) ** 0.5
        want = [v / norm for v in mean]
        np.testing.assert_allclose(memory.entries[:, 0], want, atol=1e-12)

    def test_columns_unit_norm(self):
        rng = np.random.default_rng(6)
        feats = np.array([unit(rng.standard_normal(8)) for _ in range(30)])
        labels = rng.integers(0, 5, size=30)
        labels[:5] = np.arange(5)
        memory = init_memory(feats, labeling_from_labels(labels))
        norms = np.linalg.norm(memory.entries, axis=0)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)


class TestUpdateEntry:
    def test_mu_zero_replaces(self):
        memory = ProxyMemory(entries=np.eye(3), mu=0.0, tau=0.07)
        f = unit([0.0, 1.0, 0.0])
        update_entry(memory, 0, f)
        np.testing.assert_allclose(memory.entries[:, 0], f, atol=1e-15)

    def test_mu_one_keeps(self):
        memory = ProxyMemory(entries=np.eye(3), mu=1.0, tau=0.07)
        before = memory.entries[:, 2].copy()
        update_entry(memory, 2, unit([1.0, 1.0, 0.0]))
        np.testing.assert_allclose(memory.entries[:, 2], before, atol=1e-15)

    def test_worked_axis_example(self):
        # entry e1, feature e2, mu = 0.2: blend (0.2, 0.8) -> (0.2425, 0.9701)
        memory = ProxyMemory(entries=np.array([[1.0], [0.0]]), mu=0.2, tau=0.07)
        update_entry(memory, 0, np.array([0.0, 1.0]))
        np.testing.assert_allclose(memory.entries[:, 0], [0.2425, 0.9701], atol=1e-4)

    def test_touches_single_column(self):
        rng = np.random.default_rng(2)
        entries = np.array([unit(rng.standard_normal(4)) for _ in range(6)]).T
        memory = ProxyMemory(entries=entries.copy(), mu=0.2, tau=0.07)
        update_entry(memory, 3, unit(rng.standard_normal(4)))
        for z in range(6):
            if z == 3:
                continue
            np.testing.assert_array_equal(memory.entries[:, z], entries[:, z])

    def test_norms_after_many_updates(self):
        rng = np.random.default_rng(11)
        entries = np.array([unit(rng.standard_normal(6)) for _ in range(9)]).T
        memory = ProxyMemory(entries=entries, mu=0.2, tau=0.07)
        for _ in range(2000):
            update_entry(memory, int(rng.integers(0, 9)), unit(rng.standard_normal(6)))
        norms = np.linalg.norm(memory.entries, axis=0)
        assert np.abs(norms - 1.0).max() <= 1e-9

    def test_non_unit_feature_rejected(self):
        memory = ProxyMemory(entries=np.eye(2), mu=0.2, tau=0.07)
        with pytest.raises(ValueError, match="norm"):
            update_entry(memory, 0, np.array([0.5, 0.5]))

    def test_out_of_range_proxy(self):
        memory = ProxyMemory(entries=np.eye(2), mu=0.2, tau=0.07)
        with pytest.raises(ValueError, match="range"):
            update_entry(memory, 2, np.array([1.0, 0.0]))

    def test_no_renormalize_variant(self):
        memory = ProxyMemory(entries=np.eye(2), mu=0.2, tau=0.07, renormalize=False)
        update_entry(memory, 0, np.array([0.0, 1.0]))
        np.testing.assert_allclose(memory.entries[:, 0], [0.2, 0.8], atol=1e-15)


class TestScores:
    def test_matching_entry_logit(self):
        e = unit([1.0, 2.0, 3.0])
        memory = ProxyMemory(entries=e[:, None], mu=0.2, tau=0.07)
        np.testing.assert_allclose(scores(memory, e), [1.0 / 0.07], atol=1e-9)

    def test_orthogonal_zero(self):
        memory = ProxyMemory(entries=np.array([[1.0], [0.0]]), mu=0.2, tau=0.07)
        np.testing.assert_allclose(scores(memory, np.array([0.0, 1.0])), [0.0], atol=1e-15)

    def test_bounded_by_inverse_tau(self):
        rng = np.random.default_rng(3)
        entries = np.array([unit(rng.standard_normal(5)) for _ in range(7)]).T
        memory = ProxyMemory(entries=entries, mu=0.2, tau=0.07)
        logits = scores(memory, unit(rng.standard_normal(5)))
        assert np.all(np.abs(logits) <= 1.0 / 0.07 + 1e-9)


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    entries = rng.standard_normal((4, 6))
    entries /= np.linalg.norm(entries, axis=0, keepdims=True)
    memory = ProxyMemory(entries=entries, mu=0.3, tau=0.05, renormalize=False)
    path = tmp_path / "memory.bin"
    save_memory(memory, path)
    loaded = load_memory(path)
    np.testing.assert_array_equal(loaded.entries, memory.entries)
    assert loaded.mu == memory.mu
    assert loaded.tau == memory.tau
    assert loaded.renormalize is False
