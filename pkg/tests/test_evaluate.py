from itertools import combinations

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from bamlearn.errors import ConfigError, UsageError
from bamlearn.evaluate import ari, cluster, contingency, kmeans, linear_probe, nmi


def _blobs(seed=0, k=4, per=30, d=3, spread=0.6):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 4, (k, d))
    x = np.concatenate([c + spread * rng.standard_normal((per, d)) for c in centers])
    return x, np.repeat(np.arange(k), per)


def test_kmeans_two_pairs():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    res = kmeans(x, 2, restarts=3, seed=0)
    assert res.assignments[0] == res.assignments[1] != res.assignments[2] == res.assignments[3]
    np.testing.assert_allclose(res.inertia, 4 * 0.25)


def test_kmeans_k_equals_rows():
    x = np.random.default_rng(1).standard_normal((6, 2))
    assert kmeans(x, 6).inertia == 0.0


def test_kmeans_more_restarts_no_worse():
    x, _ = _blobs(2, k=6, spread=2.0)
    assert kmeans(x, 6, restarts=10, seed=3).inertia <= kmeans(x, 6, restarts=1, seed=3).inertia


def test_kmeans_inertia_trace_monotone():
    x, _ = _blobs(3, spread=2.0)
    trace = kmeans(x, 4, restarts=1, seed=0).inertia_trace
    assert all(a >= b - 1e-9 for a, b in zip(trace, trace[1:]))


def test_kmeans_errors():
    with pytest.raises(UsageError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(UsageError):
        kmeans(np.zeros((3, 2)), 2, restarts=0)


def test_kmeans_duplicate_points_no_empty_cluster():
    x = np.concatenate([np.zeros((10, 2)), np.ones((2, 2))])
    res = kmeans(x, 3, restarts=2, seed=0)
    assert np.isfinite(res.inertia)


def test_cluster_recovers_blobs():
    x, y = _blobs(4)
    res = cluster(x, y, 4, seed=0)
    assert res.nmi == pytest.approx(1.0) and res.ari == pytest.approx(1.0)


def _brute_nmi(pred, truth):
    m = len(pred)
    mi = 0.0
    for a in set(pred):
        for b in set(truth):
            nab = sum(1 for p, t in zip(pred, truth) if p == a and t == b)
            if nab:
                na, nb = pred.count(a), truth.count(b)
                mi += nab / m * np.log(m * nab / (na * nb))
    h = lambda lab: -sum(lab.count(c) / m * np.log(lab.count(c) / m) for c in set(lab))
    return mi / ((h(pred) + h(truth)) / 2)


def _brute_ari(pred, truth):
    pairs = list(combinations(range(len(pred)), 2))
    same_p = [pred[i] == pred[j] for i, j in pairs]
    same_t = [truth[i] == truth[j] for i, j in pairs]
    a = sum(p and t for p, t in zip(same_p, same_t))
    exp = sum(same_p) * sum(same_t) / len(pairs)
    mx = (sum(same_p) + sum(same_t)) / 2
    return (a - exp) / (mx - exp)


def test_nmi_cases():
    assert nmi([0, 1, 1, 2], [0, 1, 1, 2]) == pytest.approx(1.0)
    assert nmi([0, 0, 0, 0], [0, 1, 0, 1]) == 0.0
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert abs(nmi([0, 0, 1, 1], [0, 1, 0, 1])) < 1e-15
    with pytest.raises(UsageError):
        nmi([0, 1], [0, 1, 1])


def test_ari_cases():
    assert ari([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    want = _brute_ari([0, 0, 1, 1], [0, 1, 0, 1])
    assert want <= 0
    np.testing.assert_allclose(ari([0, 0, 1, 1], [0, 1, 0, 1]), want, rtol=1e-12)
    with pytest.raises(UsageError):
        ari([0], [0])


@pytest.mark.parametrize("seed", range(5))
def test_metrics_match_oracles(seed):
    rng = np.random.default_rng(seed)
    pred, truth = rng.integers(0, 4, 30).tolist(), rng.integers(0, 3, 30).tolist()
    np.testing.assert_allclose(nmi(pred, truth), _brute_nmi(pred, truth), rtol=1e-10)
    np.testing.assert_allclose(nmi(pred, truth), normalized_mutual_info_score(truth, pred),
                               rtol=1e-10)
    np.testing.assert_allclose(ari(pred, truth), _brute_ari(pred, truth), rtol=1e-10)
    np.testing.assert_allclose(ari(pred, truth), adjusted_rand_score(truth, pred), rtol=1e-10)


def test_metrics_relabel_invariant():
    rng = np.random.default_rng(9)
    pred, truth = rng.integers(0, 4, 40), rng.integers(0, 4, 40)
    relabeled = np.array([3, 0, 2, 1])[pred]
    assert nmi(relabeled, truth) == pytest.approx(nmi(pred, truth))
    assert ari(relabeled, truth) == pytest.approx(ari(pred, truth))


def test_ari_chance_level():
    rng = np.random.default_rng(0)
    truth = rng.integers(0, 5, 200)
    scores = [ari(rng.integers(0, 5, 200), truth) for _ in range(200)]
    assert abs(np.mean(scores)) < 0.05


def test_contingency_counts():
    np.testing.assert_array_equal(contingency([0, 0, 1], [1, 0, 1]), [[1, 1], [0, 1]])


def test_probe_separable():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(-3, 0.5, (40, 2)), rng.normal(3, 0.5, (40, 2))])
    y = np.repeat([0, 1], 40)
    res = linear_probe(x[::2], y[::2], x[1::2], y[1::2])
    assert res.accuracy == 1.0
    np.testing.assert_array_equal(res.per_class_accuracy, [1.0, 1.0])
    trace = res.loss_trace[10:]
    assert all(a >= b for a, b in zip(trace, trace[1:]))


def test_probe_shuffled_labels_chance():
    rng = np.random.default_rng(1)
    accs = []
    for seed in range(10):
        x = rng.standard_normal((400, 5))
        y = rng.integers(0, 10, 400)
        accs.append(linear_probe(x[:200], y[:200], x[200:], y[200:], epochs=200, seed=seed).accuracy)
    assert abs(np.mean(accs) - 0.1) < 0.05


def test_probe_heavy_l2_majority():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((60, 3))
    y = np.array([0] * 40 + [1] * 20)
    x[y == 1] += 2.0
    res = linear_probe(x, y, x, y, l2=1e6)
    np.testing.assert_allclose(res.accuracy, 40 / 60)


def test_probe_missing_class():
    with pytest.raises(ConfigError):
        linear_probe(np.zeros((2, 1)), [0, 0], np.zeros((1, 1)), [1])
