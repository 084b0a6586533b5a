import numpy as np
import pytest
from sklearn.cluster import KMeans
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import normalized_mutual_info_score

from bamlearn.datagen import (
    AugmentSpec,
    Dataset,
    augment,
    epoch_batches,
    load_csv,
    make_gaussian_mixture,
    make_two_rings,
    sample_views,
    save_csv,
    split_dataset,
)
from bamlearn.errors import ConfigError, DataError


def test_mixture_counts():
    ds = make_gaussian_mixture(8, 64, 32, 5.0, 1.0, seed=7)
    assert ds.points.shape == (512, 32)
    assert sorted(np.unique(ds.labels)) == list(range(8))
    assert np.bincount(ds.labels).tolist() == [64] * 8


def test_mixture_degenerate_noise_hits_centers():
    ds = make_gaussian_mixture(2, 1, 2, 5.0, 1e-12, seed=3)
    # regenerate the centers from the same stream to compare distances
    from bamlearn._rng import stream

    centers = stream(3, "data").normal(0.0, 5.0, size=(2, 2))
    np.testing.assert_allclose(np.linalg.norm(ds.points[0] - ds.points[1]),
                               np.linalg.norm(centers[0] - centers[1]), rtol=1e-9)


def test_mixture_separated_kmeans_oracle():
    ds = make_gaussian_mixture(4, 100, 16, 10.0, 0.5, seed=1)
    pred = KMeans(4, n_init=10, random_state=0).fit_predict(ds.points)
    assert normalized_mutual_info_score(ds.labels, pred) >= 0.99


def test_mixture_deterministic():
    a = make_gaussian_mixture(3, 5, 4, 2.0, 1.0, seed=11)
    b = make_gaussian_mixture(3, 5, 4, 2.0, 1.0, seed=11)
    assert a.points.tobytes() == b.points.tobytes()


@pytest.mark.parametrize("args", [(1, 5, 4, 2.0, 1.0), (3, 0, 4, 2.0, 1.0), (3, 5, 4, 1.0, 1.0)])
def test_mixture_rejects_bad_sizes(args):
    with pytest.raises(ConfigError):
        make_gaussian_mixture(*args, seed=0)


def test_rings_gap():
    ds = make_two_rings(100, [1, 3], 0.05, seed=0)
    assert len(ds) == 200
    inner, outer = ds.points[ds.labels == 0], ds.points[ds.labels == 1]
    gap = np.linalg.norm(inner[:, None] - outer[None], axis=-1).min()
    assert gap > 1


def test_rings_exact_points():
    ds = make_two_rings(1, [1, 2], 0.0, seed=5)
    np.testing.assert_allclose(np.linalg.norm(ds.points, axis=1), [1.0, 2.0])


def test_rings_not_linearly_separable():
    ds = make_two_rings(50, [1, 3], 0.05, seed=2)
    acc = LogisticRegression().fit(ds.points, ds.labels).score(ds.points, ds.labels)
    assert acc < 0.8


def test_rings_overlap_rejected():
    with pytest.raises(ConfigError):
        make_two_rings(10, [1, 2], 0.3, seed=0)


def test_identity_views_equal_inputs():
    ds = make_gaussian_mixture(2, 5, 3, 2.0, 1.0, seed=0)
    vb = sample_views(ds, [0, 4, 7], 2, AugmentSpec(), seed=9)
    np.testing.assert_array_equal(vb.views[:3], vb.views[3:])
    np.testing.assert_array_equal(vb.views[:3], ds.points[[0, 4, 7]])


def test_views_deterministic_and_layout():
    ds = make_gaussian_mixture(2, 5, 3, 2.0, 1.0, seed=0)
    spec = AugmentSpec(noise_sigma=0.1)
    a = sample_views(ds, [1, 2, 3, 4], 3, spec, seed=4)
    b = sample_views(ds, [1, 2, 3, 4], 3, spec, seed=4)
    assert a.views.tobytes() == b.views.tobytes()
    for i in range(a.n):
        for j in range(a.k):
            assert a.row_of(i, j) % a.n == i
    assert not np.array_equal(a.views[:4], a.views[4:8])


def test_dropout_fraction():
    spec = AugmentSpec(dropout_prob=0.5)
    x = np.ones(1000)
    for seed in range(20):
        frac = np.mean(augment(x, spec, np.random.default_rng(seed)) == 0)
        assert 0.45 <= frac <= 0.55


def test_rotation_preserves_norm():
    spec = AugmentSpec(rotate_angle_max=np.pi)
    x = np.arange(5.0)
    y = augment(x, spec, np.random.default_rng(0))
    np.testing.assert_allclose(np.linalg.norm(y), np.linalg.norm(x))


def test_k_below_two_rejected():
    ds = make_gaussian_mixture(2, 5, 3, 2.0, 1.0, seed=0)
    with pytest.raises(ConfigError):
        sample_views(ds, [0], 1, AugmentSpec(), seed=0)


def test_augment_spec_validation():
    with pytest.raises(ConfigError):
        AugmentSpec(scale_range=(0.0, 1.0))
    with pytest.raises(ConfigError):
        AugmentSpec(dropout_prob=1.0)


def test_epoch_batches_cover_without_replacement():
    batches = epoch_batches(10, 3, epoch=0, seed=1)
    flat = np.concatenate(batches)
    assert len(batches) == 3 and len(set(flat.tolist())) == 9
    assert not np.array_equal(flat, np.concatenate(epoch_batches(10, 3, epoch=1, seed=1)))


def test_split_is_stratified():
    ds = make_gaussian_mixture(4, 10, 2, 3.0, 1.0, seed=0)
    tr, te = split_dataset(ds, 0.5, seed=0)
    assert np.bincount(te.labels).tolist() == [5] * 4
    assert len(tr) + len(te) == len(ds)


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan]]), np.array([0]), 1)
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.array([0, 0]), 2)


def test_csv_roundtrip(tmp_path):
    ds = make_gaussian_mixture(3, 4, 2, 3.0, 1.0, seed=0)
    path = tmp_path / "d.csv"
    save_csv(ds, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.points, ds.points)
    np.testing.assert_array_equal(back.labels, ds.labels)


@pytest.mark.parametrize("body, line", [
    ("label,f0,f1\n0,1.0,2.0\n1,3.0\n", 3),
    ("label,f0\n0,1.0\n1,abc\n", 3),
    ("label,f0\n0,inf\n", 2),
])
def test_csv_errors_name_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=f":{line}:"):
        load_csv(path)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("y,x0\n0,1\n")
    with pytest.raises(DataError, match=":1:"):
        load_csv(path)
