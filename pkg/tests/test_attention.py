import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bamlearn.attention import (
    SimMatrix,
    cosine_similarity,
    cross_similarity,
    dump_csv,
    mask_positives,
    positive_mask,
    row_entropy,
    softmax_blocks,
    softmax_rows,
)
from bamlearn.errors import NumericalError, UsageError


def _random_sim(n=4, k=2, d=5, seed=0):
    z = np.random.default_rng(seed).standard_normal((n * k, d))
    return cosine_similarity(z, n)


def test_identical_rows_give_one():
    s = cosine_similarity(np.array([[1.0, 2.0], [1.0, 2.0]]), 1)
    np.testing.assert_allclose(s.values, 1.0)


def test_orthogonal_rows_give_zero():
    s = cosine_similarity(np.array([[1.0, 0.0], [0.0, 1.0]]), 1)
    assert s.values[0, 1] == 0.0


def test_hand_value():
    s = cosine_similarity(np.array([[1.0, 0.0], [1.0, 1.0]]), 1)
    np.testing.assert_allclose(s.values[0, 1], 0.70711, atol=1e-5)
    np.testing.assert_allclose(s.values[0, 1], np.sqrt(2) / 2, rtol=1e-15)


def test_similarity_scalar_oracle():
    z = np.random.default_rng(1).standard_normal((6, 3))
    s = cosine_similarity(z, 3).values
    for p in range(6):
        for q in range(6):
            if p != q:
                want = z[p] @ z[q] / (np.linalg.norm(z[p]) * np.linalg.norm(z[q]))
                assert abs(s[p, q] - want) < 1e-12
    assert np.all(np.diag(s) == 1.0)
    assert np.array_equal(s, s.T)


def test_zero_row_is_named():
    z = np.ones((4, 3))
    z[2] = 0
    with pytest.raises(NumericalError, match="row 2"):
        cosine_similarity(z, 2)


def test_bad_layout():
    with pytest.raises(UsageError):
        cosine_similarity(np.ones((5, 2)), 2)


def test_cross_similarity_equal_sets_bit_equal():
    z = np.random.default_rng(2).standard_normal((8, 4))
    a, b = cosine_similarity(z, 4).values, cross_similarity(z, z.copy(), 4).values
    off = ~np.eye(8, dtype=bool)
    assert np.array_equal(a[off], b[off])


def test_cross_similarity_not_symmetric():
    rng = np.random.default_rng(3)
    s = cross_similarity(rng.standard_normal((6, 3)), rng.standard_normal((6, 3)), 3).values
    assert not np.allclose(s, s.T)


def test_mask_index_set_n2_k2():
    s = mask_positives(_random_sim(n=2, k=2))
    masked = {(p, q) for p in range(4) for q in range(4) if s.values[p, q] == 0}
    assert masked == {(0, 0), (0, 2), (2, 0), (2, 2), (1, 1), (1, 3), (3, 1), (3, 3)}


def test_mask_k1_only_diagonal():
    np.testing.assert_array_equal(positive_mask(4, 1), np.eye(4, dtype=bool))


def test_mask_neg_inf_and_unchanged_elsewhere():
    s = _random_sim()
    m = mask_positives(s, "neg_inf")
    pos = positive_mask(4, 2)
    assert np.all(np.isneginf(m.values[pos]))
    np.testing.assert_array_equal(m.values[~pos], s.values[~pos])


def test_mask_keeps_symmetry():
    m = mask_positives(_random_sim(seed=5)).values
    assert np.array_equal(m, m.T)


def test_mask_twice_rejected():
    with pytest.raises(UsageError):
        mask_positives(mask_positives(_random_sim()))
    with pytest.raises(UsageError):
        mask_positives(_random_sim(), "ones")


def test_softmax_constant_row():
    np.testing.assert_allclose(softmax_rows(np.full((1, 4), 0.3), 0.7).values, 0.25)


def test_softmax_two_entries():
    a = softmax_rows(np.array([[1.0, 0.0]]), 0.1).values[0]
    e = np.exp(-10.0)
    np.testing.assert_allclose(a, [1 / (1 + e), e / (1 + e)], rtol=1e-14)
    np.testing.assert_allclose(a, [0.9999546, 4.54e-5], rtol=1e-3)


def test_softmax_neg_inf_is_exact_zero():
    a = softmax_rows(np.array([[0.0, -np.inf, 1.0]]), 0.5).values
    assert a[0, 1] == 0.0


def test_softmax_all_neg_inf_row():
    with pytest.raises(NumericalError, match="row 1"):
        softmax_rows(np.array([[0.0, 1.0], [-np.inf, -np.inf]]), 0.1)


def test_softmax_no_overflow_small_temperature():
    a = softmax_rows(np.array([[1.0, -1.0, 0.5]]), 1e-3).values
    assert np.all(np.isfinite(a))


def test_global_differs_from_blocks():
    s = mask_positives(_random_sim(seed=7))
    g, b = softmax_rows(s, 0.1).values, softmax_blocks(s, 0.1).values
    assert not np.allclose(g, b)
    np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(b[:, :4].sum(axis=1), 0.5, atol=1e-12)


def test_attention_not_symmetric():
    a = softmax_rows(mask_positives(_random_sim(seed=8)), 0.1).values
    assert not np.allclose(a, a.T)


def test_entropy_monotone_in_temperature():
    for seed in range(5):
        s = mask_positives(_random_sim(n=16, k=2, d=8, seed=seed))
        h = [row_entropy(softmax_rows(s, t).values).mean() for t in (0.2, 0.1, 0.05)]
        assert h[0] >= h[1] >= h[2]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-1, 1)),
       st.floats(0.05, 2.0), st.floats(-50, 50))
def test_softmax_properties(vals, tau, shift):
    a = softmax_rows(vals, tau).values
    assert np.all(a >= 0)
    np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(softmax_rows(vals + shift, tau).values, a, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 10_000))
def test_similarity_properties(n, k, seed):
    z = np.random.default_rng(seed).standard_normal((n * k, 3))
    s = cosine_similarity(z, n).values
    assert np.array_equal(s, s.T)
    assert np.all(np.abs(s) <= 1 + 1e-12)


def test_dump_csv(tmp_path):
    s = mask_positives(_random_sim())
    path = tmp_path / "s.csv"
    dump_csv(s, path, 4, 2, 0.1, "zero")
    lines = path.read_text().splitlines()
    assert lines[0] == "# n=4 k=2 tau=0.1 masked=zero"
    np.testing.assert_array_equal(np.loadtxt(path, delimiter=",", comments="#"), s.values)
