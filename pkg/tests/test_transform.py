import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_binary
from localseg.episode import Episode
from localseg.errors import DimensionMismatch, EmptyList, EmptyMask
from localseg.features import init_params
from localseg.linalg import cosine_similarity
from localseg.transform import (
    attention_from_relationship,
    average_attention,
    filter_query_features,
    mask_features,
    raw_attention,
    relationship_matrix,
    transform_episode,
    truth_relationship,
)


def test_mask_features_examples():
    f = np.array([[[2.0, -1.0], [5.0, 5.0]]])
    out = mask_features(f, [[1, 0]])
    np.testing.assert_array_equal(out, [[[2.0, -1.0], [0.0, 0.0]]])
    np.testing.assert_array_equal(mask_features(f, np.ones((1, 2))), f)
    np.testing.assert_array_equal(mask_features(f, np.zeros((1, 2))), np.zeros_like(f))
    with pytest.raises(DimensionMismatch):
        mask_features(f, np.ones((2, 2)))


def test_relationship_orthonormal_is_identity():
    e = np.eye(4).reshape(2, 2, 4)
    np.testing.assert_allclose(relationship_matrix(e, e), np.eye(4), atol=1e-15)


def test_relationship_two_location_case():
    e_q = np.array([[[1.0, 0.0], [1.0, 1.0]]])
    e_s = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    expected = np.array([[0.0, 1.0], [1 / np.sqrt(2), 1 / np.sqrt(2)]])
    np.testing.assert_allclose(relationship_matrix(e_q, e_s), expected, atol=1e-15)


def test_relationship_zero_support_column(rng):
    e_q = rng.normal(size=(3, 3, 5))
    e_s = rng.normal(size=(2, 2, 5))
    e_s[1, 0] = 0.0
    r = relationship_matrix(e_q, e_s)
    assert np.all(r[:, 2] == 0.0)


def test_relationship_rows_query_cols_support_pairwise(rng):
    e_q = rng.normal(size=(2, 3, 4))
    e_s = rng.normal(size=(4, 1, 4))
    r = relationship_matrix(e_q, e_s)
    assert r.shape == (6, 4)
    for i in range(6):
        for j in range(4):
            oracle = cosine_similarity(e_q[i // 3, i % 3], e_s[j, 0])
            assert r[i, j] == pytest.approx(oracle, abs=1e-14)


def test_relationship_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        relationship_matrix(np.ones((2, 2, 3)), np.ones((2, 2, 4)))


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_relationship_entries_bounded(seed):
    rng = np.random.default_rng(seed)
    r = relationship_matrix(rng.normal(size=(3, 3, 4)), rng.normal(size=(2, 4, 4)))
    assert r.min() >= -1 - 1e-12 and r.max() <= 1 + 1e-12


def test_truth_relationship_examples():
    np.testing.assert_array_equal(truth_relationship([[1], [0]], [[1, 1]]), [[1, 1], [0, 0]])
    np.testing.assert_array_equal(truth_relationship(np.zeros((2, 2)), np.ones((2, 2))),
                                  np.zeros((4, 4)))
    np.testing.assert_array_equal(truth_relationship(np.ones((2, 2)), np.ones((1, 3))),
                                  np.ones((4, 3)))


def test_truth_relationship_outer_product_oracle(rng):
    gq = random_binary(rng, (3, 2))
    gs = random_binary(rng, (2, 2))
    r = truth_relationship(gq, gs)
    for i in range(6):
        for j in range(4):
            assert r[i, j] == gq.flat[i] * gs.flat[j]


def test_attention_recovers_query_mask_exactly(rng):
    gq = random_binary(rng, (4, 5), nonempty=False)
    gs = random_binary(rng, (3, 3))
    _, raw = attention_from_relationship(truth_relationship(gq, gs), gs, gq.shape)
    np.testing.assert_allclose(raw, gq, atol=1e-12)


def test_attention_empty_support_mask():
    with pytest.raises(EmptyMask):
        attention_from_relationship(np.ones((4, 4)), np.zeros((2, 2)))


def test_attention_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        raw_attention(np.ones((4, 3)), np.ones((2, 2)))


def test_attention_least_squares_oracle(rng):
    r = rng.normal(size=(4, 4))
    gs = np.array([[1, 0], [1, 0]])
    raw = raw_attention(r, gs)
    np.testing.assert_allclose(raw, (r[:, 0] + r[:, 2]) / 2, atol=1e-15)
    g = gs.reshape(-1, 1).astype(float)
    for i in range(4):
        # solve a * g^T = r_i in the least-squares sense
        a_i = np.linalg.lstsq(g, r[i], rcond=None)[0][0]
        assert raw[i] == pytest.approx(a_i, abs=1e-12)


def test_attention_normalized_range(rng):
    r = rng.normal(size=(9, 4))
    a_hat, a_raw = attention_from_relationship(r, [[1, 1], [0, 1]], (3, 3))
    assert a_hat.shape == a_raw.shape == (3, 3)
    assert a_hat.min() == 0.0 and a_hat.max() == 1.0


def test_attention_linearity(rng):
    r1, r2 = rng.normal(size=(2, 6, 8))
    gs = random_binary(rng, (2, 4))
    alpha, beta = 1.7, -0.4
    lhs = raw_attention(alpha * r1 + beta * r2, gs)
    rhs = alpha * raw_attention(r1, gs) + beta * raw_attention(r2, gs)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_attention_support_permutation_equivariance(rng):
    r = rng.normal(size=(5, 12))
    gs = random_binary(rng, (3, 4))
    perm = rng.permutation(12)
    base = raw_attention(r, gs)
    permuted = raw_attention(r[:, perm], gs.ravel()[perm].reshape(3, 4))
    np.testing.assert_allclose(permuted, base, atol=1e-9)


def test_filter_query_features():
    f = np.array([[[4.0]]])
    np.testing.assert_array_equal(filter_query_features(f, [[0.25]]), [[[1.0]]])
    f = np.arange(6.0).reshape(1, 2, 3)
    np.testing.assert_array_equal(filter_query_features(f, np.ones((1, 2))), f)
    np.testing.assert_array_equal(filter_query_features(f, np.zeros((1, 2))), 0 * f)
    with pytest.raises(DimensionMismatch):
        filter_query_features(f, np.ones((2, 2)))


def test_average_attention_examples(rng):
    m = rng.random((3, 3))
    np.testing.assert_array_equal(average_attention([m]), m)
    assert np.array_equal(average_attention([m] * 5), m)
    np.testing.assert_array_equal(average_attention([[[0, 1]], [[1, 0]]]), [[0.5, 0.5]])
    with pytest.raises(EmptyList):
        average_attention([])
    with pytest.raises(DimensionMismatch):
        average_attention([np.ones((2, 2)), np.ones((2, 3))])


@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_average_attention_order_invariant_bitwise(seed, k):
    rng = np.random.default_rng(seed)
    maps = list(rng.random((k, 4, 4)))
    ref = average_attention(maps)
    shuffled = [maps[i] for i in rng.permutation(k)]
    assert np.array_equal(average_attention(shuffled), ref)
    assert ref.min() >= 0 and ref.max() <= 1


def _episode(rng, k=1, size=16):
    img = rng.random((size, size, 3))
    mask = np.zeros((size, size), dtype=np.uint8)
    mask[4:12, 3:10] = 1
    return Episode(((img, mask),) * k, rng.random((size, size, 3)))


def test_transform_episode_shapes(rng):
    params = init_params(np.random.default_rng(0))
    attn, prob = transform_episode(_episode(rng), params, stride=4)
    assert attn.shape == (4, 4)
    assert prob.shape == (16, 16)
    # zero head: every probability is sigmoid(0)
    np.testing.assert_array_equal(prob, 0.5)


def test_transform_five_identical_supports_match_one_shot():
    params = init_params(np.random.default_rng(0))
    params = type(params)(params.w_e, params.w_f, np.linspace(-1, 1, 17))
    one = transform_episode(_episode(np.random.default_rng(5), k=1), params)
    five = transform_episode(_episode(np.random.default_rng(5), k=5), params)
    assert np.array_equal(one[0], five[0])
    assert np.array_equal(one[1], five[1])


def test_transform_empty_support_rejected(rng):
    img = rng.random((8, 8, 3))
    with pytest.raises(EmptyMask):
        Episode(((img, np.zeros((8, 8))),), img)


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_exact_recovery_property(seed):
    rng = np.random.default_rng(seed)
    hq, wq, hs, ws = rng.integers(1, 17, size=4)
    gq = random_binary(rng, (hq, wq), p=rng.random(), nonempty=False)
    gs = random_binary(rng, (hs, ws), p=rng.random())
    raw = raw_attention(truth_relationship(gq, gs), gs)
    assert np.max(np.abs(raw - gq.ravel())) < 1e-6
