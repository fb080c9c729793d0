import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tvrecover.errors import InvalidArgument, SparsityTooLarge
from tvrecover.operators import (diff_1d, diff_adjoint, diff_matrix, diff_nd, grad_size,
                                 ksum_largest, power_norm, relaxed_null_margin,
                                 relaxed_null_sets, restrict, top_k_indices, tv_norm)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_diff_examples():
    assert np.array_equal(diff_1d([2.0] * 5), np.zeros(4))
    assert np.array_equal(diff_1d([3, 1, 2, 2]), [-2, 1, 0])
    assert np.array_equal(diff_nd(np.ones((4, 4))), np.zeros(24))
    assert np.array_equal(diff_nd([[1, 2], [3, 4]]), [1, 1, 2, 2])
    with pytest.raises(InvalidArgument):
        diff_1d([1.0])


def test_tv_norm_examples():
    assert tv_norm(np.full(7, 3.0)) == 0
    assert tv_norm([3, 1, 2, 2]) == 3
    assert tv_norm([[1, 2], [3, 4]]) == 6


@pytest.mark.parametrize("shape", [(64,), (16, 16), (5, 6, 7)])
def test_matrix_and_adjoint_agree(shape):
    rng = np.random.default_rng(0)
    X = rng.standard_normal(shape)
    D = diff_matrix(shape)
    assert D.shape == (grad_size(shape), int(np.prod(shape)))
    assert np.allclose(D @ X.ravel(), diff_nd(X))
    g = rng.standard_normal(D.shape[0])
    assert np.allclose(D.T @ g, diff_adjoint(g, shape).ravel())


@pytest.mark.parametrize("shape,limit", [((64,), 2.0), ((16, 16), 2 * np.sqrt(2)),
                                         ((8, 8, 8), 2 * np.sqrt(3))])
def test_operator_norm_bound(shape, limit):
    D = diff_matrix(shape)
    est = power_norm(lambda v: D @ v, lambda g: D.T @ g, D.shape[1], iters=200)
    assert est <= limit + 1e-6


def test_linearity():
    rng = np.random.default_rng(1)
    for _ in range(500):
        n = int(rng.integers(2, 50))
        x, y = rng.standard_normal((2, n))
        a, b = rng.standard_normal(2)
        assert np.allclose(diff_1d(a * x + b * y), a * diff_1d(x) + b * diff_1d(y), atol=1e-12)


def test_ksum_examples():
    g = [-2.0, 1.0, 0.0]
    assert ksum_largest(g, 0) == 0
    assert ksum_largest(g, 2) == 3
    assert ksum_largest(g, 3) == 3
    with pytest.raises(InvalidArgument):
        ksum_largest(g, 4)
    assert list(top_k_indices([1.0, -1.0, 1.0], 2)) == [0, 1]


@settings(max_examples=200, deadline=None)
@given(g=arrays(float, st.integers(1, 40), elements=finite), data=st.data())
def test_ksum_matches_sort(g, data):
    k = data.draw(st.integers(0, g.size))
    expect = np.sort(np.abs(g))[::-1][:k].sum()
    assert ksum_largest(g, k) == pytest.approx(expect, rel=1e-12, abs=1e-9)


def test_restrict_examples():
    g = [-2.0, 1.0, 0.0]
    assert restrict(g, []) == (0.0, 3.0)
    assert restrict(g, [0]) == (2.0, 1.0)
    assert restrict(g, [0, 1, 2]) == (3.0, 0.0)
    with pytest.raises(InvalidArgument):
        restrict(g, [3])


def test_restrict_partition_identity():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        g = rng.standard_normal(n)
        K = rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False)
        on, off = restrict(g, K)
        assert on + off == pytest.approx(np.abs(g).sum(), rel=1e-15, abs=1e-15)


def test_relaxed_sets_follow_greedy_rule():
    s = relaxed_null_sets(10, [4])
    assert s.dk == (4, 5)
    assert s.kb == (0, 2, 6, 8)
    assert len(s.kb) >= 3
    s = relaxed_null_sets(8, [])
    assert s.dk == () and s.kb == (0, 2, 4, 6)
    s = relaxed_null_sets(7, [0, 2])
    assert s.dk == (0, 1, 2, 3)
    assert s.kb == (4,)
    with pytest.raises(SparsityTooLarge):
        relaxed_null_sets(6, [0, 2])


def test_relaxed_sets_invariants():
    rng = np.random.default_rng(3)
    for _ in range(300):
        n = int(rng.integers(2, 60))
        kmax = (n - 1) // 3
        K = rng.choice(n - 1, size=int(rng.integers(0, kmax + 1)), replace=False)
        s = relaxed_null_sets(n, K)
        assert len(s.dk) <= 2 * len(K)
        assert len(s.kb) >= int(np.ceil((n - 1 - 3 * len(K)) / 2))
        touched = [j for i in s.kb for j in (i, i + 1)]
        assert len(set(touched)) == len(touched)
        assert not set(touched) & set(s.dk)


def test_relaxed_margin_examples():
    x = np.full(10, 2.0)
    assert relaxed_null_margin(x, [4]) == pytest.approx(-8.0)
    assert relaxed_null_margin(np.zeros(10), [4]) == 0.0
    x = np.zeros(10)
    x[1] = 1.0  # jump on kb element 0, dk = {4, 5} stays zero
    assert relaxed_null_margin(x, [4]) == pytest.approx(1.0)


def test_support_triangle_bound():
    rng = np.random.default_rng(4)
    for _ in range(500):
        n = int(rng.integers(4, 40))
        x = rng.standard_normal(n)
        K = rng.choice(n - 1, size=int(rng.integers(1, (n - 1) // 3 + 1)), replace=False)
        dk = relaxed_null_sets(n, K).dk
        on, _ = restrict(np.diff(x), K)
        assert on <= 2 * np.abs(x[list(dk)]).sum() + 1e-12


def test_diff_adjoint_rejects_wrong_length():
    with pytest.raises(InvalidArgument):
        diff_adjoint(np.zeros(5), (3, 3))
