"""Bordered-system update tests against dense linear algebra oracles."""

import numpy as np
import pytest

from stvc import linalg
from stvc.errors import NumericalFailureError
from stvc.schur import (
    BlockCache,
    bordered_inverse,
    commit_append,
    logdet_update,
    schur_complement,
    solution_append,
    try_factor,
)


def random_bordered_spd(rng, n, w, jitter=1.0):
    """Random SPD matrix of size n + w split into its bordered pieces."""
    a = rng.normal(size=(n + w, n + w))
    m = a @ a.T + jitter * np.eye(n + w)
    return m, m[:n, :n], m[:n, n:], m[n:, n:]


class TestScalarExamples:
    def test_complement_value(self):
        cache = BlockCache.from_dense(np.array([[2.0]]))
        q = schur_complement(cache, np.array([[1.0]]), np.array([[3.0]]))
        assert q[0, 0] == pytest.approx(2.5)

    def test_bordered_inverse_2x2(self):
        cache = BlockCache.from_dense(np.array([[2.0]]))
        g_cross = np.array([[1.0]])
        q = schur_complement(cache, g_cross, np.array([[3.0]]))
        inv = bordered_inverse(cache, g_cross, q)
        assert np.allclose(inv, [[0.6, -0.2], [-0.2, 0.4]])

    def test_determinant_multiplies(self):
        cache = BlockCache.from_dense(np.array([[2.0]]))
        q = schur_complement(cache, np.array([[1.0]]), np.array([[3.0]]))
        assert logdet_update(cache, q) == pytest.approx(np.log(5.0))


class TestStructure:
    def test_zero_cross_is_block_diagonal(self):
        rng = np.random.default_rng(0)
        _, h, _, g_new = random_bordered_spd(rng, 6, 3)
        cache = BlockCache.from_dense(h)
        g_cross = np.zeros((6, 3))
        q = schur_complement(cache, g_cross, g_new)
        assert np.allclose(q, g_new)
        inv = bordered_inverse(cache, g_cross, q)
        assert np.allclose(inv[:6, 6:], 0.0, atol=1e-12)
        assert np.allclose(inv[:6, :6], cache.H_inv)
        assert np.allclose(inv[6:, 6:], np.linalg.inv(g_new))

    def test_identity_append_keeps_logdet(self):
        rng = np.random.default_rng(1)
        _, h, _, _ = random_bordered_spd(rng, 5, 2)
        cache = BlockCache.from_dense(h)
        q = schur_complement(cache, np.zeros((5, 2)), np.eye(2))
        assert logdet_update(cache, q) == pytest.approx(cache.logdetH)

    def test_indefinite_complement_rejected(self):
        q = np.array([[1.0, 0.0], [0.0, -0.5]])
        assert try_factor(q) is None
        rng = np.random.default_rng(2)
        _, h, _, _ = random_bordered_spd(rng, 4, 2)
        cache = BlockCache.from_dense(h)
        with pytest.raises(NumericalFailureError):
            commit_append(cache, np.zeros((4, 2)), q)


@pytest.mark.parametrize("n,w,seed", [(8, 3, 10), (50, 10, 11), (30, 5, 12)])
class TestDenseAgreement:
    def test_complement(self, n, w, seed):
        rng = np.random.default_rng(seed)
        _, h, g_cross, g_new = random_bordered_spd(rng, n, w)
        cache = BlockCache.from_dense(h)
        q = schur_complement(cache, g_cross, g_new)
        expected = g_new - g_cross.T @ np.linalg.solve(h, g_cross)
        assert np.allclose(q, expected, atol=1e-9)

    def test_inverse(self, n, w, seed):
        rng = np.random.default_rng(seed)
        m, h, g_cross, g_new = random_bordered_spd(rng, n, w)
        cache = BlockCache.from_dense(h)
        q = schur_complement(cache, g_cross, g_new)
        inv = bordered_inverse(cache, g_cross, q)
        assert np.abs(inv - np.linalg.inv(m)).max() < 1e-8

    def test_logdet(self, n, w, seed):
        rng = np.random.default_rng(seed)
        m, h, g_cross, g_new = random_bordered_spd(rng, n, w)
        cache = BlockCache.from_dense(h)
        q = schur_complement(cache, g_cross, g_new)
        _, expected = np.linalg.slogdet(m)
        assert logdet_update(cache, q) == pytest.approx(expected, abs=1e-8)

    def test_solution(self, n, w, seed):
        rng = np.random.default_rng(seed)
        m, h, g_cross, _ = random_bordered_spd(rng, n, w)
        cache = BlockCache.from_dense(h)
        r = rng.normal(size=n + w)
        c_base = np.linalg.solve(h, r[:n])
        q = schur_complement(cache, g_cross, m[n:, n:])
        c = solution_append(c_base, r[n:], g_cross, try_factor(q),
                            cache.H_inv)
        assert np.allclose(c, np.linalg.solve(m, r), atol=1e-8)


class TestSequentialCommits:
    def test_two_appends_match_one_dense_factor(self):
        rng = np.random.default_rng(20)
        m, _, _, _ = random_bordered_spd(rng, 12, 0)
        h0 = m[:4, :4]
        cache = BlockCache.from_dense(h0)
        cache = commit_append(cache, m[:4, 4:9], m[4:9, 4:9])
        assert cache.dim == 9
        cache = commit_append(cache, m[:9, 9:], m[9:, 9:])
        assert cache.dim == 12
        assert np.abs(cache.H_inv - np.linalg.inv(m)).max() < 1e-9
        _, expected = np.linalg.slogdet(m)
        assert cache.logdetH == pytest.approx(expected, abs=1e-9)

    def test_many_small_appends_stay_accurate(self):
        rng = np.random.default_rng(21)
        total = 120
        m, _, _, _ = random_bordered_spd(rng, total, 0, jitter=2.0)
        cache = BlockCache.from_dense(m[:10, :10])
        k = 10
        while k < total:
            w = min(10, total - k)
            cache = commit_append(cache, m[:k, k:k + w],
                                  m[k:k + w, k:k + w])
            k += w
        assert np.abs(cache.H_inv - np.linalg.inv(m)).max() < 1e-8
        _, expected = np.linalg.slogdet(m)
        assert cache.logdetH == pytest.approx(expected, abs=1e-8)

    def test_reuses_supplied_complement(self):
        rng = np.random.default_rng(22)
        m, h, g_cross, g_new = random_bordered_spd(rng, 6, 2)
        cache = BlockCache.from_dense(h)
        q = schur_complement(cache, g_cross, g_new)
        a = commit_append(cache, g_cross, g_new)
        b = commit_append(cache, g_cross, g_new, q=q)
        assert np.array_equal(a.H_inv, b.H_inv)
        assert a.logdetH == b.logdetH

    def test_logdet_delta_equals_complement_det(self):
        rng = np.random.default_rng(23)
        _, h, g_cross, g_new = random_bordered_spd(rng, 10, 4)
        cache = BlockCache.from_dense(h)
        q = schur_complement(cache, g_cross, g_new)
        delta = logdet_update(cache, q) - cache.logdetH
        assert delta == pytest.approx(np.linalg.slogdet(q)[1], abs=1e-10)


class TestInstrumentation:
    def test_only_block_width_factorizations(self):
        rng = np.random.default_rng(24)
        _, h, g_cross, g_new = random_bordered_spd(rng, 40, 6)
        cache = BlockCache.from_dense(h)
        with linalg.record_factorizations() as dims:
            q = schur_complement(cache, g_cross, g_new)
            try_factor(q)
            logdet_update(cache, q)
        assert dims == [6, 6]
