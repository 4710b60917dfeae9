"""Unit and property tests for indicators and the eviction operation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cakesim import (
    IDENTITY_POOL,
    Indicator,
    KvCacheLayer,
    PoolKind,
    PoolSpec,
    WindowAttention,
    build_indicator,
    caches_equal,
    combine_head_indicators,
    evict,
    indicators_equal,
    pool_1d,
    top_k_positions,
)

ABS_TOL = 1e-9


def _cache_from_scores(scores, omega_count, budget=None, start_pos=0):
    """Cache whose payload rows encode their position, for identity checks."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    positions = np.arange(start_pos, start_pos + n, dtype=np.int64)
    key = positions[:, None] * np.array([1.0, 2.0]) + 0.5
    value = -key - 0.25
    ind = Indicator(scores, omega_count)
    return KvCacheLayer(positions, key, value, ind, budget if budget is not None else n)


class TestPooling:
    def test_spec_rejects_even_or_nonpositive_kernels(self):
        with pytest.raises(ValueError):
            PoolSpec(PoolKind.MAX, 2)
        with pytest.raises(ValueError):
            PoolSpec(PoolKind.AVG, 0)

    def test_identity_pool(self):
        scores = np.array([0.4, 0.1, 0.8])
        assert np.array_equal(pool_1d(scores, IDENTITY_POOL), scores)

    def test_max_pool_example(self):
        out = pool_1d(np.array([1.0, 5.0, 2.0]), PoolSpec(PoolKind.MAX, 3))
        assert np.array_equal(out, np.array([5.0, 5.0, 5.0]))

    def test_avg_pool_truncates_edge_windows(self):
        out = pool_1d(np.array([0.0, 0.0, 9.0, 0.0, 0.0]), PoolSpec(PoolKind.AVG, 3))
        assert np.array_equal(out, np.array([0.0, 3.0, 3.0, 3.0, 0.0]))


class TestIndicator:
    def test_build_indicator_example(self):
        # columns over the 2 window rows: [0.1, 0.3] and [0.2, 0.2]
        values = np.array(
            [
                [0.1, 0.2, 0.7, 0.0],
                [0.3, 0.2, 0.25, 0.25],
            ]
        )
        ind = build_indicator(WindowAttention(values), gamma=200.0)
        assert ind.omega_count == 2
        assert len(ind) == 4
        assert abs(ind.scores[0] - 2.2) < ABS_TOL  # 0.2 + 200 * 0.01
        assert ind.scores[1] == 0.2  # constant column: variance exactly 0
        assert np.all(np.isinf(ind.scores[2:]))

    def test_gamma_zero_is_plain_mean(self):
        values = np.array(
            [
                [0.1, 0.2, 0.7, 0.0],
                [0.3, 0.2, 0.25, 0.25],
            ]
        )
        ind = build_indicator(WindowAttention(values), gamma=0.0)
        assert abs(ind.scores[0] - 0.2) < ABS_TOL

    def test_build_indicator_rejects_negative_gamma(self):
        values = np.array([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5]])
        with pytest.raises(ValueError):
            build_indicator(WindowAttention(values), gamma=-1.0)

    def test_pooling_applies_to_finite_scores_only(self):
        values = np.array(
            [
                [0.25, 0.0, 0.75, 0.0],
                [0.25, 0.0, 0.25, 0.5],
            ]
        )
        pooled = build_indicator(WindowAttention(values), gamma=0.0, pool=PoolSpec(PoolKind.MAX, 3))
        plain = build_indicator(WindowAttention(values), gamma=0.0)
        expected = np.maximum.reduce(
            [np.array([plain.scores[0], plain.scores[1]]), np.array([plain.scores[1], plain.scores[0]])]
        )
        assert np.array_equal(pooled.finite_scores, expected)
        assert np.all(np.isinf(pooled.scores[2:]))

    def test_rejects_nonfinite_or_negative_unprotected_scores(self):
        with pytest.raises(ValueError):
            Indicator(np.array([0.5, np.nan, np.inf]), 1)
        with pytest.raises(ValueError):
            Indicator(np.array([-0.5, np.inf]), 1)
        with pytest.raises(ValueError):
            Indicator(np.array([0.5]), 2)

    def test_combine_heads_is_arithmetic_mean(self):
        a = Indicator(np.array([2.0, 4.0, np.inf]), 1)
        b = Indicator(np.array([4.0, 8.0, np.inf]), 1)
        combined = combine_head_indicators([a, b])
        assert np.array_equal(combined.finite_scores, np.array([3.0, 6.0]))
        assert combined.omega_count == 1

    def test_combine_heads_single_head_copies(self):
        a = Indicator(np.array([2.0, np.inf]), 1)
        out = combine_head_indicators([a])
        assert indicators_equal(a, out)
        assert out.scores is not a.scores

    def test_combine_heads_rejects_mismatch(self):
        a = Indicator(np.array([2.0, np.inf]), 1)
        b = Indicator(np.array([2.0, 3.0, np.inf]), 1)
        with pytest.raises(ValueError):
            combine_head_indicators([a, b])
        with pytest.raises(ValueError):
            combine_head_indicators([])


class TestTopK:
    def test_protected_plus_best_finite(self):
        ind = Indicator(np.array([0.5, 0.9, 0.1, np.inf, np.inf]), 2)
        assert np.array_equal(top_k_positions(ind, 3), np.array([1, 3, 4]))

    def test_only_protected(self):
        ind = Indicator(np.array([np.inf, np.inf]), 2)
        assert np.array_equal(top_k_positions(ind, 2), np.array([0, 1]))

    def test_tie_break_prefers_recent(self):
        ind = Indicator(np.array([0.4, 0.4, 0.4]), 0)
        assert np.array_equal(top_k_positions(ind, 1), np.array([2]))

    def test_rejects_out_of_range_k(self):
        ind = Indicator(np.array([0.5, np.inf]), 1)
        with pytest.raises(ValueError):
            top_k_positions(ind, 0)
        with pytest.raises(ValueError):
            top_k_positions(ind, 3)

    @settings(max_examples=120, deadline=None)
    @given(
        st.integers(min_value=1, max_value=40),
        st.integers(min_value=0, max_value=2**32 - 1),
        st.booleans(),
    )
    def test_nested_budgets_give_nested_keep_sets(self, n, seed, force_ties):
        rng = np.random.default_rng(seed)
        omega = int(rng.integers(0, n + 1))
        if force_ties:
            finite = rng.integers(0, 3, n - omega).astype(np.float64) * 0.5
        else:
            finite = rng.random(n - omega)
        ind = Indicator(np.concatenate([finite, np.full(omega, np.inf)]), omega)
        k1 = int(rng.integers(omega, n + 1))
        k2 = int(rng.integers(omega, k1 + 1))
        keep1 = set(top_k_positions(ind, k1).tolist())
        keep2 = set(top_k_positions(ind, k2).tolist())
        assert keep2 <= keep1


class TestEvict:
    def test_eviction_keeps_positions_payload_and_scores_aligned(self):
        cache = _cache_from_scores([0.5, 0.9, 0.1, np.inf, np.inf], 2, start_pos=10)
        out = evict(cache, 3)
        assert np.array_equal(out.positions, np.array([11, 13, 14]))
        assert out.budget == 3
        assert np.array_equal(out.key_payload, out.positions[:, None] * np.array([1.0, 2.0]) + 0.5)
        assert np.array_equal(out.value_payload, -out.key_payload - 0.25)
        assert out.indicator.omega_count == 2
        assert np.array_equal(out.indicator.finite_scores, np.array([0.9]))

    def test_under_budget_is_identity(self):
        cache = _cache_from_scores([0.5, 0.9, np.inf], 1)
        out = evict(cache, 5)
        assert caches_equal(cache, out)
        assert out.budget == 5

    def test_two_step_equals_one_step(self):
        cache = _cache_from_scores([0.5, 0.9, 0.1, 0.7, np.inf, np.inf], 2)
        once = evict(cache, 2)
        twice = evict(evict(cache, 4), 2)
        assert caches_equal(once, twice)

    def test_rejects_budget_below_protection(self):
        cache = _cache_from_scores([0.5, np.inf, np.inf], 2)
        with pytest.raises(ValueError):
            evict(cache, 1)

    def test_protected_window_always_survives(self):
        cache = _cache_from_scores([0.1, 0.2, 0.3, np.inf, np.inf, np.inf], 3)
        out = evict(cache, 3)
        assert np.array_equal(out.positions, cache.positions[-3:])

    @settings(max_examples=120, deadline=None)
    @given(
        st.integers(min_value=1, max_value=48),
        st.integers(min_value=0, max_value=2**32 - 1),
        st.integers(min_value=1, max_value=6),
        st.booleans(),
    )
    def test_cascade_collapses_to_final_budget(self, n, seed, num_stages, force_ties):
        rng = np.random.default_rng(seed)
        omega = int(rng.integers(0, n + 1))
        if force_ties:
            finite = rng.integers(0, 4, n - omega).astype(np.float64) * 0.25
        else:
            finite = rng.random(n - omega)
        cache = _cache_from_scores(np.concatenate([finite, np.full(omega, np.inf)]), omega)
        budgets = sorted(
            (int(rng.integers(omega, n + 1)) for _ in range(num_stages)), reverse=True
        )
        folded = cache
        for b in budgets:
            folded = evict(folded, b)
        direct = evict(cache, budgets[-1])
        assert caches_equal(folded, direct)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(min_value=2, max_value=40), st.integers(min_value=0, max_value=2**32 - 1))
    def test_idempotent_at_fixed_budget(self, n, seed):
        rng = np.random.default_rng(seed)
        omega = int(rng.integers(0, n))
        finite = rng.integers(0, 3, n - omega).astype(np.float64) * 0.5
        cache = _cache_from_scores(np.concatenate([finite, np.full(omega, np.inf)]), omega)
        b = int(rng.integers(omega, n + 1))
        once = evict(cache, b)
        assert caches_equal(once, evict(once, b))


class TestKvCacheLayer:
    def test_rejects_unsorted_positions(self):
        ind = Indicator(np.array([0.1, 0.2]), 0)
        with pytest.raises(ValueError):
            KvCacheLayer(np.array([3, 3]), np.zeros((2, 1)), np.zeros((2, 1)), ind, 2)

    def test_rejects_misaligned_payload(self):
        ind = Indicator(np.array([0.1, 0.2]), 0)
        with pytest.raises(ValueError):
            KvCacheLayer(np.array([0, 1]), np.zeros((3, 1)), np.zeros((2, 1)), ind, 2)

    def test_rejects_misaligned_indicator(self):
        ind = Indicator(np.array([0.1]), 0)
        with pytest.raises(ValueError):
            KvCacheLayer(np.array([0, 1]), np.zeros((2, 1)), np.zeros((2, 1)), ind, 2)
