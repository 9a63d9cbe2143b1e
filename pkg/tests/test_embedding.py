"""Combinatorics and bookkeeping of the delay-embedding grid.

The counting claims (unknown cells, consistency pairs, future indices)
are verified against brute-force enumeration over every grid size with
2 <= S <= m <= 12.
"""

import numpy as np
import pytest

from defm.embedding import (
    DelayEmbedding,
    SeriesMatrix,
    aggregate_antidiagonal,
    build_delay_embedding,
    consistency_pairs,
    full_hankel_grid,
    pair_mask,
)


def brute_force_counts(s_dim: int, m: int) -> tuple[int, int]:
    """Enumerate every cell and adjacent anti-diagonal pair directly."""
    unknown = 0
    for r in range(s_dim):
        for c in range(m):
            if r + c >= m:
                unknown += 1
    pairs = 0
    for r in range(1, s_dim):
        for c in range(m - 1):
            known_a = (r + c) < m
            known_b = (r - 1 + c + 1) < m
            if not (known_a and known_b):
                pairs += 1
    return unknown, pairs


def test_counts_match_formulas_for_all_small_grids():
    for m in range(2, 13):
        for s_dim in range(2, m + 1):
            emb = build_delay_embedding(np.arange(m, dtype=float), s_dim)
            unknown, pairs = brute_force_counts(s_dim, m)
            assert unknown == s_dim * (s_dim - 1) // 2
            assert pairs == (s_dim - 1) * (s_dim - 2) // 2
            assert emb.unknown_cell_count() == unknown
            assert len(consistency_pairs(emb)) == pairs
            assert int(pair_mask(s_dim, m).sum()) == pairs


def test_grid_cell_layout():
    y = np.array([10.0, 11.0, 12.0, 13.0, 14.0])
    emb = build_delay_embedding(y, 3)
    assert emb.values.shape == (3, 5)
    for r in range(3):
        for c in range(5):
            if r + c < 5:
                assert emb.known_mask[r, c]
                assert emb.values[r, c] == y[r + c]
            else:
                assert not emb.known_mask[r, c]
                assert emb.values[r, c] == 0.0


def test_future_time_indices():
    emb = build_delay_embedding(np.zeros(45), 19)
    np.testing.assert_array_equal(emb.future_time_indices(), np.arange(45, 63))
    assert emb.unknown_cell_count() == 171


def test_consistency_pairs_share_time_index():
    emb = build_delay_embedding(np.zeros(8), 5)
    for (r, c), (r2, c2) in consistency_pairs(emb):
        assert r + c == r2 + c2
        assert r - 1 == r2 and c + 1 == c2
        assert r + c >= 8


def test_pair_mask_matches_pair_list():
    for s_dim, m in [(3, 4), (5, 8), (19, 45)]:
        emb = build_delay_embedding(np.zeros(m), s_dim)
        mask = pair_mask(s_dim, m)
        listed = {(r, c) for (r, c), _ in consistency_pairs(emb)}
        from_mask = {(r + 1, c) for r, c in zip(*np.nonzero(mask))}
        assert listed == from_mask


def test_full_hankel_grid_round_trip():
    y = np.arange(12, dtype=float)
    grid = full_hankel_grid(y, s_dim=4, m=9)
    assert grid.shape == (4, 9)
    np.testing.assert_array_equal(grid[0], y[:9])
    np.testing.assert_array_equal(grid[:, -1], y[8:12])
    # exact Hankel: anti-diagonal neighbors agree everywhere
    np.testing.assert_array_equal(grid[1:, :-1], grid[:-1, 1:])
    with pytest.raises(ValueError):
        full_hankel_grid(y, s_dim=5, m=9)


def test_aggregate_on_hankel_grid_recovers_series_with_zero_spread():
    y = np.sin(np.arange(14) * 0.3)
    emb = build_delay_embedding(y[:10], 5)
    grid = full_hankel_grid(y, s_dim=5, m=10)
    estimates, spreads = aggregate_antidiagonal(grid, emb)
    np.testing.assert_allclose(estimates, y[10:14], atol=1e-12)
    np.testing.assert_allclose(spreads, np.zeros(4), atol=1e-12)


def test_aggregate_mean_and_spread_on_disagreeing_grid():
    emb = build_delay_embedding(np.zeros(3), 3)
    grid = np.zeros((3, 3))
    grid[2, 1] = 1.0  # time index 3, paired with cell (1, 2)
    grid[1, 2] = 3.0
    grid[2, 2] = 7.0  # time index 4, single estimate
    estimates, spreads = aggregate_antidiagonal(grid, emb)
    np.testing.assert_allclose(estimates, [2.0, 7.0], atol=1e-12)
    np.testing.assert_allclose(spreads, [1.0, 0.0], atol=1e-12)


def test_embedding_dimension_bounds():
    with pytest.raises(ValueError):
        build_delay_embedding(np.zeros(5), 6)
    with pytest.raises(ValueError):
        build_delay_embedding(np.zeros(5), 0)
    one = build_delay_embedding(np.arange(5.0), 1)
    assert one.unknown_cell_count() == 0
    assert len(consistency_pairs(one)) == 0


def test_series_matrix_round_trip_and_window():
    time_major = np.arange(12, dtype=float).reshape(4, 3)
    series = SeriesMatrix.from_time_major(time_major, dt=0.5, target_index=2)
    assert series.n == 3 and series.m == 4
    np.testing.assert_array_equal(series.to_time_major(), time_major)
    np.testing.assert_array_equal(series.target_row(), time_major[:, 2])
    win = series.window(1, 2)
    assert win.m == 2 and win.dt == 0.5
    np.testing.assert_array_equal(win.data, series.data[:, 1:3])
    with pytest.raises(ValueError):
        series.window(2, 5)


def test_series_matrix_validation():
    with pytest.raises(ValueError):
        SeriesMatrix(np.zeros(5))
    with pytest.raises(ValueError):
        SeriesMatrix(np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        SeriesMatrix(np.zeros((2, 3)), var_names=["a"])
    series = SeriesMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        series.target_row()
    with pytest.raises(ValueError):
        series.resolve_target(5)


def test_build_from_series_matrix_uses_target_row():
    data = np.vstack([np.arange(6.0), np.arange(6.0) * 10.0])
    series = SeriesMatrix(data, target_index=1)
    emb = build_delay_embedding(series, 3)
    np.testing.assert_array_equal(emb.values[0], data[1])
    emb0 = build_delay_embedding(series, 3, target_index=0)
    np.testing.assert_array_equal(emb0.values[0], data[0])
