"""Delay-embedding grids of a target variable.

The target's scalar series of length ``m`` is unrolled into an ``S x m``
grid whose cell ``(r, c)`` (0-based) holds the target value at window
time index ``r + c``. Cells with ``r + c < m`` are known from the data;
the remaining ``S(S-1)/2`` cells reference the ``S-1`` future indices
``m .. m+S-2`` and are what the forecaster must fill in. Anti-diagonals
of the grid share a time index, which is both the training constraint
and the basis for aggregating multiple estimates of one future value.

A theoretical advisory, not enforced here: faithful attractor
reconstruction wants the embedding dimension S to exceed twice the
box-counting dimension of the underlying attractor, which is unknown
for real data. Pick S per experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SeriesMatrix:
    """An observed n-variable, m-time-point series (variables x time)."""

    data: np.ndarray
    dt: float = 1.0
    target_index: int | None = None
    var_names: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"series data must be 2-D, got shape {self.data.shape}")
        n, m = self.data.shape
        if n < 1 or m < 2:
            raise ValueError(f"series needs n >= 1 variables and m >= 2 time points, got {n}x{m}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("series contains non-finite entries")
        if self.var_names is not None and len(self.var_names) != n:
            raise ValueError("var_names length does not match variable count")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_time_major(cls, array, dt: float = 1.0, target_index: int | None = None,
                        var_names: list[str] | None = None) -> "SeriesMatrix":
        """Build from a (time x variables) array, the CSV orientation."""
        return cls(np.asarray(array, dtype=np.float64).T, dt=dt,
                   target_index=target_index, var_names=var_names)

    def to_time_major(self) -> np.ndarray:
        return self.data.T.copy()

    def window(self, start: int, length: int) -> "SeriesMatrix":
        """Contiguous column slice [start, start+length)."""
        if start < 0 or start + length > self.m:
            raise ValueError(f"window [{start}, {start + length}) exceeds series length {self.m}")
        return SeriesMatrix(self.data[:, start:start + length].copy(), dt=self.dt,
                            target_index=self.target_index, var_names=self.var_names)

    def resolve_target(self, target_index: int | None = None) -> int:
        """Effective target index: the argument, else the stored one."""
        k = self.target_index if target_index is None else target_index
        if k is None:
            raise ValueError("no target variable set")
        if not 0 <= k < self.n:
            raise ValueError(f"target index {k} out of range for {self.n} variables")
        return int(k)

    def target_row(self, target_index: int | None = None) -> np.ndarray:
        return self.data[self.resolve_target(target_index)]


@dataclass
class DelayEmbedding:
    """S x m delay grid with its known/unknown partition.

    Unknown cells hold 0.0; ``known_mask`` is the authority on which
    cells carry data.
    """

    values: np.ndarray
    known_mask: np.ndarray

    @property
    def s_dim(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def future_time_indices(self) -> np.ndarray:
        """Window time indices of the unknown cells: m .. m+S-2."""
        return np.arange(self.m, self.m + self.s_dim - 1)

    def unknown_cell_count(self) -> int:
        return int((~self.known_mask).sum())


def build_delay_embedding(series, s_dim: int, target_index: int | None = None) -> DelayEmbedding:
    """Unroll the target series into its S x m delay grid.

    ``series`` may be a SeriesMatrix (the target row is used) or a 1-D
    target array. Depends only on the target row; the grid's known part
    has exact Hankel structure by construction.
    """
    if isinstance(series, SeriesMatrix):
        y = series.target_row(target_index)
    else:
        y = np.asarray(series, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError(f"expected a 1-D target series, got shape {y.shape}")
    m = y.shape[0]
    if not 1 <= s_dim <= m:
        raise ValueError(f"embedding dimension must satisfy 1 <= S <= m={m}, got {s_dim}")
    idx = np.arange(s_dim)[:, None] + np.arange(m)[None, :]
    known = idx < m
    values = np.where(known, y[np.minimum(idx, m - 1)], 0.0)
    return DelayEmbedding(values=values, known_mask=known)


def full_hankel_grid(y, s_dim: int, m: int) -> np.ndarray:
    """S x m grid filled from a series of length >= m+S-1 (no unknowns).

    Reading its first row plus last column recovers the series.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < m + s_dim - 1:
        raise ValueError(f"need a 1-D series of length >= {m + s_dim - 1}")
    idx = np.arange(s_dim)[:, None] + np.arange(m)[None, :]
    return y[idx].astype(np.float64)


def consistency_pairs(emb: DelayEmbedding) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Adjacent cell pairs ((r, c), (r-1, c+1)) sharing a time index.

    Only pairs touching at least one unknown cell are returned; cells
    that are both known are already pinned by the data. For m >= S this
    yields (S-1)(S-2)/2 pairs.
    """
    s_dim, m = emb.values.shape
    pairs = []
    for r in range(1, s_dim):
        for c in range(m - 1):
            if emb.known_mask[r, c] and emb.known_mask[r - 1, c + 1]:
                continue
            pairs.append(((r, c), (r - 1, c + 1)))
    return pairs


def pair_mask(s_dim: int, m: int) -> np.ndarray:
    """(S-1) x (m-1) mask over pred[1:, :-1] vs pred[:-1, 1:] residuals.

    Entry (r-1, c) is True exactly when ((r, c), (r-1, c+1)) is a
    consistency pair, i.e. when its shared time index r+c is unknown.
    """
    r = np.arange(1, s_dim)[:, None]
    c = np.arange(m - 1)[None, :]
    return (r + c) >= m


def aggregate_antidiagonal(predicted: np.ndarray, emb: DelayEmbedding) -> tuple[np.ndarray, np.ndarray]:
    """Collapse each future anti-diagonal to (mean, population std).

    Returns two length-(S-1) arrays ordered by future time index
    m .. m+S-2; the spread is a disagreement diagnostic, 0 when all
    estimates of an index coincide.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    if predicted.shape != emb.values.shape:
        raise ValueError(f"predicted grid shape {predicted.shape} does not match embedding "
                         f"{emb.values.shape}")
    s_dim, m = predicted.shape
    estimates = np.empty(s_dim - 1)
    spreads = np.empty(s_dim - 1)
    for t in range(1, s_dim):
        rows = np.arange(t, s_dim)
        cols = (m - 1 + t) - rows
        cells = predicted[rows, cols]
        estimates[t - 1] = cells.mean()
        spreads[t - 1] = cells.std()
    return estimates, spreads
