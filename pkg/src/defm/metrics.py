"""Forecast accuracy scores.

PCC is undefined when either side has zero variance; that case is
reported as None rather than raised, so sweep aggregation can count and
skip it explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _pair(a, b, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} points, got {a.shape[0]}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("scores require finite inputs")
    return a, b


def pcc(a, b) -> float | None:
    """Pearson correlation, or None when either input has zero variance."""
    a, b = _pair(a, b, 2)
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt((da * da).sum()))
    nb = float(np.sqrt((db * db).sum()))
    if na == 0.0 or nb == 0.0:
        return None
    # rounding can push |r| a hair past 1 for perfectly collinear inputs
    return float(np.clip((da * db).sum() / (na * nb), -1.0, 1.0))


def rmse(a, b) -> float:
    a, b = _pair(a, b, 1)
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class ScorePair:
    pcc: float | None
    rmse: float
    length: int


def score_pair(a, b) -> ScorePair:
    a, b = _pair(a, b, 2)
    return ScorePair(pcc=pcc(a, b), rmse=rmse(a, b), length=a.shape[0])


@dataclass
class AggregateScores:
    mean_pcc: float | None
    mean_rmse: float
    count: int
    undefined_pcc: int


def aggregate_scores(pairs: list[ScorePair]) -> AggregateScores:
    """Mean scores over cases; undefined PCCs are excluded and counted."""
    if not pairs:
        raise ValueError("no scores to aggregate")
    defined = [p.pcc for p in pairs if p.pcc is not None]
    mean_pcc = float(np.mean(defined)) if defined else None
    mean_rmse = float(np.mean([p.rmse for p in pairs]))
    return AggregateScores(mean_pcc=mean_pcc, mean_rmse=mean_rmse,
                           count=len(pairs), undefined_pcc=len(pairs) - len(defined))
