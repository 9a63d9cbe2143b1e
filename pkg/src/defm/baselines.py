"""Classical univariate forecasters used as comparison points.

All three operate on the target row alone and forecast the same
horizon as the delay-embedding model: moving average (iterated
one-step), Holt's double exponential smoothing, and a least-squares
autoregression. Each has a plain functional form plus a small
estimator wrapper.
"""

from __future__ import annotations

import warnings
from itertools import product

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError


class ArSingularWarning(UserWarning):
    """The autoregression design matrix was rank deficient."""


def _as_series(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite entries")
    return y


def forecast_ma(y, window: int = 5, horizon: int = 1) -> np.ndarray:
    """Iterated moving average: each step appends the mean of the last
    ``window`` values (own forecasts included once past the data)."""
    y = _as_series(y)
    if not 1 <= window <= y.shape[0]:
        raise ValueError(f"window must be in [1, {y.shape[0]}], got {window}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    buf = list(y[-window:])
    out = np.empty(horizon)
    for h in range(horizon):
        step = float(np.mean(buf))
        out[h] = step
        buf.append(step)
        buf.pop(0)
    return out


def hes_state(y, alpha: float = 0.5, trend: float = 0.3) -> tuple[float, float]:
    """Final (level, slope) of Holt's linear smoothing.

    level_1 = y_1 and slope_1 = y_2 - y_1, then for t >= 2
    level_t = alpha*y_t + (1-alpha)*(level + slope) and
    slope_t = trend*(level_t - level_{t-1}) + (1-trend)*slope.
    """
    y = _as_series(y)
    if y.shape[0] < 2:
        raise ValueError("need at least two points to initialise the slope")
    if not 0.0 < alpha <= 1.0 or not 0.0 < trend <= 1.0:
        raise ValueError("alpha and trend must lie in (0, 1]")
    level = y[0]
    slope = y[1] - y[0]
    for t in range(1, y.shape[0]):
        prev = level
        level = alpha * y[t] + (1.0 - alpha) * (level + slope)
        slope = trend * (level - prev) + (1.0 - trend) * slope
    return float(level), float(slope)


def forecast_hes(y, alpha: float = 0.5, trend: float = 0.3, horizon: int = 1) -> np.ndarray:
    """Holt's linear forecast: level + tau * slope for tau = 1..horizon."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    level, slope = hes_state(y, alpha, trend)
    return level + slope * np.arange(1, horizon + 1, dtype=np.float64)


def hes_grid_search(y, grid=None) -> tuple[float, float]:
    """Pick (alpha, trend) minimising in-sample one-step squared error."""
    y = _as_series(y)
    if grid is None:
        grid = np.arange(0.1, 1.0, 0.1)
    best = (0.5, 0.3)
    best_err = np.inf
    for alpha, trend in product(grid, grid):
        level = y[0]
        slope = y[1] - y[0]
        err = 0.0
        for t in range(1, y.shape[0]):
            err += (y[t] - (level + slope)) ** 2
            prev = level
            level = alpha * y[t] + (1.0 - alpha) * (level + slope)
            slope = trend * (level - prev) + (1.0 - trend) * slope
        if err < best_err - 1e-15:
            best_err = err
            best = (float(alpha), float(trend))
    return best


def fit_ar(y, order: int = 5) -> tuple[np.ndarray, float, float]:
    """Least-squares AR(order) on the mean-centered series.

    Returns (coefficients, intercept, mean). The intercept is fitted on
    the centered series so an exact linear recursion is recovered
    exactly. A rank-deficient design with non-trivial residual raises
    ArSingularWarning; the minimum-norm solution is kept either way.
    """
    y = _as_series(y)
    if order < 1:
        raise ValueError("order must be >= 1")
    if y.shape[0] < order + 2:
        raise ValueError(f"need at least {order + 2} points to fit AR({order})")
    mean = float(y.mean())
    yc = y - mean
    rows = y.shape[0] - order
    design = np.ones((rows, order + 1))
    for lag in range(1, order + 1):
        design[:, lag] = yc[order - lag:order - lag + rows]
    rhs = yc[order:]
    solution, residual, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    if rank < order + 1:
        misfit = float(np.linalg.norm(design @ solution - rhs))
        if misfit > 1e-8 * max(1.0, float(np.linalg.norm(rhs))):
            warnings.warn(f"AR({order}) design is rank deficient (rank {rank}); "
                          "consider a smaller order", ArSingularWarning)
    return solution[1:], float(solution[0]), mean


def forecast_ar(y, order: int = 5, horizon: int = 1) -> np.ndarray:
    """Iterated AR(order) forecast with the mean restored."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    y = _as_series(y)
    coeffs, intercept, mean = fit_ar(y, order)
    history = list(y[-order:] - mean)
    out = np.empty(horizon)
    for h in range(horizon):
        step = intercept + float(np.dot(coeffs, history[::-1]))
        out[h] = step + mean
        history.append(step)
        history.pop(0)
    return out


class _WindowedBaseline(BaseEstimator):
    """Shared fit bookkeeping: remember the target row of the window."""

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            self.series_ = X.copy()
        elif X.ndim == 2:
            self.series_ = X[:, self.target].astype(np.float64)
        else:
            raise ValueError("expected a 1-D series or a time-major window")
        return self

    def _fitted_series(self) -> np.ndarray:
        if not hasattr(self, "series_"):
            raise NotFittedError("call fit before predicting")
        return self.series_


class MovingAverageForecaster(_WindowedBaseline):
    def __init__(self, window=5, target=0):
        self.window = window
        self.target = target

    def predict(self, horizon: int = 1) -> np.ndarray:
        return forecast_ma(self._fitted_series(), self.window, horizon)


class HoltForecaster(_WindowedBaseline):
    def __init__(self, alpha=0.5, trend=0.3, grid_search=False, target=0):
        self.alpha = alpha
        self.trend = trend
        self.grid_search = grid_search
        self.target = target

    def fit(self, X, y=None):
        super().fit(X)
        if self.grid_search:
            self.alpha_, self.trend_ = hes_grid_search(self.series_)
        else:
            self.alpha_, self.trend_ = self.alpha, self.trend
        return self

    def predict(self, horizon: int = 1) -> np.ndarray:
        return forecast_hes(self._fitted_series(), self.alpha_, self.trend_, horizon)


class AutoRegressiveForecaster(_WindowedBaseline):
    def __init__(self, order=5, target=0):
        self.order = order
        self.target = target

    def predict(self, horizon: int = 1) -> np.ndarray:
        return forecast_ar(self._fitted_series(), self.order, horizon)
