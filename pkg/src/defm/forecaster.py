"""Forecasting front end: one-window prediction and the iterated scheme.

The pure functions here operate on an already-fitted model; the
``DefmForecaster`` estimator bundles scaling, training, and prediction
behind a fit/predict interface. Inputs are z-scored per variable using
statistics of the known window only, and all outputs are mapped back to
the original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .autodiff import Tensor
from .embedding import SeriesMatrix, aggregate_antidiagonal, build_delay_embedding
from .metrics import pcc as _pcc
from .metrics import rmse as _rmse
from .model import DefmModel, ModelConfig
from .training import TrainConfig, loss_determined, train


@dataclass
class Normalization:
    """Per-variable affine scaling fitted on a known window."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "Normalization":
        mean = data.mean(axis=1)
        std = data.std(axis=1)
        std = np.where(std == 0.0, 1.0, std)
        return cls(mean=mean, std=std)

    def apply(self, data: np.ndarray) -> np.ndarray:
        return (data - self.mean[:, None]) / self.std[:, None]

    def invert_target(self, values: np.ndarray, target: int) -> np.ndarray:
        return values * self.std[target] + self.mean[target]

    def scale_spread(self, spreads: np.ndarray, target: int) -> np.ndarray:
        return spreads * self.std[target]


@dataclass
class ForecastResult:
    """Point forecasts for the S-1 indices beyond one observed window."""

    time_indices: np.ndarray
    estimates: np.ndarray
    spreads: np.ndarray
    fit_rmse: float
    truth: np.ndarray | None = None
    pcc: float | None = None
    rmse: float | None = None

    def score_against(self, truth) -> "ForecastResult":
        truth = np.asarray(truth, dtype=np.float64).ravel()
        if truth.shape != self.estimates.shape:
            raise ValueError(f"truth length {truth.shape[0]} does not match "
                             f"forecast length {self.estimates.shape[0]}")
        self.truth = truth
        self.pcc = _pcc(self.estimates, truth)
        self.rmse = _rmse(self.estimates, truth)
        return self


@dataclass
class LongTermPlan:
    """How to advance the window when forecasting beyond one span.

    ``rounds`` applications of the fitted map, each contributing S-1 new
    points. Rows other than the predicted variables are refreshed from
    observed data ("observed") or frozen at their last value ("hold").
    """

    rounds: int
    others: str = "observed"
    predicted: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.others not in ("observed", "hold"):
            raise ValueError(f"unknown fill mode {self.others!r}; use 'observed' or 'hold'")


@dataclass
class LongTermResult:
    time_indices: np.ndarray
    estimates: np.ndarray
    windows: list[ForecastResult] = field(default_factory=list)


def predict(series: SeriesMatrix, model: DefmModel, target_index: int | None = None,
            normalization: Normalization | None = None, start: int = 0) -> ForecastResult:
    """Forecast S-1 steps past the window using a fitted model.

    The window is embedded, the model fills the grid, and each future
    time index is read off as the mean of its anti-diagonal cells; the
    spread is the standard deviation of those same cells. ``start``
    shifts the reported time indices when the window is not at the
    origin of its source series.
    """
    target = series.resolve_target(target_index)
    data = series.data
    scaled = normalization.apply(data) if normalization is not None else data
    grid = model.forward(Tensor(scaled)).data
    emb = build_delay_embedding(
        SeriesMatrix(scaled, dt=series.dt, target_index=target), model.config.s_dim)
    estimates, spreads = aggregate_antidiagonal(grid, emb)
    fit_rmse = float(np.sqrt(loss_determined(grid, emb)))
    if normalization is not None:
        estimates = normalization.invert_target(estimates, target)
        spreads = normalization.scale_spread(spreads, target)
        fit_rmse = float(fit_rmse * normalization.std[target])
    m = data.shape[1]
    indices = start + emb.future_time_indices()
    return ForecastResult(time_indices=indices, estimates=estimates,
                          spreads=spreads, fit_rmse=fit_rmse)


def predict_long_term(series: SeriesMatrix, model: DefmModel, plan: LongTermPlan,
                      future: np.ndarray | None = None, target_index: int | None = None,
                      normalization: Normalization | None = None) -> LongTermResult:
    """Apply one fitted model repeatedly, striding S-1 points per round.

    After each round the window slides forward: the target row takes its
    own fresh forecasts, other rows take observed values (``future``,
    shaped (n, rounds*(S-1)) in original units) or hold their last
    value. Only the trained target variable may appear in
    ``plan.predicted``; forecasting another group requires a model
    fitted to it.
    """
    target = series.resolve_target(target_index)
    if plan.predicted is not None and tuple(plan.predicted) != (target,):
        raise ValueError("only the fitted target variable can be fed back; "
                         f"got predicted rows {plan.predicted} with target {target}")
    n, m = series.data.shape
    span = model.config.s_dim - 1
    if span < 1:
        raise ValueError("long-term forecasting needs an embedding dimension of at least 2")
    horizon = plan.rounds * span
    if plan.others == "observed":
        if future is None:
            raise ValueError("fill mode 'observed' needs the observed future rows")
        future = np.asarray(future, dtype=np.float64)
        if future.shape != (n, horizon):
            raise ValueError(f"observed future must have shape ({n}, {horizon}), "
                             f"got {future.shape}")

    window = series.data.copy()
    windows: list[ForecastResult] = []
    chunks: list[np.ndarray] = []
    for round_idx in range(plan.rounds):
        res = predict(SeriesMatrix(window, dt=series.dt, target_index=target), model,
                      normalization=normalization, start=round_idx * span)
        windows.append(res)
        chunks.append(res.estimates)
        if round_idx == plan.rounds - 1:
            break
        if plan.others == "observed":
            incoming = future[:, round_idx * span:(round_idx + 1) * span].copy()
        else:
            incoming = np.repeat(window[:, -1:], span, axis=1)
        incoming[target] = res.estimates
        window = np.concatenate([window[:, span:], incoming], axis=1)
    estimates = np.concatenate(chunks)
    indices = np.arange(m, m + horizon)
    return LongTermResult(time_indices=indices, estimates=estimates, windows=windows)


class DefmForecaster(BaseEstimator):
    """Self-supervised delay-embedding forecaster with a fit/predict API.

    ``fit`` takes a time-major array (rows are time points, columns are
    variables) holding exactly the observed window; the model trains on
    that window alone and ``predict`` returns the s_dim - 1 points past
    its end. Set ``use_temporal=False`` to drop the cross-time branch
    and fit each column independently (the no-temporal ablation).
    """

    def __init__(self, s_dim=19, target=0, attn_layers=2, attn_dim=64, heads=4,
                 ff_dim=128, spatial_hidden=(128, 64), merge_hidden=(128,),
                 activation="tanh", use_temporal=True, epochs=1500, lr=5e-3,
                 lambda_fc=1.0, patience=200, tol=1e-6, supervised_fraction=1.0,
                 seed=0):
        self.s_dim = s_dim
        self.target = target
        self.attn_layers = attn_layers
        self.attn_dim = attn_dim
        self.heads = heads
        self.ff_dim = ff_dim
        self.spatial_hidden = spatial_hidden
        self.merge_hidden = merge_hidden
        self.activation = activation
        self.use_temporal = use_temporal
        self.epochs = epochs
        self.lr = lr
        self.lambda_fc = lambda_fc
        self.patience = patience
        self.tol = tol
        self.supervised_fraction = supervised_fraction
        self.seed = seed

    def _as_series(self, X) -> SeriesMatrix:
        if isinstance(X, SeriesMatrix):
            return X
        return SeriesMatrix.from_time_major(np.asarray(X, dtype=np.float64))

    def fit(self, X, y=None):
        """Train on one window; X is time-major (m rows, n variables)."""
        series = self._as_series(X)
        n, m = series.data.shape
        if not 0 <= self.target < n:
            raise ValueError(f"target index {self.target} out of range for {n} variables")
        if not 2 <= self.s_dim <= m:
            raise ValueError(f"s_dim must be in [2, {m}], got {self.s_dim}")
        self.norm_ = Normalization.fit(series.data)
        scaled = SeriesMatrix(self.norm_.apply(series.data), dt=series.dt,
                              target_index=self.target)
        model_cfg = ModelConfig(
            n=n, m=m, s_dim=self.s_dim, attn_layers=self.attn_layers,
            attn_dim=self.attn_dim, heads=self.heads, ff_dim=self.ff_dim,
            spatial_hidden=tuple(self.spatial_hidden),
            merge_hidden=tuple(self.merge_hidden), activation=self.activation,
            use_temporal=self.use_temporal, seed=self.seed)
        train_cfg = TrainConfig(
            epochs=self.epochs, lr=self.lr, lambda_fc=self.lambda_fc,
            patience=self.patience, tol=self.tol,
            supervised_fraction=self.supervised_fraction, seed=self.seed)
        self.model_, self.report_ = train(scaled, model_cfg, train_cfg, self.target)
        self.window_ = series
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this DefmForecaster instance is not fitted yet; "
                                 "call fit before predicting")

    def forecast(self) -> ForecastResult:
        """Full forecast object for the fitted window."""
        self._check_fitted()
        return predict(self.window_, self.model_, target_index=self.target,
                       normalization=self.norm_)

    def predict(self, X=None) -> np.ndarray:
        """Point forecasts past the fitted window; X is ignored."""
        return self.forecast().estimates

    def predict_long_term(self, rounds: int, future=None, others: str = "observed",
                          ) -> LongTermResult:
        """Iterate the fitted map ``rounds`` times, striding s_dim - 1."""
        self._check_fitted()
        plan = LongTermPlan(rounds=rounds, others=others)
        return predict_long_term(self.window_, self.model_, plan, future=future,
                                 target_index=self.target, normalization=self.norm_)
