"""Delay-embedding forecast machine.

Self-supervised forecasting of one target variable from a short window
of a high-dimensional time series, by learning the map from the full
state to the target's delay embedding. Includes a coupled-Lorenz
benchmark generator, classical baselines, and forecast metrics.
"""

from .autodiff import Adam, NonFiniteError, ShapeError, Tensor
from .baselines import (
    ArSingularWarning,
    AutoRegressiveForecaster,
    HoltForecaster,
    MovingAverageForecaster,
    forecast_ar,
    forecast_hes,
    forecast_ma,
)
from .embedding import (
    DelayEmbedding,
    SeriesMatrix,
    aggregate_antidiagonal,
    build_delay_embedding,
    consistency_pairs,
    full_hankel_grid,
    pair_mask,
)
from .forecaster import (
    DefmForecaster,
    ForecastResult,
    LongTermPlan,
    LongTermResult,
    Normalization,
    predict,
    predict_long_term,
)
from .lorenz import (
    BlowUpError,
    Case,
    LorenzConfig,
    SwitchSchedule,
    add_noise,
    integrate_lorenz,
    sample_cases,
)
from .metrics import AggregateScores, ScorePair, aggregate_scores, pcc, rmse, score_pair
from .model import DefmModel, ModelConfig
from .training import DivergenceError, TrainConfig, TrainReport, loss_determined, \
    loss_future_consistency, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "NonFiniteError", "ShapeError", "Tensor",
    "ArSingularWarning", "AutoRegressiveForecaster", "HoltForecaster",
    "MovingAverageForecaster", "forecast_ar", "forecast_hes", "forecast_ma",
    "DelayEmbedding", "SeriesMatrix", "aggregate_antidiagonal",
    "build_delay_embedding", "consistency_pairs", "full_hankel_grid", "pair_mask",
    "DefmForecaster", "ForecastResult", "LongTermPlan", "LongTermResult",
    "Normalization", "predict", "predict_long_term",
    "BlowUpError", "Case", "LorenzConfig", "SwitchSchedule", "add_noise",
    "integrate_lorenz", "sample_cases",
    "AggregateScores", "ScorePair", "aggregate_scores", "pcc", "rmse", "score_pair",
    "DefmModel", "ModelConfig",
    "DivergenceError", "TrainConfig", "TrainReport", "loss_determined",
    "loss_future_consistency", "train",
    "__version__",
]
