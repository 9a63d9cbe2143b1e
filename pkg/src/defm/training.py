"""Self-supervised fitting of the forecaster on a single window.

Two mean-squared penalties drive the fit: a determined-state loss on
grid cells whose true values were observed, and a future-consistency
loss pulling together the predicted cells that estimate the same future
time index (the grid's anti-diagonal structure makes those disagreements
well-defined without any labels). Training is full batch: the window's
m columns are the entire sample set.

Inputs are assumed pre-scaled by the caller; see the forecaster for the
z-scoring wrapper.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Adam, NonFiniteError, Tensor, add, multiply, scale, square, subtract, sum_all
from .embedding import DelayEmbedding, SeriesMatrix, build_delay_embedding, pair_mask
from .model import DefmModel, ModelConfig


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; carries the epoch index."""

    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}" + (f": {detail}" if detail else ""))


@dataclass
class TrainConfig:
    epochs: int = 1500
    lr: float = 5e-3
    lambda_fc: float = 1.0
    patience: int = 200
    tol: float = 1e-6
    supervised_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lambda_fc < 0:
            raise ValueError("lambda_fc must be >= 0")
        if not 0.0 < self.supervised_fraction <= 1.0:
            raise ValueError("supervised_fraction must be in (0, 1]")


@dataclass
class TrainReport:
    """Loss trajectory and stopping information for one training run."""

    ds_losses: list[float] = field(default_factory=list)
    fc_losses: list[float] = field(default_factory=list)
    total_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_total: float = float("inf")
    stop_reason: str = ""
    duration: float = 0.0

    @property
    def epochs_run(self) -> int:
        return len(self.total_losses)


def _masked_mse(pred, truth: np.ndarray, mask: np.ndarray):
    count = int(mask.sum())
    if isinstance(pred, Tensor):
        diff = subtract(pred, Tensor(truth))
        masked = multiply(square(diff), Tensor(mask.astype(np.float64)))
        return scale(sum_all(masked), 1.0 / count)
    diff = np.asarray(pred, dtype=np.float64) - truth
    return float((diff * diff * mask).sum() / count)


def loss_determined(pred, emb: DelayEmbedding, columns=None):
    """Mean squared error over the grid's known cells.

    ``pred`` may be a plain array (returns a float) or an autodiff
    Tensor (returns a scalar Tensor on the graph). ``columns``
    optionally restricts supervision to a subset of window columns.
    """
    shape = pred.shape if isinstance(pred, Tensor) else np.shape(pred)
    if tuple(shape) != emb.values.shape:
        raise ValueError(f"prediction shape {shape} does not match embedding {emb.values.shape}")
    mask = emb.known_mask
    if columns is not None:
        col_mask = np.zeros(emb.m, dtype=bool)
        col_mask[np.asarray(columns, dtype=int)] = True
        mask = mask & col_mask[None, :]
    if not mask.any():
        raise ValueError("no known cells to score against")
    return _masked_mse(pred, emb.values, mask)


def loss_future_consistency(pred, emb: DelayEmbedding):
    """Mean squared disagreement across the constrained cell pairs.

    Zero by convention when the grid has no pairs (S <= 2).
    """
    shape = pred.shape if isinstance(pred, Tensor) else np.shape(pred)
    if tuple(shape) != emb.values.shape:
        raise ValueError(f"prediction shape {shape} does not match embedding {emb.values.shape}")
    s_dim, m = emb.values.shape
    mask = pair_mask(s_dim, m)
    n_pairs = int(mask.sum())
    if n_pairs == 0:
        return Tensor(0.0) if isinstance(pred, Tensor) else 0.0
    if isinstance(pred, Tensor):
        diff = subtract(pred[1:, : m - 1], pred[: s_dim - 1, 1:])
        masked = multiply(square(diff), Tensor(mask.astype(np.float64)))
        return scale(sum_all(masked), 1.0 / n_pairs)
    grid = np.asarray(pred, dtype=np.float64)
    diff = grid[1:, : m - 1] - grid[: s_dim - 1, 1:]
    return float((diff * diff * mask).sum() / n_pairs)


def train(series: SeriesMatrix, model_config: ModelConfig, train_config: TrainConfig,
          target_index: int | None = None) -> tuple[DefmModel, TrainReport]:
    """Fit a model to one observed window; returns the best state seen.

    Full-batch gradient descent on total = determined + lambda * future
    consistency. Stops early when the best total fails to improve by a
    relative ``tol`` for ``patience`` consecutive epochs. Deterministic
    for a fixed seed and inputs.
    """
    cfg = model_config
    if series.data.shape != (cfg.n, cfg.m):
        raise ValueError(f"series shape {series.data.shape} does not match model "
                         f"({cfg.n}, {cfg.m})")
    if cfg.s_dim > cfg.m:
        raise ValueError(f"embedding dimension {cfg.s_dim} exceeds window length {cfg.m}")
    emb = build_delay_embedding(series, cfg.s_dim, target_index)

    columns = None
    if train_config.supervised_fraction < 1.0:
        rng = np.random.default_rng(train_config.seed)
        keep = max(1, int(round(train_config.supervised_fraction * cfg.m)))
        columns = np.sort(rng.choice(cfg.m, size=keep, replace=False))

    model = DefmModel(cfg)
    params = model.parameters()
    optimizer = Adam(params, lr=train_config.lr)
    window = Tensor(series.data)

    report = TrainReport()
    best_state = None
    stale = 0
    started = time.perf_counter()
    for epoch in range(train_config.epochs):
        try:
            pred = model.forward(window)
            ds = loss_determined(pred, emb, columns=columns)
            fc = loss_future_consistency(pred, emb)
            total = add(ds, scale(fc, train_config.lambda_fc))
            total_value = total.item()
        except NonFiniteError as exc:
            raise DivergenceError(epoch, str(exc)) from exc
        report.ds_losses.append(ds.item())
        report.fc_losses.append(fc.item())
        report.total_losses.append(total_value)
        if total_value < report.best_total * (1.0 - train_config.tol) or best_state is None:
            report.best_total = total_value
            report.best_epoch = epoch
            best_state = {name: p.data.copy() for name, p in model.params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                report.stop_reason = "patience"
                break
        try:
            total.backward()
            optimizer.step()
        except NonFiniteError as exc:
            raise DivergenceError(epoch, str(exc)) from exc
    else:
        report.stop_reason = "epochs"
    report.duration = time.perf_counter() - started
    for name, data in best_state.items():
        model.params[name].data = data
    return model, report
