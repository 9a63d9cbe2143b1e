"""The three-branch network mapping a series window to its delay grid.

A temporal branch (stacked multi-head self-attention over the m time
positions, with learned additive position embeddings, residual
connections and layer normalization) and a spatial branch (a dense
stack applied independently to each time column) each produce a feature
vector per column; the merge branch concatenates the two and emits the
S-vector estimate of that column of the delay grid.

Attention internals follow the standard encoder block; the spatial and
merge stacks default to tanh, the attention feed-forward to relu. Exact
widths are configuration, not structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .autodiff import (Tensor, ShapeError, add, concat, layer_norm, matmul,
                       multiply, relu, scale, softmax_rows, tanh, transpose,
                       uniform_init)

_ACTIVATIONS = {"tanh": tanh, "relu": relu}


@dataclass
class ModelConfig:
    """Architecture hyperparameters; sizes only, no learned state."""

    n: int
    m: int
    s_dim: int
    attn_layers: int = 2
    attn_dim: int = 64
    heads: int = 4
    ff_dim: int = 128
    spatial_hidden: tuple[int, ...] = (128, 64)
    merge_hidden: tuple[int, ...] = (128,)
    activation: str = "tanh"
    use_temporal: bool = True
    seed: int = 0

    def __post_init__(self):
        self.spatial_hidden = tuple(self.spatial_hidden)
        self.merge_hidden = tuple(self.merge_hidden)
        if self.n < 1 or self.m < 1 or self.s_dim < 1:
            raise ValueError("n, m and S must be positive")
        if self.attn_dim % self.heads != 0:
            raise ValueError(f"attn_dim {self.attn_dim} not divisible by heads {self.heads}")
        if any(w <= 0 for w in self.spatial_hidden + self.merge_hidden) or self.ff_dim <= 0:
            raise ValueError("all layer widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(_ACTIVATIONS)}")

    @property
    def feature_width(self) -> int:
        """Per-branch feature width consumed by the merge stack."""
        return self.spatial_hidden[-1]


class DefmModel:
    """Learned parameters plus the forward pass, nothing else.

    Construction with a fixed config and seed is deterministic. Inputs
    are expected pre-normalized; normalization lives with the caller.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._init_params()

    # -- construction -------------------------------------------------

    def _dense(self, rng, name: str, fan_in: int, fan_out: int) -> None:
        self.params[f"{name}.W"] = uniform_init(rng, fan_in, (fan_in, fan_out))
        self.params[f"{name}.b"] = Tensor(np.zeros(fan_out), requires_grad=True)

    def _init_params(self) -> None:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        d = cfg.attn_dim
        if cfg.use_temporal:
            self._dense(rng, "temporal.in", cfg.n, d)
            bound = math.sqrt(1.0 / d)
            self.params["temporal.pos"] = Tensor(
                rng.uniform(-bound, bound, size=(cfg.m, d)), requires_grad=True)
            for layer in range(cfg.attn_layers):
                for proj in ("Wq", "Wk", "Wv", "Wo"):
                    self.params[f"temporal.{layer}.{proj}"] = uniform_init(rng, d, (d, d))
                for ln in ("ln1", "ln2"):
                    self.params[f"temporal.{layer}.{ln}.g"] = Tensor(np.ones(d), requires_grad=True)
                    self.params[f"temporal.{layer}.{ln}.b"] = Tensor(np.zeros(d), requires_grad=True)
                self._dense(rng, f"temporal.{layer}.ff1", d, cfg.ff_dim)
                self._dense(rng, f"temporal.{layer}.ff2", cfg.ff_dim, d)
            self._dense(rng, "temporal.out", d, cfg.feature_width)
        width = cfg.n
        for i, hidden in enumerate(cfg.spatial_hidden):
            self._dense(rng, f"spatial.{i}", width, hidden)
            width = hidden
        width = 2 * cfg.feature_width if cfg.use_temporal else cfg.feature_width
        for i, hidden in enumerate(cfg.merge_hidden):
            self._dense(rng, f"merge.{i}", width, hidden)
            width = hidden
        self._dense(rng, "merge.out", width, cfg.s_dim)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    # -- forward pass --------------------------------------------------

    def _as_positions(self, Z) -> Tensor:
        """Validate an (n, m) input and return it as (m, n) rows."""
        if not isinstance(Z, Tensor):
            Z = Tensor(Z)
        cfg = self.config
        if Z.shape != (cfg.n, cfg.m):
            raise ShapeError(f"input shape {Z.shape} does not match model ({cfg.n}, {cfg.m})")
        return transpose(Z)

    def _affine(self, x: Tensor, name: str) -> Tensor:
        return add(matmul(x, self.params[f"{name}.W"]), self.params[f"{name}.b"])

    def _attention_block(self, x: Tensor, layer: int,
                         collect: list | None = None) -> Tensor:
        cfg = self.config
        p = self.params
        dh = cfg.attn_dim // cfg.heads
        q_all = matmul(x, p[f"temporal.{layer}.Wq"])
        k_all = matmul(x, p[f"temporal.{layer}.Wk"])
        v_all = matmul(x, p[f"temporal.{layer}.Wv"])
        head_outs = []
        for h in range(cfg.heads):
            cols = slice(h * dh, (h + 1) * dh)
            scores = scale(matmul(q_all[:, cols], transpose(k_all[:, cols])),
                           1.0 / math.sqrt(dh))
            weights = softmax_rows(scores)
            if collect is not None:
                collect.append(weights.data.copy())
            head_outs.append(matmul(weights, v_all[:, cols]))
        return matmul(concat(head_outs, axis=1), p[f"temporal.{layer}.Wo"])

    def _temporal(self, x: Tensor, collect: list | None = None,
                  project: bool = True) -> Tensor:
        """Temporal branch on (m, n) rows -> (m, feature_width)."""
        cfg = self.config
        p = self.params
        x = add(self._affine(x, "temporal.in"), p["temporal.pos"])
        for layer in range(cfg.attn_layers):
            per_layer: list | None = [] if collect is not None else None
            attended = self._attention_block(x, layer, collect=per_layer)
            if collect is not None:
                collect.append(per_layer)
            x = layer_norm(add(x, attended),
                           p[f"temporal.{layer}.ln1.g"], p[f"temporal.{layer}.ln1.b"])
            hidden = relu(self._affine(x, f"temporal.{layer}.ff1"))
            x = layer_norm(add(x, self._affine(hidden, f"temporal.{layer}.ff2")),
                           p[f"temporal.{layer}.ln2.g"], p[f"temporal.{layer}.ln2.b"])
        if not project:
            return x
        return self._affine(x, "temporal.out")

    def _spatial(self, x: Tensor) -> Tensor:
        """Spatial stack applied row-wise: (m, n) -> (m, feature_width)."""
        act = _ACTIVATIONS[self.config.activation]
        for i in range(len(self.config.spatial_hidden)):
            x = act(self._affine(x, f"spatial.{i}"))
        return x

    def _merge(self, features: Tensor) -> Tensor:
        act = _ACTIVATIONS[self.config.activation]
        x = features
        for i in range(len(self.config.merge_hidden)):
            x = act(self._affine(x, f"merge.{i}"))
        return self._affine(x, "merge.out")

    def temporal_forward(self, Z, project: bool = True) -> Tensor:
        """Temporal branch features in (width, m) orientation.

        With ``project=False`` the raw attention-stack output
        (attn_dim, m) is returned instead of the merged feature width.
        """
        if not self.config.use_temporal:
            raise ValueError("this model was built without a temporal branch")
        return transpose(self._temporal(self._as_positions(Z), project=project))

    def spatial_forward(self, Z) -> Tensor:
        """Spatial features for a full (n, m) matrix or a single n-vector."""
        single = getattr(Z, "ndim", np.ndim(Z)) == 1
        if single:
            data = Z.data if isinstance(Z, Tensor) else np.asarray(Z, dtype=np.float64)
            if data.shape != (self.config.n,):
                raise ShapeError(f"column length {data.shape} does not match n={self.config.n}")
            x = Tensor(data.reshape(1, -1))
            out = self._spatial(x)
            return out[0, :]
        cfg = self.config
        if not isinstance(Z, Tensor):
            Z = Tensor(Z)
        if Z.ndim != 2 or Z.shape[0] != cfg.n:
            raise ShapeError(f"input shape {Z.shape} does not match n={cfg.n}")
        return transpose(self._spatial(transpose(Z)))

    def merge_forward(self, temporal_out, spatial_out) -> Tensor:
        """Combine per-column features into the S x m prediction grid.

        Both inputs are (feature_width, m); pass ``temporal_out=None``
        for a model built without the temporal branch.
        """
        spatial_out = spatial_out if isinstance(spatial_out, Tensor) else Tensor(spatial_out)
        cols = transpose(spatial_out)
        if self.config.use_temporal:
            if temporal_out is None:
                raise ValueError("temporal features required by this model")
            temporal_out = temporal_out if isinstance(temporal_out, Tensor) else Tensor(temporal_out)
            if temporal_out.shape[1] != spatial_out.shape[1]:
                raise ShapeError("temporal and spatial feature grids disagree on column count")
            cols = concat([transpose(temporal_out), cols], axis=1)
        return transpose(self._merge(cols))

    def forward(self, Z) -> Tensor:
        """Full pass: (n, m) input -> (S, m) delay-grid estimate."""
        x = self._as_positions(Z)
        spatial = self._spatial(x)
        if self.config.use_temporal:
            features = concat([self._temporal(x), spatial], axis=1)
        else:
            features = spatial
        return transpose(self._merge(features))

    def attention_weights(self, Z) -> list[list[np.ndarray]]:
        """Per-layer, per-head attention matrices for a given input."""
        if not self.config.use_temporal:
            return []
        collect: list = []
        self._temporal(self._as_positions(Z), collect=collect)
        return collect

    # -- checkpointing -------------------------------------------------

    def save(self, path, extra: dict | None = None) -> None:
        """Write config plus named parameter arrays to an .npz container."""
        header = {"config": asdict(self.config), "extra": extra or {}}
        arrays = {f"param:{name}": p.data for name, p in self.params.items()}
        np.savez(path, __header__=np.frombuffer(
            json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> tuple["DefmModel", dict]:
        """Rebuild a model (and the caller's extras) from ``save`` output."""
        with np.load(path) as archive:
            header = json.loads(archive["__header__"].tobytes().decode())
            cfg_dict = header["config"]
            cfg_dict["spatial_hidden"] = tuple(cfg_dict["spatial_hidden"])
            cfg_dict["merge_hidden"] = tuple(cfg_dict["merge_hidden"])
            model = cls(ModelConfig(**cfg_dict))
            for key in archive.files:
                if key.startswith("param:"):
                    name = key[len("param:"):]
                    if name not in model.params:
                        raise ValueError(f"checkpoint holds unknown parameter '{name}'")
                    if archive[key].shape != model.params[name].data.shape:
                        raise ValueError(f"checkpoint shape mismatch for '{name}'")
                    model.params[name].data = archive[key].astype(np.float64)
        return model, header["extra"]
