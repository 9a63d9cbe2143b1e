"""Dense float64 tensors with reverse-mode automatic differentiation.

Deliberately small: the only primitives provided are the ones the
forecaster's forward pass and losses are built from. Every primitive
records its inputs and a backward closure on the output node when any
operand requires gradients; ``Tensor.backward`` linearizes that graph
once (topological order, each node visited exactly once) and sweeps it
in reverse, accumulating gradients additively across uses.

Tensors are immutable once created except through ``Adam.step``. A
computation graph belongs to one thread at a time; read-only forward
passes on frozen parameters may run concurrently.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform to a primitive's contract."""


class NonFiniteError(ArithmeticError):
    """A forward pass produced NaN/Inf; the caller should abort the step."""


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values in output of '{op}'")


class Tensor:
    """A dense float64 array plus optional gradient and graph record."""

    __slots__ = ("data", "requires_grad", "grad", "_op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data, "tensor")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._op: str | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Populate d(self)/d(tensor) for every tensor in this graph.

        ``self`` must be a scalar. If nothing upstream required
        gradients the sweep is a no-op (no gradients are written).
        """
        if self.ndim != 0:
            raise ShapeError(f"backward requires a scalar loss, got shape {self.shape}")
        order = _linearize(self)
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # Operator sugar; all dispatch to the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return multiply(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    @property
    def T(self):
        return transpose(self)

    def sum(self):
        return sum_all(self)

    def mean(self):
        return mean(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def _linearize(root: Tensor) -> list[Tensor]:
    """Topologically ordered record of the graph below ``root``.

    Every operand precedes its result; each node appears exactly once.
    """
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, op: str, parents: tuple[Tensor, ...], backward) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._op = op
        out._parents = parents
        out._backward = backward
    else:
        out._op = None
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a, b) -> Tensor:
    """2-D matrix product."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)
    return _result(a.data @ b.data, "matmul", (a, b), backward)


def add(a, b) -> Tensor:
    """Elementwise sum; broadcasting limited to bias-style shapes."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add cannot broadcast {a.shape} with {b.shape}") from None
    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))
    return _result(data, "add", (a, b), backward)


def subtract(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"subtract cannot broadcast {a.shape} with {b.shape}") from None
    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))
    return _result(data, "subtract", (a, b), backward)


def multiply(a, b) -> Tensor:
    """Elementwise (Hadamard) product."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"multiply cannot broadcast {a.shape} with {b.shape}") from None
    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))
    return _result(data, "multiply", (a, b), backward)


def scale(a, c) -> Tensor:
    """Multiply by a python scalar constant."""
    a = _as_tensor(a)
    c = float(c)
    def backward(g):
        if a.requires_grad:
            a._accumulate(c * g)
    return _result(a.data * c, "scale", (a,), backward)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D operand, got {a.shape}")
    def backward(g):
        if a.requires_grad:
            a._accumulate(g.T)
    return _result(np.ascontiguousarray(a.data.T), "transpose", (a,), backward)


def concat(parts, axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``."""
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat of an empty list")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat shapes incompatible: {exc}") from None
    offsets = np.cumsum([0] + [p.shape[axis] for p in parts])
    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                p._accumulate(g[tuple(index)])
    return _result(data, "concat", tuple(parts), backward)


def slice_(a, key) -> Tensor:
    """Basic (non-fancy) slicing; gradient scatters into the source."""
    a = _as_tensor(a)
    data = a.data[key]
    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[key] = g
            a._accumulate(full)
    return _result(np.ascontiguousarray(data), "slice", (a,), backward)


def softmax_rows(a) -> Tensor:
    """Softmax along the last axis; each row sums to 1."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    def backward(g):
        if a.requires_grad:
            inner = (g * s).sum(axis=-1, keepdims=True)
            a._accumulate(s * (g - inner))
    return _result(s, "softmax_rows", (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)
    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - t * t))
    return _result(t, "tanh", (a,), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0.0))
    return _result(np.maximum(a.data, 0.0), "relu", (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize each row of 2-D ``x`` to zero mean / unit variance,
    then apply a per-feature affine map ``gain * xhat + bias``.
    """
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    if x.ndim != 2:
        raise ShapeError(f"layer_norm needs a 2-D input, got {x.shape}")
    d = x.shape[1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm gain/bias must have shape ({d},)")
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    def backward(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0))
        if x.requires_grad:
            gh = g * gain.data
            x._accumulate(inv * (gh - gh.mean(axis=1, keepdims=True)
                                 - xhat * (gh * xhat).mean(axis=1, keepdims=True)))
    return _result(gain.data * xhat + bias.data, "layer_norm", (x, gain, bias), backward)


def mean(a) -> Tensor:
    """Full reduction to a scalar mean."""
    a = _as_tensor(a)
    n = a.size
    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.shape, float(g) / n))
    return _result(np.asarray(a.data.mean()), "mean", (a,), backward)


def sum_all(a) -> Tensor:
    """Full reduction to a scalar sum."""
    a = _as_tensor(a)
    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.shape, float(g)))
    return _result(np.asarray(a.data.sum()), "sum", (a,), backward)


def square(a) -> Tensor:
    a = _as_tensor(a)
    def backward(g):
        if a.requires_grad:
            a._accumulate(g * 2.0 * a.data)
    return _result(a.data * a.data, "square", (a,), backward)


# Unary/binary primitive registry used by the gradient-check sweeps.
PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "subtract": subtract,
    "multiply": multiply,
    "scale": scale,
    "transpose": transpose,
    "concat": concat,
    "slice": slice_,
    "softmax_rows": softmax_rows,
    "tanh": tanh,
    "relu": relu,
    "layer_norm": layer_norm,
    "mean": mean,
    "sum": sum_all,
    "square": square,
}


class Adam:
    """Adam update rule over a fixed parameter list.

    ``step`` consumes the gradients written by ``backward`` and clears
    them afterwards; calling it with a missing gradient is an error.
    """

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise ValueError("parameter has no gradient; run backward first")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> Tensor:
    """Seeded weight draw, uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)]."""
    bound = math.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
