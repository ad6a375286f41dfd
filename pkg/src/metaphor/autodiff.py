"""Reverse-mode automatic differentiation on float64 numpy arrays.

A Tensor wraps a value buffer and a same-shape gradient buffer. Ops build a
dynamic graph (one graph per sentence during training); `backward` walks it
once in reverse topological order. Repeated `backward` calls accumulate into
`.grad` until `zero_grads` is called explicitly.

Only the ops the models need are provided: matmul (2d/2d, 2d/1d, 1d/2d),
elementwise add/mul/sigmoid/tanh/relu, vector softmax and log-softmax, concat
and stacking, slicing, sums. No broadcasting beyond adding a bias vector to
each row of a matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, DomainError

Array = np.ndarray


class Tensor:
    """Node in the computation graph: value, gradient buffer, provenance."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Array = np.zeros_like(self.data)
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        # Maps the output gradient to one contribution per parent.
        self._vjp: Callable[[Array], tuple[Array | None, ...]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        backward(self)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"


def _make(data: Array, parents: Sequence[Tensor], vjp, op: str) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    out.op = op
    return out


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. Supports (m,k)@(k,n), (m,k)@(k,) and (k,)@(k,n)."""
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise DimensionError(f"matmul: inner dims differ, {ad.shape} vs {bd.shape}")
        out = ad @ bd

        def vjp(g: Array):
            return g @ bd.T, ad.T @ g

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise DimensionError(f"matmul: inner dims differ, {ad.shape} vs {bd.shape}")
        out = ad @ bd

        def vjp(g: Array):
            return np.outer(g, bd), ad.T @ g

    elif ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise DimensionError(f"matmul: inner dims differ, {ad.shape} vs {bd.shape}")
        out = ad @ bd

        def vjp(g: Array):
            return bd @ g, np.outer(ad, g)

    else:
        raise DimensionError(f"matmul: unsupported ranks, {ad.shape} vs {bd.shape}")
    return _make(out, (a, b), vjp, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also matrix + bias vector applied to each row."""
    ad, bd = a.data, b.data
    if ad.shape == bd.shape:
        def vjp(g: Array):
            return g, g

        return _make(ad + bd, (a, b), vjp, "add")
    if ad.ndim == 2 and bd.ndim == 1 and ad.shape[1] == bd.shape[0]:
        def vjp(g: Array):
            return g, g.sum(axis=0)

        return _make(ad + bd, (a, b), vjp, "add_rowbias")
    raise DimensionError(f"add: incompatible shapes {ad.shape} vs {bd.shape}")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product of equal-shape tensors."""
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul: incompatible shapes {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data

    def vjp(g: Array):
        return g * bd, g * ad

    return _make(ad * bd, (a, b), vjp, "mul")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def vjp(g: Array):
        return (g * c,)

    return _make(x.data * c, (x,), vjp, "scale")


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def vjp(g: Array):
        return (g * out * (1.0 - out),)

    return _make(out, (x,), vjp, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def vjp(g: Array):
        return (g * (1.0 - out * out),)

    return _make(out, (x,), vjp, "tanh")


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    mask = (x.data > 0).astype(np.float64)

    def vjp(g: Array):
        return (g * mask,)

    return _make(out, (x,), vjp, "relu")


def softmax(x: Tensor) -> Tensor:
    """Stable softmax over a nonempty vector."""
    if x.data.ndim != 1 or x.data.size == 0:
        raise DomainError(f"softmax: expected a nonempty vector, got shape {x.shape}")
    z = x.data - x.data.max()
    e = np.exp(z)
    out = e / e.sum()

    def vjp(g: Array):
        return (out * (g - g @ out),)

    return _make(out, (x,), vjp, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 1 or x.data.size == 0:
        raise DomainError(f"log_softmax: expected a nonempty vector, got shape {x.shape}")
    z = x.data - x.data.max()
    lse = np.log(np.exp(z).sum())
    out = z - lse
    p = np.exp(out)

    def vjp(g: Array):
        return (g - p * g.sum(),)

    return _make(out, (x,), vjp, "log_softmax")


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-d vectors in order."""
    if len(parts) == 0:
        raise DomainError("concat: empty part list")
    for p in parts:
        if p.data.ndim != 1:
            raise DimensionError(f"concat: parts must be vectors, got shape {p.shape}")
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g: Array):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts]), parts, vjp, "concat")


def stack_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one vector per row."""
    if len(parts) == 0:
        raise DomainError("stack_rows: empty part list")
    dim = parts[0].data.shape
    for p in parts:
        if p.data.ndim != 1 or p.data.shape != dim:
            raise DimensionError(f"stack_rows: want equal-length vectors, got {dim} vs {p.shape}")

    def vjp(g: Array):
        return tuple(g[i] for i in range(len(parts)))

    return _make(np.stack([p.data for p in parts]), parts, vjp, "stack_rows")


def row(x: Tensor, i: int) -> Tensor:
    """Row i of a matrix as a vector."""
    if x.data.ndim != 2:
        raise DimensionError(f"row: expected a matrix, got shape {x.shape}")
    if not 0 <= i < x.data.shape[0]:
        raise DomainError(f"row: index {i} out of range for {x.data.shape[0]} rows")

    def vjp(g: Array):
        full = np.zeros_like(x.data)
        full[i] = g
        return (full,)

    return _make(x.data[i].copy(), (x,), vjp, f"row[{i}]")


def index(x: Tensor, i: int) -> Tensor:
    """Element i of a vector as a scalar."""
    if x.data.ndim != 1:
        raise DimensionError(f"index: expected a vector, got shape {x.shape}")
    if not 0 <= i < x.data.shape[0]:
        raise DomainError(f"index: {i} out of range for length {x.data.shape[0]}")

    def vjp(g: Array):
        full = np.zeros_like(x.data)
        full[i] = g
        return (full,)

    return _make(x.data[i], (x,), vjp, f"index[{i}]")


def slice_vec(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous segment [start, stop) of a vector."""
    if x.data.ndim != 1:
        raise DimensionError(f"slice_vec: expected a vector, got shape {x.shape}")
    if not 0 <= start <= stop <= x.data.shape[0]:
        raise DomainError(f"slice_vec: [{start}, {stop}) out of range for length {x.data.shape[0]}")

    def vjp(g: Array):
        full = np.zeros_like(x.data)
        full[start:stop] = g
        return (full,)

    return _make(x.data[start:stop].copy(), (x,), vjp, "slice_vec")


def sum_all(x: Tensor) -> Tensor:
    def vjp(g: Array):
        return (np.full_like(x.data, float(g)),)

    return _make(np.asarray(x.data.sum()), (x,), vjp, "sum")


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size

    def vjp(g: Array):
        return (np.full_like(x.data, float(g) / n),)

    return _make(np.asarray(x.data.mean()), (x,), vjp, "mean")


def add_n(parts: Sequence[Tensor]) -> Tensor:
    """Sum of equal-shape tensors (left fold of add)."""
    if len(parts) == 0:
        raise DomainError("add_n: empty part list")
    out = parts[0]
    for p in parts[1:]:
        out = add(out, p)
    return out


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Accumulate dloss/dt into `.grad` of every requires_grad tensor under loss.

    The graph is walked exactly once per call, in reverse topological order;
    calling backward again adds the same gradients on top (no implicit zeroing).
    """
    if loss.data.ndim != 0:
        raise DomainError(f"backward: loss must be a scalar, got shape {loss.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    # Per-pass accumulators, flushed into the persistent .grad buffers.
    pending: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = node.grad + g
        if node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.data)


def clip_global_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm.
    """
    total = float(np.sqrt(sum(float((p.grad * p.grad).sum()) for p in params)))
    if total > max_norm > 0:
        factor = max_norm / total
        for p in params:
            p.grad = p.grad * factor
    return total


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizerState:
    """SGD or Adam over a fixed parameter list.

    Gradients are left in place after a step; call `zero_grads` yourself.
    """

    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    timestep: int = 0
    _m: dict[int, Array] = field(default_factory=dict, repr=False)
    _v: dict[int, Array] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer kind: {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")


def sgd(learning_rate: float) -> OptimizerState:
    return OptimizerState("sgd", learning_rate)


def adam(learning_rate: float) -> OptimizerState:
    return OptimizerState("adam", learning_rate)


def optimizer_step(state: OptimizerState, params: Sequence[Tensor]) -> None:
    lr = state.learning_rate
    if state.kind == "sgd":
        for p in params:
            p.data = p.data - lr * p.grad
        return
    state.timestep += 1
    t = state.timestep
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    for p in params:
        key = id(p)
        m = state._m.get(key)
        if m is None:
            m = np.zeros_like(p.data)
            state._v[key] = np.zeros_like(p.data)
        v = state._v[key]
        m = b1 * m + (1.0 - b1) * p.grad
        v = b2 * v + (1.0 - b2) * (p.grad * p.grad)
        state._m[key], state._v[key] = m, v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    worst: tuple[int, int] | None  # (param position, flat element index)

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance


def _rel_err(a: float, n: float) -> float:
    scale_ = max(abs(a), abs(n))
    diff = abs(a - n)
    # Near zero a relative measure is all finite-difference noise; compare
    # absolutely there.
    return diff if scale_ <= 1e-4 else diff / scale_


def grad_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
               h: float = 1e-5) -> GradCheckReport:
    """Compare backward() against central finite differences for every element.

    `loss_fn` must rebuild the graph from the current parameter values and
    return a scalar loss, with any stochastic pieces (dropout) disabled.
    """
    zero_grads(params)
    backward(loss_fn())
    auto = [p.grad.copy() for p in params]

    max_err, worst, checked = 0.0, None, 0
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        aflat = auto[pi].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = float(loss_fn().data)
            flat[j] = orig - h
            down = float(loss_fn().data)
            flat[j] = orig
            fd = (up - down) / (2.0 * h)
            err = _rel_err(float(aflat[j]), fd)
            checked += 1
            if err > max_err:
                max_err, worst = err, (pi, j)
    zero_grads(params)
    return GradCheckReport(max_rel_error=max_err, n_checked=checked, worst=worst)
