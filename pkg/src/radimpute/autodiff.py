"""A small reverse-mode autodiff over dense float64 numpy arrays.

Operations executed inside ``with Tape() as tape:`` are recorded in creation
order, which is already a topological order, so ``backward`` is a single
reverse sweep. Tensors created outside a tape (parameters, constants) are
leaves. Broadcasting is limited to adding a bias vector to a batch of rows.

    >>> w = Tensor(np.array([[3.0]]), requires_grad=True)
    >>> with Tape():
    ...     loss = sum_all(mul(w, w))
    >>> backward(loss)
    >>> float(w.grad[0, 0])
    6.0
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_active: list["Tape"] = []


class Tape:
    """Records operations; one tape per forward pass."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.pop()
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "adjoint", "tape", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.adjoint: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.tape: Tape | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"

    def zero_grad(self):
        self.grad = None

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def const(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: np.ndarray, parents: Sequence[Tensor], adjoint, opname: str) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite value produced by {opname}")
    t = Tensor(out)
    t.requires_grad = any(p.requires_grad for p in parents)
    if t.requires_grad:
        t.parents = tuple(parents)
        t.adjoint = adjoint
        if _active:
            t.tape = _active[-1]
            t.tape.nodes.append(t)
        else:
            raise RuntimeError(f"{opname} on tensors that require grad must run inside a Tape")
    return t


def _check_same(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# forward ops ---------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = const(a), const(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _record(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a bias vector added to every row of ``a``."""
    a, b = const(a), const(b)
    if a.shape == b.shape:
        return _record(a.data + b.data, (a, b), lambda g: (g, g), "add")
    if a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:
        return _record(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)), "add")
    raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = const(a), const(b)
    _check_same(a, b, "sub")
    return _record(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = const(a), const(b)
    _check_same(a, b, "mul")
    ad, bd = a.data, b.data
    return _record(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale_rows(x: Tensor, col: Tensor) -> Tensor:
    """Multiply each row of an (B, n) tensor by the matching entry of a (B, 1) column."""
    x, col = const(x), const(col)
    if col.data.ndim != 2 or col.shape != (x.shape[0], 1):
        raise ValueError(f"scale_rows: column shape {col.shape} does not match {x.shape}")
    xd, cd = x.data, col.data
    return _record(xd * cd, (x, col),
                   lambda g: (g * cd, (g * xd).sum(axis=1, keepdims=True)), "scale_rows")


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    parts = [const(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def adjoint(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(parts)))
    return _record(np.concatenate([p.data for p in parts], axis=axis), parts, adjoint, "concat")


def cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of an (B, n) tensor."""
    x = const(x)
    n = x.shape[1]

    def adjoint(g):
        out = np.zeros((g.shape[0], n))
        out[:, start:stop] = g
        return (out,)
    return _record(x.data[:, start:stop].copy(), (x,), adjoint, "cols")


def take_col(x: Tensor, j: int) -> Tensor:
    """Column ``j`` of an (B, n) tensor as a (B, 1) tensor."""
    return cols(x, j, j + 1)


def sigmoid(x: Tensor) -> Tensor:
    x = const(x)
    y = np.empty_like(x.data)
    pos = x.data >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _record(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    x = const(x)
    y = np.tanh(x.data)
    return _record(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def exp(x: Tensor) -> Tensor:
    x = const(x)
    y = np.exp(x.data)
    return _record(y, (x,), lambda g: (g * y,), "exp")


def neg(x: Tensor) -> Tensor:
    x = const(x)
    return _record(-x.data, (x,), lambda g: (-g,), "neg")


def relu(x: Tensor) -> Tensor:
    x = const(x)
    on = x.data > 0
    return _record(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,), "relu")


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax of an (B, T) tensor (normalizes over the sequence axis)."""
    x = const(x)
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def adjoint(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)
    return _record(y, (x,), adjoint, "softmax")


def sum_all(x: Tensor) -> Tensor:
    x = const(x)
    shape = x.shape
    return _record(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, g),), "sum_all")


def scale(x: Tensor, c: float) -> Tensor:
    x = const(x)
    return _record(x.data * c, (x,), lambda g: (g * c,), "scale")


def masked_mse(a: Tensor, b: Tensor, mask) -> Tensor:
    """Mean squared error over the cells where ``mask`` is 1.

    The denominator is the number of masked-in cells; an empty mask gives 0.
    """
    a, b = const(a), const(b)
    _check_same(a, b, "masked_mse")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != a.shape:
        raise ValueError(f"masked_mse: mask shape {mask.shape} vs {a.shape}")
    count = mask.sum()
    denom = max(count, 1.0)
    diff = mask * (a.data - b.data)
    val = np.array((diff * diff).sum() / denom)

    def adjoint(g):
        ga = g * 2.0 * diff / denom
        return (ga, -ga)
    return _record(val, (a, b), adjoint, "masked_mse")


def mse(a: Tensor, b: Tensor) -> Tensor:
    return masked_mse(a, b, np.ones(const(a).shape))


# reverse sweep -------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires grad."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    if loss.adjoint is None:
        loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1.0
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(loss.tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.adjoint(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.adjoint is None:  # leaf
                parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
            else:
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg


def gradients(loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Fresh gradients of ``loss`` for ``params`` (zeros where unused)."""
    for p in params:
        p.grad = None
    backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


# optimizer -----------------------------------------------------------------

def adam_step(params, grads, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, t=1, state=None):
    """One Adam update with bias correction; returns ``(new_params, state)``.

    ``params`` and ``grads`` are sequences of arrays; ``state`` holds the
    first/second moment estimates and is created on the first call.
    """
    if t < 1:
        raise ValueError("adam step counter t must be >= 1")
    if state is None:
        state = ([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])
    ms, vs = state
    new_params, new_m, new_v = [], [], []
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, ms, vs):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        new_params.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, (new_m, new_v)


class Adam:
    """Stateful wrapper updating ``Tensor`` parameters in place."""

    def __init__(self, params: Sequence[Tensor], lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.state = None

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        new, self.state = adam_step([p.data for p in self.params], grads, self.lr,
                                    self.beta1, self.beta2, self.eps, self.t, self.state)
        for p, d in zip(self.params, new):
            p.data = d
