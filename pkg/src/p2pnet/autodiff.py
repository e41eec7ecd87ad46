"""Tape-based reverse-mode differentiation over dense float64 arrays.

Every differentiable operation appends a node to the active :class:`Graph`.
``backward`` walks the tape once, from the loss node back to the first
node, so operands always precede their consumers.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import sparse


class DimensionError(ValueError):
    pass


class ContractError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("out", "operands", "backward_fn")

    def __init__(self, out: Tensor, operands: tuple[Tensor, ...], backward_fn: Callable):
        self.out = out
        self.operands = operands
        self.backward_fn = backward_fn


class Graph:
    """Append-only record of operations on one thread.

    Used as a context manager; outside any ``with Graph()`` block ops record
    onto a per-thread default graph that :func:`reset_graph` clears.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def record(self, out: Tensor, operands: Sequence[Tensor], backward_fn: Callable) -> Tensor:
        out.node = len(self.nodes)
        out.requires_grad = True
        self.nodes.append(_Node(out, tuple(operands), backward_fn))
        return out

    def operand_indices(self) -> list[list[int | None]]:
        return [[op.node for op in n.operands] for n in self.nodes]

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.node is None or loss.node >= len(self.nodes) or self.nodes[loss.node].out is not loss:
            if loss.requires_grad and loss.node is None:
                loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1.0
            return
        grads: dict[int, np.ndarray] = {loss.node: np.ones_like(loss.data)}
        leaf_grads: dict[int, tuple[Tensor, np.ndarray]] = {}
        for i in range(loss.node, -1, -1):
            g = grads.pop(i, None)
            if g is None:
                continue
            node = self.nodes[i]
            node.out.grad = g
            parts = node.backward_fn(g)
            for op, part in zip(node.operands, parts):
                if part is None or not op.requires_grad:
                    continue
                if op.node is not None:
                    prev = grads.get(op.node)
                    grads[op.node] = part if prev is None else prev + part
                else:
                    key = id(op)
                    if key in leaf_grads:
                        leaf_grads[key] = (op, leaf_grads[key][1] + part)
                    else:
                        leaf_grads[key] = (op, part)
        for op, g in leaf_grads.values():
            op.grad = g.copy() if op.grad is None else op.grad + g

    def __enter__(self) -> "Graph":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()


_local = threading.local()


def _stack() -> list[Graph]:
    if not hasattr(_local, "stack"):
        _local.stack = [Graph()]
    return _local.stack


def current_graph() -> Graph:
    return _stack()[-1]


def reset_graph() -> None:
    _stack()[0] = Graph()


def backward(loss: Tensor) -> None:
    current_graph().backward(loss)


def _record(data: np.ndarray, operands: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(data)
    if any(op.requires_grad for op in operands):
        current_graph().record(out, operands, backward_fn)
    return out


_decisions = threading.local()


def _note(decision: np.ndarray) -> None:
    log = getattr(_decisions, "log", None)
    if log is not None:
        log.append(np.array(decision, copy=True))


@contextmanager
def recording_decisions() -> Iterator[list[np.ndarray]]:
    """Collect every discrete choice (relu masks, signs, argmaxes, gather indices) made inside the block."""
    prev = getattr(_decisions, "log", None)
    _decisions.log = []
    try:
        yield _decisions.log
    finally:
        _decisions.log = prev


def _check_finite(data: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by {what}")
    return data


# --- linear algebra ---------------------------------------------------------


def matmul(a, b) -> Tensor:
    """``a @ b`` for ``a`` of shape (..., m, k) and a 2-D ``b`` of shape (k, n)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} and {b.shape}")
    out = a.data @ b.data

    def bw(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _record(out, (a, b), bw)


def linear(x, w, bias) -> Tensor:
    """Per-row affine map ``x @ w + bias`` applied over the last axis."""
    x, w, bias = as_tensor(x), as_tensor(w), as_tensor(bias)
    if x.shape[-1] != w.shape[0] or bias.shape != (w.shape[1],):
        raise DimensionError(f"linear shape mismatch: {x.shape}, {w.shape}, {bias.shape}")
    out = x.data @ w.data + bias.data

    def bw(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.reshape(-1, x.shape[-1]).T @ g2 if w.requires_grad else None
        gb = g2.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return _record(out, (x, w, bias), bw)


# --- elementwise -------------------------------------------------------------


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.data.size != 1 and b.data.size != 1:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, t: Tensor) -> np.ndarray:
    if g.shape == t.shape:
        return g
    return np.full(t.shape, g.sum())


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "add")
    return _record(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "sub")
    return _record(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "mul")
    return _record(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a), _unbroadcast(g * a.data, b)),
    )


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _record(a.data * c, (a,), lambda g: (g * c,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    _note(mask)
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    _note(sign)
    return _record(np.abs(a.data), (a,), lambda g: (g * sign,))


def elementwise(op_kind: str, a, b=None) -> Tensor:
    if op_kind == "relu":
        return relu(a)
    if op_kind == "scale":
        return scale(a, float(b))
    fn = {"add": add, "sub": sub, "mul": mul}.get(op_kind)
    if fn is None:
        raise ContractError(f"unknown elementwise op {op_kind!r}")
    return fn(a, b)


# --- reductions and structure -------------------------------------------------


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    return _record(np.array(a.data.sum()), (a,), lambda g: (np.full(a.shape, float(g)),))


def row_norm(a) -> Tensor:
    """Euclidean norm over the last axis; the gradient at a zero row is zero."""
    a = as_tensor(a)
    sq = a.data[..., 0] * a.data[..., 0]
    for j in range(1, a.shape[-1]):
        sq = sq + a.data[..., j] * a.data[..., j]
    n = np.sqrt(sq)

    def bw(g):
        safe = np.where(n > 0, n, 1.0)
        return (np.where((n > 0)[..., None], a.data / safe[..., None], 0.0) * g[..., None],)

    return _record(n, (a,), bw)


def reduce_max_over_group(a) -> Tensor:
    """Max over axis -2; the gradient goes to the first maximal element."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise DimensionError(f"reduce_max_over_group needs >= 2 dims, got {a.shape}")
    if a.shape[-2] == 0:
        raise ContractError("reduce_max_over_group on an empty group")
    arg = np.argmax(a.data, axis=-2)
    _note(arg)
    out = np.take_along_axis(a.data, arg[..., None, :], axis=-2)[..., 0, :]

    def bw(g):
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, arg[..., None, :], g[..., None, :], axis=-2)
        return (ga,)

    return _record(out, (a,), bw)


def concat(a, b) -> Tensor:
    """Concatenate along the last (channel) axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise DimensionError(f"concat leading-dimension mismatch: {a.shape} and {b.shape}")
    ca = a.shape[-1]
    out = np.concatenate([a.data, b.data], axis=-1)
    return _record(out, (a, b), lambda g: (g[..., :ca], g[..., ca:]))


def _scatter_rows(flat: np.ndarray, g: np.ndarray, n_rows: int) -> np.ndarray:
    # sparse one-hot product sums duplicate rows much faster than np.add.at
    m = len(flat)
    onehot = sparse.csr_matrix((np.ones(m), (flat, np.arange(m))), shape=(n_rows, m))
    return np.asarray(onehot @ g)


def gather_points(points, indices) -> Tensor:
    """Rows of ``points`` (..., n, c) picked by ``indices``.

    With 2-D ``points`` the indices may have any shape; with a leading batch
    axis, ``indices`` must have the same leading axis and rows are picked per
    batch element.
    """
    points = as_tensor(points)
    idx = np.asarray(indices, dtype=np.int64)
    n = points.shape[-2]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"gather index out of range [0, {n})")
    _note(idx)
    if points.data.ndim == 2:
        out = points.data[idx]

        def bw(g):
            return (_scatter_rows(idx.reshape(-1), g.reshape(-1, points.shape[-1]), n),)

    elif points.data.ndim == 3:
        b = points.shape[0]
        if idx.shape[0] != b:
            raise DimensionError(f"batched gather: {points.shape} vs indices {idx.shape}")
        flat = (idx.reshape(b, -1) + np.arange(b)[:, None] * n).reshape(-1)
        out = points.data.reshape(b * n, -1)[flat].reshape(idx.shape + (points.shape[-1],))

        def bw(g):
            return (_scatter_rows(flat, g.reshape(-1, points.shape[-1]), b * n).reshape(points.shape),)

    else:
        raise DimensionError(f"gather_points supports 2-D or 3-D points, got {points.shape}")
    return _record(out, (points,), bw)


def index(a, idx) -> Tensor:
    """Basic numpy indexing (ints and slices) with a scatter backward."""
    a = as_tensor(a)
    out = a.data[idx]

    def bw(g):
        ga = np.zeros_like(a.data)
        ga[idx] += g
        return (ga,)

    return _record(np.array(out), (a,), bw)


def interpolate(coarse, idx, weights) -> Tensor:
    """Weighted sum of coarse rows: ``out[..., i, :] = sum_j w[..., i, j] * coarse[..., idx[..., i, j], :]``.

    ``idx`` and ``weights`` are constants.
    """
    coarse = as_tensor(coarse)
    gathered = gather_points(coarse, idx)
    w = np.asarray(weights, dtype=np.float64)
    out = np.einsum("...ij,...ijc->...ic", w, gathered.data)
    return _record(out, (gathered,), lambda g: (w[..., None] * g[..., None, :],))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


# --- checking ------------------------------------------------------------------


@dataclass
class FDReport:
    max_rel_err: float
    flipped: bool
    checked: int


def _same_decisions(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))


def finite_diff_report(
    f: Callable[[Tensor], Tensor],
    x: Tensor | np.ndarray,
    eps: float = 1e-5,
    coords: np.ndarray | None = None,
) -> FDReport:
    """Compare the tape gradient of scalar ``f`` at ``x`` with central differences.

    ``coords`` restricts the comparison to some flat indices of ``x``.
    ``flipped`` is set when any perturbed evaluation made a different discrete
    choice than the unperturbed one, in which case the error is meaningless.
    The relative error uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    if eps <= 0:
        raise ContractError("eps must be positive")
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    with recording_decisions() as base, Graph() as g:
        xt = Tensor(x0.copy(), requires_grad=True)
        y = f(xt)
        _check_finite(y.data, "f")
        if y.data.size != 1:
            raise DimensionError(f"f must return a scalar, got shape {y.shape}")
        g.backward(y)
    analytic = (np.zeros_like(x0) if xt.grad is None else xt.grad).reshape(-1)
    flat = x0.reshape(-1)
    coords = np.arange(flat.size) if coords is None else np.asarray(coords, dtype=np.int64)
    flipped = False
    numeric = np.zeros(len(coords))

    def probe(i, v):
        nonlocal flipped
        flat[i] = v
        with recording_decisions() as seen:
            out = float(_check_finite(f(Tensor(x0)).data, "f").sum())
        flipped = flipped or not _same_decisions(base, seen)
        return out

    for j, i in enumerate(coords):
        orig = flat[i]
        fp = probe(i, orig + eps)
        fm = probe(i, orig - eps)
        flat[i] = orig
        numeric[j] = (fp - fm) / (2 * eps)
    a = analytic[coords]
    denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
    err = float(np.max(np.abs(a - numeric) / denom)) if len(coords) else 0.0
    return FDReport(err, flipped, len(coords))


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor | np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between the tape gradient of scalar ``f`` at ``x`` and central differences."""
    return finite_diff_report(f, x, eps).max_rel_err
