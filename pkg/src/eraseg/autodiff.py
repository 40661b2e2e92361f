"""Reverse-mode automatic differentiation over 2D float64 arrays.

Graphs are built define-by-run: every op returns a new Tensor holding its
value, its parent tensors, and a closure that pushes gradients back to the
parents.  backward() walks the graph once in reverse topological order.
Graphs are rebuilt per example; only leaf tensors (parameters) survive
between runs, accumulating into .grad until zero_grad().
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """One node: a 2D float64 value plus gradient plumbing."""

    __slots__ = ("value", "grad", "name", "_parents", "_backward", "_backward_done")

    def __init__(
        self,
        value,
        parents: tuple["Tensor", ...] = (),
        name: str | None = None,
    ):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"tensors are 2D, got shape {arr.shape}")
        self.value = arr
        self.grad = np.zeros_like(arr)
        self.name = name
        self._parents = parents
        self._backward: Callable[[], None] | None = None
        self._backward_done = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def backward(self) -> None:
        """Accumulate dself/dleaf into every reachable tensor's .grad."""
        if self.value.shape != (1, 1):
            raise ValueError(f"backward starts from a scalar, got {self.value.shape}")
        if self._backward_done:
            raise RuntimeError("backward already ran for this graph root")
        self._backward_done = True
        self.grad[...] = 1.0
        for node in reversed(_topo_order(self)):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.value.shape})"


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative DFS: per-sentence graphs run long chains (hundreds of
    # timestep ops) that would blow the recursion limit.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def const(value, name: str | None = None) -> Tensor:
    """Wrap a scalar, vector, or matrix as a leaf tensor.

    Scalars become (1,1), flat sequences become single rows.
    """
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return Tensor(arr, name=name)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum out axes that numpy broadcasting expanded."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    if out.shape != shape:
        raise ValueError(f"cannot reduce grad {grad.shape} to {shape}")
    return out


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ValueError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; size-1 axes broadcast."""
    _check_broadcast(a, b, "add")
    out = Tensor(a.value + b.value, parents=(a, b))

    def backward():
        a.grad += _unbroadcast(out.grad, a.shape)
        b.grad += _unbroadcast(out.grad, b.shape)

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference; size-1 axes broadcast."""
    _check_broadcast(a, b, "sub")
    out = Tensor(a.value - b.value, parents=(a, b))

    def backward():
        a.grad += _unbroadcast(out.grad, a.shape)
        b.grad -= _unbroadcast(out.grad, b.shape)

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; size-1 axes broadcast."""
    _check_broadcast(a, b, "mul")
    out = Tensor(a.value * b.value, parents=(a, b))

    def backward():
        a.grad += _unbroadcast(out.grad * b.value, a.shape)
        b.grad += _unbroadcast(out.grad * a.value, b.shape)

    out._backward = backward
    return out


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python float (not part of the graph)."""
    c = float(c)
    out = Tensor(a.value * c, parents=(a,))

    def backward():
        a.grad += out.grad * c

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = Tensor(a.value @ b.value, parents=(a, b))

    def backward():
        a.grad += out.grad @ b.value.T
        b.grad += a.value.T @ out.grad

    out._backward = backward
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.value.T.copy(), parents=(a,))

    def backward():
        a.grad += out.grad.T

    out._backward = backward
    return out


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Stack side by side: (n,c1)...(n,ck) -> (n, c1+...+ck)."""
    parts = tuple(parts)
    if not parts:
        raise ValueError("concat_cols of nothing")
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise ValueError(f"concat_cols: row counts differ: {[p.shape for p in parts]}")
    out = Tensor(np.concatenate([p.value for p in parts], axis=1), parents=parts)

    def backward():
        col = 0
        for p in parts:
            w = p.shape[1]
            p.grad += out.grad[:, col : col + w]
            col += w

    out._backward = backward
    return out


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack top to bottom: (r1,m)...(rk,m) -> (r1+...+rk, m)."""
    parts = tuple(parts)
    if not parts:
        raise ValueError("concat_rows of nothing")
    cols = parts[0].shape[1]
    if any(p.shape[1] != cols for p in parts):
        raise ValueError(f"concat_rows: column counts differ: {[p.shape for p in parts]}")
    out = Tensor(np.concatenate([p.value for p in parts], axis=0), parents=parts)

    def backward():
        row = 0
        for p in parts:
            h = p.shape[0]
            p.grad += out.grad[row : row + h, :]
            row += h

    out._backward = backward
    return out


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[1]):
        raise ValueError(f"slice_cols[{start}:{stop}] out of range for {a.shape}")
    out = Tensor(a.value[:, start:stop].copy(), parents=(a,))

    def backward():
        a.grad[:, start:stop] += out.grad

    out._backward = backward
    return out


def gather_rows(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Select rows by index, duplicates allowed: (n,m) -> (len(indices), m)."""
    idx = list(indices)
    if not idx:
        raise ValueError("gather_rows with no indices")
    n = a.shape[0]
    if any(not (0 <= i < n) for i in idx):
        raise ValueError(f"gather_rows: index out of range for {a.shape}: {idx}")
    out = Tensor(a.value[idx, :], parents=(a,))

    def backward():
        np.add.at(a.grad, idx, out.grad)

    out._backward = backward
    return out


def pick(a: Tensor, i: int, j: int) -> Tensor:
    """Extract one entry as a (1,1) tensor."""
    n, m = a.shape
    if not (0 <= i < n and 0 <= j < m):
        raise ValueError(f"pick({i},{j}) out of range for {a.shape}")
    out = Tensor(a.value[i : i + 1, j : j + 1].copy(), parents=(a,))

    def backward():
        a.grad[i, j] += out.grad[0, 0]

    out._backward = backward
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.array([[a.value.sum()]]), parents=(a,))

    def backward():
        a.grad += out.grad[0, 0]

    out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.value)
    out = Tensor(val, parents=(a,))

    def backward():
        a.grad += out.grad * (1.0 - val * val)

    out._backward = backward
    return out


def sigmoid(a: Tensor) -> Tensor:
    # Piecewise form keeps exp() off large positive arguments.
    val = np.where(
        a.value >= 0,
        1.0 / (1.0 + np.exp(-np.clip(a.value, 0, None))),
        np.exp(np.clip(a.value, None, 0)) / (1.0 + np.exp(np.clip(a.value, None, 0))),
    )
    out = Tensor(val, parents=(a,))

    def backward():
        a.grad += out.grad * val * (1.0 - val)

    out._backward = backward
    return out


def _row_softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_row(a: Tensor) -> Tensor:
    """Softmax across the columns of each row."""
    p = _row_softmax(a.value)
    out = Tensor(p, parents=(a,))

    def backward():
        g = out.grad
        dot = (g * p).sum(axis=1, keepdims=True)
        a.grad += p * (g - dot)

    out._backward = backward
    return out


def log_softmax_row(a: Tensor) -> Tensor:
    """Log-softmax across the columns of each row (stable)."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = Tensor(shifted - lse, parents=(a,))
    p = _row_softmax(a.value)

    def backward():
        g = out.grad
        a.grad += g - p * g.sum(axis=1, keepdims=True)

    out._backward = backward
    return out


def logsumexp_row(a: Tensor) -> Tensor:
    """log(sum(exp(row))) per row: (n,m) -> (n,1), stable for large inputs."""
    m = a.value.max(axis=1, keepdims=True)
    out_val = m + np.log(np.exp(a.value - m).sum(axis=1, keepdims=True))
    out = Tensor(out_val, parents=(a,))
    p = _row_softmax(a.value)

    def backward():
        a.grad += out.grad * p

    out._backward = backward
    return out


def grad_check(
    fn: Callable[[], Tensor],
    tensors: Iterable[Tensor],
    h: float = 1e-5,
) -> float:
    """Compare reverse-mode gradients with central differences.

    fn must rebuild its graph on every call and return a (1,1) loss.  The
    leaf values are perturbed in place.  Returns the worst relative error
    |a - n| / max(1, |a|, |n|) over every entry of every given tensor; the
    unit floor keeps near-zero gradients from inflating the ratio.
    """
    tensors = list(tensors)
    for t in tensors:
        t.zero_grad()
    fn().backward()
    analytic = [t.grad.copy() for t in tensors]

    worst = 0.0
    for t, grads in zip(tensors, analytic):
        flat = t.value.reshape(-1)
        flat_grads = grads.reshape(-1)
        for k in range(flat.size):
            saved = flat[k]
            flat[k] = saved + h
            up = float(fn().value[0, 0])
            flat[k] = saved - h
            down = float(fn().value[0, 0])
            flat[k] = saved
            numeric = (up - down) / (2.0 * h)
            a = flat_grads[k]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
