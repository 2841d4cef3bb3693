"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps one array and remembers, while gradients are enabled, the
primitive op that produced it.  Calling backward() on a scalar output
topologically orders that record and accumulates gradients into every
reachable tensor that requires them, each op visited exactly once in
reverse.  The op set is the minimum the forecasting blocks need.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ShapeError

_state = threading.local()  # graph recording is toggled per thread


def _recording() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward-only evaluation)."""
    previous = _recording()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward: Callable[[], None] | None = None
        self._prev: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError(f"backward requires a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = _result(self.data + other.data, (self, other))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad)
                _accumulate(other, out.grad)
            out._backward = backward
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = _wrap(other)
        out = _result(self.data * other.data, (self, other))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * other.data)
                _accumulate(other, out.grad * self.data)
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        other = _wrap(other)
        out = _result(self.data - other.data, (self, other))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad)
                _accumulate(other, -out.grad)
            out._backward = backward
        return out

    def __rsub__(self, other):
        return _wrap(other) - self

    def __truediv__(self, other):
        other = _wrap(other)
        out = _result(self.data / other.data, (self, other))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad / other.data)
                _accumulate(other, -out.grad * self.data / (other.data * other.data))
            out._backward = backward
        return out

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent: float):
        if not isinstance(exponent, (int, float)):
            raise ShapeError("only scalar exponents are supported")
        out = _result(self.data ** exponent, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * exponent * self.data ** (exponent - 1))
            out._backward = backward
        return out

    def __matmul__(self, other):
        other = _wrap(other)
        out = _result(self.data @ other.data, (self, other))
        if out._backward is _PENDING:
            def backward():
                grad = out.grad
                if self.requires_grad:
                    ga = grad @ np.swapaxes(other.data, -1, -2)
                    _accumulate(self, ga)
                if other.requires_grad:
                    gb = np.swapaxes(self.data, -1, -2) @ grad
                    _accumulate(other, gb)
            out._backward = backward
        return out

    # -- reductions and shape ops -------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = _result(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._backward is _PENDING:
            def backward():
                grad = out.grad
                if axis is not None and not keepdims:
                    grad = np.expand_dims(grad, axis)
                _accumulate(self, np.broadcast_to(grad, self.data.shape))
            out._backward = backward
        return out

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for ax in axes:
                count *= self.data.shape[ax]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _result(self.data.reshape(shape), (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad.reshape(self.data.shape))
            out._backward = backward
        return out

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))
        out = _result(np.transpose(self.data, axes), (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, np.transpose(out.grad, inverse))
            out._backward = backward
        return out

    def __getitem__(self, index):
        out = _result(self.data[index], (self,))
        if out._backward is _PENDING:
            def backward():
                buf = np.zeros_like(self.data)
                np.add.at(buf, index, out.grad)
                _accumulate(self, buf)
            out._backward = backward
        return out

    def repeat_rows(self, count: int):
        """Repeat each leading-axis row `count` times (backward sums the copies)."""
        out = _result(np.repeat(self.data, count, axis=0), (self,))
        if out._backward is _PENDING:
            def backward():
                folded = out.grad.reshape(self.data.shape[0], count, *self.data.shape[1:])
                _accumulate(self, folded.sum(axis=1))
            out._backward = backward
        return out

    # -- nonlinearities -------------------------------------------------------

    def exp(self):
        value = np.exp(self.data)
        out = _result(value, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * value)
            out._backward = backward
        return out

    def tanh(self):
        value = np.tanh(self.data)
        out = _result(value, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * (1.0 - value * value))
            out._backward = backward
        return out

    def sigmoid(self):
        value = _sigmoid(self.data)
        out = _result(value, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * value * (1.0 - value))
            out._backward = backward
        return out

    def relu(self):
        value = np.maximum(self.data, 0.0)
        out = _result(value, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * (self.data > 0.0))
            out._backward = backward
        return out

    def elu(self):
        value = np.where(self.data > 0.0, self.data, np.expm1(self.data))
        out = _result(value, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * np.where(self.data > 0.0, 1.0, value + 1.0))
            out._backward = backward
        return out

    def silu(self):
        sig = _sigmoid(self.data)
        out = _result(self.data * sig, (self,))
        if out._backward is _PENDING:
            def backward():
                _accumulate(self, out.grad * (sig + self.data * sig * (1.0 - sig)))
            out._backward = backward
        return out

    def softmax(self, axis: int = -1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        exps = np.exp(shifted)
        value = exps / exps.sum(axis=axis, keepdims=True)
        out = _result(value, (self,))
        if out._backward is _PENDING:
            def backward():
                inner = (out.grad * value).sum(axis=axis, keepdims=True)
                _accumulate(self, (out.grad - inner) * value)
            out._backward = backward
        return out


class Parameter(Tensor):
    """Named trainable tensor with Adam moment state."""

    __slots__ = ("name", "adam_m", "adam_v", "adam_step")

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.adam_step = 0


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out._backward is _PENDING:
        sizes = [t.data.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]
        def backward():
            pieces = np.split(out.grad, splits, axis=axis)
            for tensor, piece in zip(tensors, pieces):
                _accumulate(tensor, piece)
        out._backward = backward
    return out


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# -- internals ----------------------------------------------------------------

_PENDING = object()


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, inputs: tuple[Tensor, ...]) -> Tensor:
    out = Tensor(data)
    if _recording() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._prev = tuple(t for t in inputs if t.requires_grad)
        out._backward = _PENDING  # replaced by the caller's closure
    return out


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    # Accumulation always rebinds (never writes in place), so sharing the
    # incoming array on first touch is safe.
    if not tensor.requires_grad:
        return
    grad = _unbroadcast(grad, tensor.data.shape)
    if tensor.grad is None:
        tensor.grad = grad
    else:
        tensor.grad = tensor.grad + grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
