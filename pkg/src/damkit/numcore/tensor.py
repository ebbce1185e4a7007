"""Dense tensors with reverse-mode differentiation.

Values live in numpy arrays; each operation records a closure that pushes
gradients back to its inputs. A graph is built per forward pass and thrown
away after ``backward()``. Two numeric modes exist: "check" (float64, the
default, with NaN/Inf rejection at op boundaries) and "train" (float32,
no finiteness checks).
"""

from __future__ import annotations

import math
import threading

import numpy as np


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf crossed an op boundary while in checking mode."""


_state = threading.local()


def _mode() -> str:
    return getattr(_state, "mode", "check")


def set_mode(mode: str) -> None:
    """Switch numeric mode: "check" = float64 + finiteness checks, "train" = float32."""
    if mode not in ("check", "train"):
        raise ValueError(f"unknown mode {mode!r}")
    _state.mode = mode


def mode() -> str:
    return _mode()


def default_dtype():
    return np.float64 if _mode() == "check" else np.float32


def grad_enabled() -> bool:
    return getattr(_state, "grad", True)


class no_grad:
    """Context manager that skips graph construction inside its body."""

    def __enter__(self):
        self._prev = grad_enabled()
        _state.grad = False
        return self

    def __exit__(self, *exc):
        _state.grad = self._prev
        return False


def check_finite(data: np.ndarray, where: str) -> None:
    # A single-pass reduction: any NaN/Inf entry makes the sum non-finite.
    if _mode() == "check" and not math.isfinite(float(data.sum())):
        raise NonFiniteError(f"non-finite values in {where}")


class Tensor:
    """A node in the computation graph: a value plus an optional backward rule."""

    def __init__(self, data, parents=(), bw=None):
        self.data = np.asarray(data, dtype=default_dtype())
        self.grad = None
        self._parents = tuple(parents)
        self._bw = bw

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def backward(self) -> None:
        """Seed this (scalar) node with gradient 1 and propagate through the graph."""
        if self.data.size != 1:
            raise ShapeMismatchError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._bw is not None and node.grad is not None:
                node._bw(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"


class Param(Tensor):
    """A named leaf tensor whose gradient persists across passes."""

    def __init__(self, name: str, value):
        super().__init__(value)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.shape})"


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative DFS; graphs can be a few thousand nodes deep at toy scale.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def result(data: np.ndarray, parents, bw, where: str) -> Tensor:
    """Build an op output node; drops the graph edges under ``no_grad``."""
    check_finite(data, where)
    if not grad_enabled():
        return Tensor(data)
    return Tensor(data, parents=parents, bw=bw)


def accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        # Copy: callers may hand the same array to several parents (e.g. add).
        t.grad = np.array(g, copy=True)
    else:
        t.grad += g
