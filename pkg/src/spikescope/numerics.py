"""Dense float64 math shared by every tier: softmax, affine layers and Adam.

Matrices are plain ``numpy`` arrays in C (row-major) order. Functions accept
extra leading batch axes wherever that is natural, so the same code serves
a single sample and a mini-batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when array shapes do not line up."""


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows or cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected ({rows}, {cols}), got {m.shape}")
    return m


def transpose(m: np.ndarray) -> np.ndarray:
    """Materialized transpose of the last two axes (a copy, never a view)."""
    return np.ascontiguousarray(np.swapaxes(m, -1, -2))


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, stabilised by max subtraction."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        raise ShapeError("softmax_rows needs a non-empty input")
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_backward(grad_out: np.ndarray, s: np.ndarray) -> np.ndarray:
    # Per row: (diag(s) - s s^T) g
    return s * (grad_out - np.sum(grad_out * s, axis=-1, keepdims=True))


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """``x @ w + b`` with ``b`` broadcast across rows."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear_forward: x {x.shape} incompatible with w {w.shape}")
    out = x @ w
    if b is not None:
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (w.shape[1],):
            raise ShapeError(f"linear_forward: bias {b.shape} does not match w {w.shape}")
        out = out + b
    return out


def linear_backward(grad_out: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of ``x @ w + b``.

    Returns ``(grad_x, grad_w, grad_b)``. Leading batch axes of ``x`` and
    ``grad_out`` are summed out of ``grad_w`` and ``grad_b``.
    """
    grad_out = np.asarray(grad_out, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if (
        x.shape[-1] != w.shape[0]
        or grad_out.shape[-1] != w.shape[1]
        or grad_out.shape[:-1] != x.shape[:-1]
    ):
        raise ShapeError(
            f"linear_backward: grad_out {grad_out.shape}, x {x.shape}, w {w.shape} disagree"
        )
    grad_x = grad_out @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    g2 = grad_out.reshape(-1, grad_out.shape[-1])
    grad_w = x2.T @ g2
    grad_b = g2.sum(axis=0)
    return grad_x, grad_w, grad_b


@dataclass
class AdamState:
    shape: tuple
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.shape = tuple(self.shape)
        if self.m is None:
            self.m = np.zeros(self.shape)
        if self.v is None:
            self.v = np.zeros(self.shape)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update. Mutates ``state``; returns the new param."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape or param.shape != state.shape:
        raise ShapeError(
            f"adam_step: param {param.shape}, grad {grad.shape}, state {state.shape} disagree"
        )
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
