"""Snapshot transpose and class-token attention classifier.

The t x H transposed snapshot matrix is projected to ``d_model``, a learned
class token is prepended as row 0, and one or more blocks of scaled
dot-product attention ``softmax(Q K^T / sqrt(d)) V`` are applied. Logits
are read from the class-token row of the last block's output; the same
row of the attention weights gives per-episode relevance.

Forward and backward are hand-written and support a leading batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import ShapeError, linear_backward, linear_forward, softmax_rows, softmax_rows_backward, transpose

N_CLASSES = 5


def transpose_snapshots(Z: np.ndarray) -> np.ndarray:
    """(..., H, t) -> (..., t, H), materialized."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.size == 0:
        raise ShapeError("snapshot matrix is empty")
    return transpose(Z)


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


@dataclass
class AttentionParams:
    projection: np.ndarray  # H_in x d
    proj_bias: np.ndarray
    wq: list
    wk: list
    wv: list
    class_token: np.ndarray
    head: np.ndarray  # d x n_classes
    head_bias: np.ndarray
    n_heads: int = 1
    positional: bool = False

    def __post_init__(self):
        d = self.d_model
        if self.n_heads < 1 or d % self.n_heads:
            raise ValueError(f"d_model {d} not divisible into {self.n_heads} heads")
        if not (len(self.wq) == len(self.wk) == len(self.wv) >= 1):
            raise ValueError("need at least one attention block with Wq, Wk, Wv each")
        for w in (*self.wq, *self.wk, *self.wv):
            if w.shape != (d, d):
                raise ShapeError(f"attention map must be {d}x{d}, got {w.shape}")
        if self.class_token.shape != (d,) or self.proj_bias.shape != (d,):
            raise ShapeError("class token and projection bias must have length d_model")
        if self.head.shape[0] != d or self.head_bias.shape != (self.head.shape[1],):
            raise ShapeError("classifier head shape mismatch")

    @property
    def d_model(self) -> int:
        return self.projection.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.projection.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.wq)

    @classmethod
    def init(cls, n_inputs: int, d_model: int, rng, n_blocks: int = 1, n_heads: int = 1,
             positional: bool = False, n_classes: int = N_CLASSES) -> "AttentionParams":
        def gauss(shape, fan_in):
            return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)

        return cls(
            projection=gauss((n_inputs, d_model), n_inputs),
            proj_bias=np.zeros(d_model),
            wq=[gauss((d_model, d_model), d_model) for _ in range(n_blocks)],
            wk=[gauss((d_model, d_model), d_model) for _ in range(n_blocks)],
            wv=[gauss((d_model, d_model), d_model) for _ in range(n_blocks)],
            class_token=rng.normal(0.0, 0.02, size=d_model),
            head=gauss((d_model, n_classes), d_model),
            head_bias=np.zeros(n_classes),
            n_heads=n_heads,
            positional=positional,
        )

    def named_arrays(self) -> dict:
        out = {"attn.projection": self.projection, "attn.proj_bias": self.proj_bias}
        for b in range(self.n_blocks):
            out[f"attn.wq{b}"] = self.wq[b]
            out[f"attn.wk{b}"] = self.wk[b]
            out[f"attn.wv{b}"] = self.wv[b]
        out["attn.class_token"] = self.class_token
        out["attn.head"] = self.head
        out["attn.head_bias"] = self.head_bias
        return out

    def set_array(self, name: str, value: np.ndarray) -> None:
        key = name.removeprefix("attn.")
        for prefix in ("wq", "wk", "wv"):
            if key.startswith(prefix) and key[len(prefix):].isdigit():
                getattr(self, prefix)[int(key[len(prefix):])] = value
                return
        if not hasattr(self, key):
            raise KeyError(name)
        setattr(self, key, value)


@dataclass
class AttentionGrads:
    arrays: dict
    zt: np.ndarray


@dataclass
class BlockTrace:
    x: np.ndarray  # block input (..., n, d)
    q: np.ndarray  # (..., h, n, dh)
    k: np.ndarray
    v: np.ndarray
    weights: np.ndarray  # (..., h, n, n)
    out: np.ndarray  # (..., n, d)


@dataclass
class ForwardTrace:
    zt: np.ndarray
    projected: np.ndarray
    blocks: list = field(default_factory=list)
    logits: np.ndarray | None = None

    @property
    def attention_weights(self) -> np.ndarray:
        """Last block's weights, averaged over heads: (..., t+1, t+1)."""
        return self.blocks[-1].weights.mean(axis=-3)

    @property
    def A(self) -> np.ndarray:
        return self.blocks[-1].out

    @property
    def Q(self) -> np.ndarray:
        return _merge_heads(self.blocks[-1].q)

    @property
    def K(self) -> np.ndarray:
        return _merge_heads(self.blocks[-1].k)

    @property
    def V(self) -> np.ndarray:
        return _merge_heads(self.blocks[-1].v)


def _split_heads(x, h):
    *lead, n, d = x.shape
    return np.swapaxes(x.reshape(*lead, n, h, d // h), -2, -3)


def _merge_heads(x):
    x = np.swapaxes(x, -2, -3)
    *lead, n, h, dh = x.shape
    return x.reshape(*lead, n, h * dh)


def scaled_dot_product_attention(q, k, v):
    """``softmax(q k^T / sqrt(d)) v`` with ``d = q.shape[-1]``. Returns ``(A, weights)``."""
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1])
    weights = softmax_rows(scores)
    return weights @ v, weights


def attention_forward(zt: np.ndarray, p: AttentionParams):
    """Logits for a (..., t, H_in) input. Returns ``(logits, trace)``."""
    zt = np.asarray(zt, dtype=np.float64)
    if zt.ndim < 2 or zt.shape[-2] < 1:
        raise ShapeError("attention_forward needs at least one episode row")
    if zt.shape[-1] != p.n_inputs:
        raise ShapeError(f"attention input width {zt.shape[-1]} != projection rows {p.n_inputs}")
    projected = linear_forward(zt, p.projection, p.proj_bias)
    cls = np.broadcast_to(p.class_token, projected.shape[:-2] + (1, p.d_model))
    x = np.concatenate([cls, projected], axis=-2)
    if p.positional:
        x = x + sinusoidal_positions(x.shape[-2], p.d_model)
    trace = ForwardTrace(zt=zt, projected=projected)
    for b in range(p.n_blocks):
        q = _split_heads(x @ p.wq[b], p.n_heads)
        k = _split_heads(x @ p.wk[b], p.n_heads)
        v = _split_heads(x @ p.wv[b], p.n_heads)
        a, weights = scaled_dot_product_attention(q, k, v)
        out = _merge_heads(a)
        trace.blocks.append(BlockTrace(x, q, k, v, weights, out))
        x = out
    trace.logits = linear_forward(x[..., 0, :], p.head, p.head_bias)
    return trace.logits, trace


def attention_backward(grad_logits: np.ndarray, trace: ForwardTrace | None, p: AttentionParams) -> AttentionGrads:
    """Reverse of :func:`attention_forward`; batch axes are summed into parameter grads."""
    if trace is None or trace.logits is None:
        raise ValueError("attention_backward needs the trace from the matching forward")
    grads = {}
    last = trace.blocks[-1].out
    g_cls, grads["attn.head"], grads["attn.head_bias"] = linear_backward(grad_logits, last[..., 0, :], p.head)
    gx = np.zeros_like(last)
    gx[..., 0, :] = g_cls
    for b in reversed(range(p.n_blocks)):
        blk = trace.blocks[b]
        dh = blk.q.shape[-1]
        go = _split_heads(gx, p.n_heads)
        g_weights = go @ np.swapaxes(blk.v, -1, -2)
        gv = np.swapaxes(blk.weights, -1, -2) @ go
        gs = softmax_rows_backward(g_weights, blk.weights) / np.sqrt(dh)
        gq = gs @ blk.k
        gk = np.swapaxes(gs, -1, -2) @ blk.q
        gx = 0.0
        for name, w, g in (("wq", p.wq[b], gq), ("wk", p.wk[b], gk), ("wv", p.wv[b], gv)):
            gxi, gw, _ = linear_backward(_merge_heads(g), blk.x, w)
            grads[f"attn.{name}{b}"] = gw
            gx = gx + gxi
    g_tok = gx[..., 0, :]
    grads["attn.class_token"] = g_tok.reshape(-1, p.d_model).sum(axis=0)
    gzt, grads["attn.projection"], grads["attn.proj_bias"] = linear_backward(
        gx[..., 1:, :], trace.zt, p.projection
    )
    return AttentionGrads(arrays=grads, zt=gzt)


def relevance(trace: ForwardTrace) -> np.ndarray:
    """Class-token attention over the t episode positions, renormalized to sum 1."""
    row = trace.attention_weights[..., 0, 1:]
    return row / row.sum(axis=-1, keepdims=True)
