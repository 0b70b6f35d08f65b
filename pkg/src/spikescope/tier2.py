"""Pseudo-SNN: one fully connected layer of iterative LIF neurons.

Each one-second episode drives exactly one LIF timestep, and the membrane
carries over from episode to episode within a sample. The spike vector of
step ``i`` becomes column ``i`` of the snapshot matrix ``Z`` (H x t).

Backward uses a rectangular surrogate for the spike step and is truncated
in time: gradient reaches each step's ``W @ x`` drive but is not chained
back through the decaying membrane.

All functions accept extra leading batch axes on inputs and state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import ShapeError
from .tier1 import Episode, stack_flats


@dataclass
class LifParams:
    weights: np.ndarray  # H x D
    tau: float = 0.5
    u_th: float = 1.0
    surrogate_width: float = 1.0
    # Replace the hard step by the integral of the surrogate (a clipped ramp);
    # used for gradient checking only.
    relaxed: bool = False

    U0 = 0.0

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"LIF weights must be H x D, got {self.weights.shape}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.u_th <= 0:
            raise ValueError(f"u_th must be positive, got {self.u_th}")
        if self.surrogate_width <= 0:
            raise ValueError("surrogate_width must be positive")

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def init(cls, n_neurons: int, n_inputs: int, rng, **kw) -> "LifParams":
        bound = 1.0 / np.sqrt(n_inputs)
        return cls(rng.uniform(-bound, bound, size=(n_neurons, n_inputs)), **kw)


@dataclass
class LifState:
    membrane: np.ndarray
    last_spikes: np.ndarray

    @classmethod
    def zeros(cls, n_neurons: int, batch_shape=()) -> "LifState":
        shape = tuple(batch_shape) + (n_neurons,)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class LifCache:
    u: np.ndarray  # pre-reset membrane
    x: np.ndarray  # input drive


@dataclass
class SnapshotMatrix:
    Z: np.ndarray  # (..., H, t)
    caches: list = field(default_factory=list, repr=False)
    final_state: LifState | None = None

    @property
    def t(self) -> int:
        return self.Z.shape[-1]


def spike_fn(u: np.ndarray, p: LifParams) -> np.ndarray:
    if p.relaxed:
        return np.clip((u - p.u_th) / p.surrogate_width + 0.5, 0.0, 1.0)
    return (u > p.u_th).astype(np.float64)


def surrogate_grad(u: np.ndarray, p: LifParams) -> np.ndarray:
    """Rectangular pseudo-derivative of the spike w.r.t. membrane."""
    a = p.surrogate_width
    return (np.abs(u - p.u_th) < a / 2.0) / a


def lif_forward(x: np.ndarray, state: LifState, p: LifParams):
    """One LIF step. Returns ``(spikes, new_state, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.n_inputs:
        raise ShapeError(f"lif_forward: input length {x.shape[-1]} != weight columns {p.n_inputs}")
    if state.membrane.shape[-1] != p.n_neurons:
        raise ShapeError(
            f"lif_forward: state length {state.membrane.shape[-1]} != neurons {p.n_neurons}"
        )
    u = p.tau * state.membrane * (1.0 - state.last_spikes) + x @ p.weights.T
    o = spike_fn(u, p)
    new_state = LifState(membrane=u * (1.0 - o), last_spikes=o)
    return o, new_state, LifCache(u=u, x=x)


def lif_backward(grad_spikes: np.ndarray, cache: LifCache | None, p: LifParams):
    """Surrogate-gradient backward of one step. Returns ``(grad_input, grad_weights)``."""
    if cache is None:
        raise ValueError("lif_backward needs the cache from the matching forward")
    grad_u = np.asarray(grad_spikes, dtype=np.float64) * surrogate_grad(cache.u, p)
    grad_input = grad_u @ p.weights
    g2 = grad_u.reshape(-1, p.n_neurons)
    x2 = cache.x.reshape(-1, p.n_inputs)
    return grad_input, g2.T @ x2


def _episode_array(episodes) -> np.ndarray:
    if isinstance(episodes, np.ndarray):
        if episodes.ndim < 2 or episodes.shape[-2] == 0:
            raise ValueError("need at least one episode")
        return episodes
    episodes = list(episodes)
    if not episodes:
        raise ValueError("need at least one episode")
    if isinstance(episodes[0], Episode):
        return stack_flats(episodes)
    return stack_flats([Episode(i, np.asarray(e)) for i, e in enumerate(episodes)])


def snn_encode_sample(episodes, p: LifParams) -> SnapshotMatrix:
    """Run each episode through exactly one LIF step, carrying the membrane.

    ``episodes`` is a list of :class:`Episode` or an array ``(..., t, D)``.
    """
    x = _episode_array(episodes)
    t = x.shape[-2]
    state = LifState.zeros(p.n_neurons, x.shape[:-2])
    cols, caches = [], []
    for i in range(t):
        o, state, cache = lif_forward(x[..., i, :], state, p)
        cols.append(o)
        caches.append(cache)
    return SnapshotMatrix(Z=np.stack(cols, axis=-1), caches=caches, final_state=state)


def snn_backward(grad_Z: np.ndarray, snap: SnapshotMatrix, p: LifParams):
    """Truncated backward of :func:`snn_encode_sample`.

    Per-episode weight gradients are summed into the shared LIF weights.
    Returns ``(grad_episodes (..., t, D), grad_weights)``.
    """
    grad_w = np.zeros_like(p.weights)
    grads_in = []
    for i, cache in enumerate(snap.caches):
        gi, gw = lif_backward(grad_Z[..., :, i], cache, p)
        grads_in.append(gi)
        grad_w += gw
    return np.stack(grads_in, axis=-2), grad_w


def conventional_forward(x: np.ndarray, p: LifParams, T: int):
    """``T`` LIF steps on the same input from rest; mean spikes plus caches."""
    if T < 1:
        raise ValueError("T must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.n_inputs:
        raise ShapeError(f"input length {x.shape[-1]} != weight columns {p.n_inputs}")
    state = LifState.zeros(p.n_neurons, x.shape[:-1])
    total = np.zeros(x.shape[:-1] + (p.n_neurons,))
    caches = []
    for _ in range(T):
        o, state, cache = lif_forward(x, state, p)
        total += o
        caches.append(cache)
    return total / T, caches


def conventional_backward(grad_mean: np.ndarray, caches: list, p: LifParams):
    """Truncated backward of :func:`conventional_forward`. Returns ``(grad_x, grad_w)``."""
    T = len(caches)
    grad_x = 0.0
    grad_w = np.zeros_like(p.weights)
    for cache in caches:
        gi, gw = lif_backward(grad_mean / T, cache, p)
        grad_x = grad_x + gi
        grad_w += gw
    return grad_x, grad_w


def snn_conventional_iterates(spec_flat: np.ndarray, p: LifParams, T: int) -> np.ndarray:
    """Timestep-averaged spike vector of ``T`` iterates on one whole input."""
    return conventional_forward(spec_flat, p, T)[0]


def average_episodes(episodes) -> np.ndarray:
    return _episode_array(episodes).mean(axis=-2)


def snn_encode_atdts(episodes, p: LifParams, T: int) -> np.ndarray:
    """Average the episode flats, then iterate ``T`` times on the mean."""
    return snn_conventional_iterates(average_episodes(episodes), p, T)
