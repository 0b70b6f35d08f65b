"""End-to-end model: encoding, forward/backward over all tiers, Adam training
and evaluation."""
from __future__ import annotations

import copy
import csv
import io
import logging
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import tier1, tier2
from .ablation import VariantConfig, route
from .metrics import Metrics
from .numerics import AdamState, adam_step, softmax_rows
from .tier34 import AttentionParams, attention_backward, attention_forward, transpose_snapshots

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    n_neurons: int = 64
    tau: float = 0.5
    u_th: float = 1.0
    surrogate_width: float = 1.0
    d_model: int = 64
    n_blocks: int = 1
    n_heads: int = 1
    positional: bool = False
    tier1: tier1.Tier1Config = field(default_factory=tier1.Tier1Config)


@dataclass(frozen=True)
class OptConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0

    def replace(self, **kw) -> "OptConfig":
        return replace(self, **kw)


@dataclass
class ModelParams:
    variant: VariantConfig
    lif: tier2.LifParams | None
    attn: AttentionParams
    tier1: tier1.Tier1Config = field(default_factory=tier1.Tier1Config)

    def __post_init__(self):
        pipe = route(self.variant)
        if (pipe.snn is None) != (self.lif is None):
            raise ValueError(f"variant {self.variant.name} and LIF parameters disagree")
        width = self.lif.n_neurons if self.lif is not None else None
        if width is not None and self.attn.n_inputs != width:
            raise ValueError(f"attention expects {self.attn.n_inputs} inputs but LIF has {width} neurons")

    @property
    def pipeline(self):
        return route(self.variant)

    def named_arrays(self) -> dict:
        out = {}
        if self.lif is not None:
            out["lif.weights"] = self.lif.weights
        out.update(self.attn.named_arrays())
        return out

    def set_array(self, name: str, value: np.ndarray) -> None:
        if name == "lif.weights":
            self.lif.weights = value
        else:
            self.attn.set_array(name, value)


# --- encoding (tier 1 plus input preparation) -------------------------------


def _epoch_seconds(sig) -> int:
    secs = sig.duration
    if abs(secs - round(secs)) > 1e-9 or round(secs) < 1:
        raise ValueError(f"signal {sig.id!r} lasts {secs} s; a whole number of seconds is required")
    return int(round(secs))


def spike_seed_for(base: int, sample_id: str, second: int):
    return [int(base), zlib.crc32(sample_id.encode("utf-8")), int(second)]


def encode_signal(sig, params: ModelParams):
    """Normalized spectrogram and the (rows, D) model input for one signal."""
    return _encode(sig, params.pipeline, params.tier1)


def _encode(sig, pipe, t1cfg):
    spec = tier1.spectrogram(sig, t1cfg)
    if pipe.front == "whole":
        return spec, spec.values.reshape(1, -1).copy()
    if pipe.front == "space":
        episodes = tier1.truncate_space(spec, pipe.bands)
    else:
        episodes = tier1.truncate_time(spec, _epoch_seconds(sig))
    if pipe.spike_code:
        episodes = [
            tier1.encode_spike_train(e, spike_seed_for(pipe.spike_seed, sig.id, e.second_index))
            for e in episodes
        ]
    return spec, tier1.stack_flats(episodes)


def encode_dataset(ds, params: ModelParams) -> np.ndarray:
    return np.stack([encode_signal(s, params)[1] for s in ds])


def init_model(variant: VariantConfig, cfg: ModelConfig = ModelConfig(), seed: int = 0,
               example=None, input_shape=None) -> ModelParams:
    """Fresh parameters sized from ``example`` (a RawSignal) or ``input_shape`` (rows, D)."""
    if input_shape is None:
        if example is None:
            raise ValueError("init_model needs an example signal or an input shape")
        input_shape = _encode(example, route(variant), cfg.tier1)[1].shape
    _, d_in = input_shape
    rng = np.random.default_rng(seed)
    lif = None
    width = d_in
    if route(variant).snn is not None:
        lif = tier2.LifParams.init(cfg.n_neurons, d_in, rng, tau=cfg.tau, u_th=cfg.u_th,
                                   surrogate_width=cfg.surrogate_width)
        width = cfg.n_neurons
    attn = AttentionParams.init(width, cfg.d_model, rng, n_blocks=cfg.n_blocks,
                                n_heads=cfg.n_heads, positional=cfg.positional)
    return ModelParams(variant, lif, attn, cfg.tier1)


# --- forward / backward ------------------------------------------------------


@dataclass
class PipelineTrace:
    spectrogram: tier1.Spectrogram | None
    inputs: np.ndarray
    snapshot: tier2.SnapshotMatrix | None
    iterate_caches: list | None
    zt: np.ndarray
    attention: object  # tier34.ForwardTrace


def model_forward(x: np.ndarray, params: ModelParams, spec=None):
    """Logits for encoded inputs ``x`` of shape (..., rows, D)."""
    pipe = params.pipeline
    snap = caches = None
    if pipe.snn == "sample":
        snap = tier2.snn_encode_sample(x, params.lif)
        zt = transpose_snapshots(snap.Z)
    elif pipe.snn == "iterates":
        mean_spikes, caches = tier2.conventional_forward(x.mean(axis=-2), params.lif, pipe.T)
        zt = mean_spikes[..., None, :]
    else:
        zt = x
    logits, trace = attention_forward(zt, params.attn)
    return logits, PipelineTrace(spec, x, snap, caches, zt, trace)


def model_backward(grad_logits: np.ndarray, trace: PipelineTrace, params: ModelParams) -> dict:
    pipe = params.pipeline
    g = attention_backward(grad_logits, trace.attention, params.attn)
    grads = dict(g.arrays)
    if pipe.snn == "sample":
        _, grads["lif.weights"] = tier2.snn_backward(transpose_snapshots(g.zt), trace.snapshot, params.lif)
    elif pipe.snn == "iterates":
        _, grads["lif.weights"] = tier2.conventional_backward(g.zt[..., 0, :], trace.iterate_caches, params.lif)
    return grads


def forward_sample(sig, params: ModelParams):
    """Run one signal through every active tier. Returns ``(logits, trace)``."""
    spec, x = encode_signal(sig, params)
    return model_forward(x, params, spec)


def cross_entropy(logits, label):
    """Softmax cross-entropy. Returns ``(loss, grad_logits)``.

    Batched: ``logits`` (B, C) and ``label`` (B,) give the mean loss and the
    gradient of that mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    label = np.asarray(label)
    n_classes = logits.shape[-1]
    if np.any(label < 0) or np.any(label >= n_classes):
        raise ValueError(f"label {label} outside [0, {n_classes})")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    onehot = np.eye(n_classes)[label]
    if logits.ndim == 1:
        return float(-log_probs[label]), softmax_rows(logits) - onehot
    b = logits.shape[0]
    loss = float(-np.mean(log_probs[np.arange(b), label]))
    return loss, (softmax_rows(logits) - onehot) / b


# --- training / evaluation ---------------------------------------------------


def predict(x: np.ndarray, params: ModelParams, chunk: int = 128) -> np.ndarray:
    preds = []
    for i in range(0, len(x), chunk):
        logits, _ = model_forward(x[i : i + chunk], params)
        preds.append(np.argmax(logits, axis=-1))  # first max: ties go to the lowest class
    return np.concatenate(preds)


def train_epochs(train_ds, val_ds, params: ModelParams, opt: OptConfig = OptConfig()):
    """Mini-batch Adam over all trainable arrays.

    Returns a trained copy of ``params`` and a history list of
    ``{"epoch", "train_loss", "val_accuracy"}`` dicts.
    """
    if train_ds is None or len(train_ds) == 0:
        raise ValueError("empty training dataset")
    params = copy.deepcopy(params)
    x_train = encode_dataset(train_ds, params)
    y_train = train_ds.labels
    x_val = encode_dataset(val_ds, params) if val_ds is not None and len(val_ds) else None
    states = {
        name: AdamState(a.shape, lr=opt.lr, beta1=opt.beta1, beta2=opt.beta2, eps=opt.eps)
        for name, a in params.named_arrays().items()
    }
    rng = np.random.default_rng(opt.seed)
    history = []
    for epoch in range(1, opt.epochs + 1):
        order = rng.permutation(len(x_train))
        total = 0.0
        for start in range(0, len(order), opt.batch_size):
            idx = order[start : start + opt.batch_size]
            logits, trace = model_forward(x_train[idx], params)
            loss, g = cross_entropy(logits, y_train[idx])
            total += loss * len(idx)
            grads = model_backward(g, trace, params)
            for name, value in params.named_arrays().items():
                params.set_array(name, adam_step(value, grads[name], states[name]))
        val_acc = float("nan")
        if x_val is not None:
            val_acc = float(np.mean(predict(x_val, params) == val_ds.labels))
        history.append({"epoch": epoch, "train_loss": total / len(order), "val_accuracy": val_acc})
        log.debug("epoch %d loss %.4f val %.3f", epoch, total / len(order), val_acc)
    return params, history


def evaluate(ds, params: ModelParams) -> Metrics:
    if ds is None or len(ds) == 0:
        raise ValueError("empty dataset")
    pred = predict(encode_dataset(ds, params), params)
    return Metrics.from_predictions(ds.labels, pred, len(ds.class_names))


def history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_accuracy"])
    for h in history:
        w.writerow([h["epoch"], repr(h["train_loss"]), repr(h["val_accuracy"])])
    return buf.getvalue()
