"""Binary checkpoint format.

Layout (little-endian)::

    b"EEG4TIER"  u32 version=1  u8 variant tag  u32 array count
    per array:   u16 name length, name (utf-8), u8 rank, rank x u32 dims,
                 row-major f64 payload

Hyperparameters ride along as rank-0 arrays named ``cfg.*``.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .ablation import VARIANTS, VariantConfig
from .tier1 import Tier1Config
from .tier2 import LifParams
from .tier34 import AttentionParams

MAGIC = b"EEG4TIER"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _config_arrays(params) -> dict:
    cfg = {
        "cfg.n_heads": params.attn.n_heads,
        "cfg.positional": float(params.attn.positional),
        "cfg.window": params.tier1.window,
        "cfg.hop": params.tier1.hop,
        "cfg.max_freq": params.tier1.max_freq,
    }
    if params.lif is not None:
        cfg.update({
            "cfg.tau": params.lif.tau,
            "cfg.u_th": params.lif.u_th,
            "cfg.surrogate_width": params.lif.surrogate_width,
        })
    v = params.variant
    for f in ("T", "bands", "spike_seed"):
        if getattr(v, f) is not None:
            cfg[f"cfg.{f}"] = getattr(v, f)
    return {k: np.array(float(x)) for k, x in cfg.items()}


def dumps(params) -> bytes:
    arrays = {**params.named_arrays(), **_config_arrays(params)}
    out = bytearray(MAGIC)
    out += struct.pack("<IBI", VERSION, params.variant.tag, len(arrays))
    for name, a in arrays.items():
        a = np.asarray(a, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
        out += a.tobytes()
    return bytes(out)


def save_checkpoint(params, path) -> None:
    """Write atomically: the file appears only once fully written."""
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    tmp.write_bytes(dumps(params))
    os.replace(tmp, path)


def loads(data: bytes):
    from .train import ModelParams

    if data[:8] != MAGIC:
        raise CheckpointError(f"not a checkpoint: magic {data[:8]!r} != {MAGIC!r}")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise CheckpointError(f"checkpoint truncated at byte {pos} (length {len(data)})")
        vals = struct.unpack_from(fmt, data, pos)
        pos += size
        return vals

    version, tag, count = take("<IBI")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if tag >= len(VARIANTS):
        raise CheckpointError(f"unknown variant tag {tag}")
    arrays = {}
    for _ in range(count):
        (n,) = take("<H")
        if pos + n > len(data):
            raise CheckpointError(f"checkpoint truncated at byte {pos} (length {len(data)})")
        name = data[pos : pos + n].decode("utf-8")
        pos += n
        (rank,) = take("<B")
        dims = take(f"<{rank}I")
        size = int(np.prod(dims, dtype=np.int64)) * 8
        if pos + size > len(data):
            raise CheckpointError(f"checkpoint truncated in array {name!r}")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=size // 8, offset=pos).astype(np.float64).reshape(dims)
        pos += size
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after last array")

    try:
        cfg = {k[4:]: float(v) for k, v in arrays.items() if k.startswith("cfg.")}
        name = VARIANTS[tag]
        variant = VariantConfig(name, **{f: int(cfg[f]) for f in ("T", "bands", "spike_seed") if f in cfg})
        n_blocks = sum(1 for k in arrays if k.startswith("attn.wq"))
        attn = AttentionParams(
            projection=arrays["attn.projection"],
            proj_bias=arrays["attn.proj_bias"],
            wq=[arrays[f"attn.wq{b}"] for b in range(n_blocks)],
            wk=[arrays[f"attn.wk{b}"] for b in range(n_blocks)],
            wv=[arrays[f"attn.wv{b}"] for b in range(n_blocks)],
            class_token=arrays["attn.class_token"],
            head=arrays["attn.head"],
            head_bias=arrays["attn.head_bias"],
            n_heads=int(cfg["n_heads"]),
            positional=bool(cfg["positional"]),
        )
        lif = None
        if "lif.weights" in arrays:
            lif = LifParams(arrays["lif.weights"], tau=cfg["tau"], u_th=cfg["u_th"],
                            surrogate_width=cfg["surrogate_width"])
        t1 = Tier1Config(window=int(cfg["window"]), hop=int(cfg["hop"]), max_freq=cfg["max_freq"])
        return ModelParams(variant, lif, attn, t1)
    except (KeyError, ValueError, IndexError) as exc:
        raise CheckpointError(f"checkpoint shape manifest invalid: {exc}") from None


def load_checkpoint(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return loads(path.read_bytes())
