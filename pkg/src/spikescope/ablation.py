"""Pipeline variants and the ablation harness.

``Proposal``   time-sliced episodes -> LIF (one step each) -> transpose -> attention
``SDTS``       frequency-band slices instead of time slices
``SpikeTrain`` Bernoulli spike-coded episodes before the LIF layer
``NoTS``       whole spectrogram, T LIF iterates averaged, one attention row
``ATDTS``      time slices averaged first, then T iterates, one attention row
``NoTier2``    time-sliced episodes straight into attention, no LIF layer
"""
from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

log = logging.getLogger(__name__)

VARIANTS = ("Proposal", "SDTS", "SpikeTrain", "NoTS", "ATDTS", "NoTier2")

_REQUIRED = {
    "Proposal": (),
    "SDTS": ("bands",),
    "SpikeTrain": ("spike_seed",),
    "NoTS": ("T",),
    "ATDTS": ("T",),
    "NoTier2": (),
}
_DEFAULTS = {"T": 12, "bands": 30, "spike_seed": 0}


@dataclass(frozen=True)
class VariantConfig:
    name: str = "Proposal"
    T: int | None = None
    bands: int | None = None
    spike_seed: int | None = None

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise ValueError(f"unknown variant {self.name!r}; expected one of {VARIANTS}")
        needed = _REQUIRED[self.name]
        for f in ("T", "bands", "spike_seed"):
            value = getattr(self, f)
            if f in needed and value is None:
                raise ValueError(f"variant {self.name} requires {f}")
            if f not in needed and value is not None:
                raise ValueError(f"variant {self.name} does not take {f}")
        if self.T is not None and self.T < 1:
            raise ValueError("T must be >= 1")
        if self.bands is not None and self.bands < 1:
            raise ValueError("bands must be >= 1")

    @classmethod
    def default(cls, name: str, **overrides) -> "VariantConfig":
        """Variant with its required fields filled from the defaults."""
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}; expected one of {VARIANTS}")
        kw = {f: _DEFAULTS[f] for f in _REQUIRED[name]}
        kw.update({k: v for k, v in overrides.items() if v is not None and k in _REQUIRED[name]})
        return cls(name, **kw)

    @property
    def tag(self) -> int:
        return VARIANTS.index(self.name)


@dataclass(frozen=True)
class Pipeline:
    """How a variant composes the tiers.

    ``front``: how the spectrogram is cut ("time", "space" or "whole").
    ``spike_code``: Bernoulli-encode episodes before the LIF layer.
    ``snn``: "sample" (one step per episode), "iterates" (average rows,
    then T steps) or None (no LIF layer).
    """

    name: str
    stages: tuple
    front: str
    spike_code: bool
    snn: str | None
    T: int | None = None
    bands: int | None = None
    spike_seed: int | None = None


def route(variant: VariantConfig) -> Pipeline:
    n = variant.name
    if n == "Proposal":
        return Pipeline(n, ("truncate_time", "snn_encode_sample", "transpose_snapshots", "attention"),
                        "time", False, "sample")
    if n == "SDTS":
        return Pipeline(n, ("truncate_space", "snn_encode_sample", "transpose_snapshots", "attention"),
                        "space", False, "sample", bands=variant.bands)
    if n == "SpikeTrain":
        return Pipeline(n, ("truncate_time", "encode_spike_train", "snn_encode_sample",
                            "transpose_snapshots", "attention"),
                        "time", True, "sample", spike_seed=variant.spike_seed)
    if n == "NoTS":
        return Pipeline(n, ("flatten_spectrogram", "snn_conventional_iterates", "transpose_snapshots",
                            "attention"), "whole", False, "iterates", T=variant.T)
    if n == "ATDTS":
        return Pipeline(n, ("truncate_time", "snn_encode_atdts", "transpose_snapshots", "attention"),
                        "time", False, "iterates", T=variant.T)
    if n == "NoTier2":
        return Pipeline(n, ("truncate_time", "attention"), "time", False, None)
    raise ValueError(f"unknown variant {n!r}")


# --- suite -----------------------------------------------------------------

ABLATION_HEADER = ["variant", "seed", "overall_accuracy", "wake_f1", "n1_f1", "n2_f1", "n3_f1", "rem_f1"]


@dataclass
class AblationRow:
    variant: str
    seed: int
    overall_accuracy: float
    f1: tuple

    def as_list(self):
        return [self.variant, self.seed, repr(self.overall_accuracy), *(repr(float(v)) for v in self.f1)]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SPIKESCOPE_THREADS", "1")))
    except ValueError:
        return 1


def _run_cell(ds, variant, seed, model_cfg, opt_cfg, fractions):
    from . import datagen, train

    tr, va, te = datagen.split(ds, *fractions, seed=seed)
    params = train.init_model(variant, model_cfg, seed=seed, example=ds[0])
    cfg = opt_cfg.replace(seed=seed)
    params, _ = train.train_epochs(tr, va, params, cfg)
    m = train.evaluate(te, params)
    log.info("%s seed=%d accuracy=%.4f", variant.name, seed, m.accuracy)
    return AblationRow(variant.name, seed, m.accuracy, tuple(m.f1))


def run_ablation_suite(ds, configs, seeds, model_cfg=None, opt_cfg=None, fractions=(0.6, 0.2)):
    """Train and test every (variant, seed) cell on the seed's split of ``ds``.

    Returns rows in (variant, seed) order; cells run on up to
    ``SPIKESCOPE_THREADS`` worker threads.
    """
    from . import train

    configs = list(configs)
    seeds = [int(s) for s in seeds]
    if not configs or not seeds:
        raise ValueError("need at least one variant and one seed")
    model_cfg = model_cfg or train.ModelConfig()
    opt_cfg = opt_cfg or train.OptConfig()
    cells = [(v, s) for v in configs for s in seeds]
    workers = min(worker_count(), len(cells))
    if workers == 1:
        return [_run_cell(ds, v, s, model_cfg, opt_cfg, fractions) for v, s in cells]
    with ThreadPoolExecutor(workers) as pool:
        futures = [pool.submit(_run_cell, ds, v, s, model_cfg, opt_cfg, fractions) for v, s in cells]
        return [f.result() for f in futures]


def summarize(rows) -> dict:
    """Mean overall accuracy per variant, in first-seen order."""
    out = {}
    for r in rows:
        out.setdefault(r.variant, []).append(r.overall_accuracy)
    return {k: float(np.mean(v)) for k, v in out.items()}


def ablation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ABLATION_HEADER)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()
