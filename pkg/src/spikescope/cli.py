"""``spikescope`` command line: synth, train, eval, ablate, visualize.

Settings come from an optional ``key=value`` config file (``--config``);
command-line flags override the file. Outputs are written to a
``.partial`` sibling first and renamed into place when complete.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import ablation, datagen, train, viz
from .ablation import VARIANTS, VariantConfig
from .checkpoint import load_checkpoint, save_checkpoint
from .tier1 import Tier1Config
from .tier34 import relevance

log = logging.getLogger("spikescope")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    data: str | None = None
    out: str = "runs"
    variant: str = "Proposal"
    seed: int = 0
    # synth
    n_per_class: int = 100
    noise: float = 0.3
    epoch_seconds: int = 30
    sample_rate: float = 100.0
    # split / training
    train_frac: float = 0.6
    val_frac: float = 0.2
    epochs: int = 30
    batch_size: int = 16
    lr: float = 1e-3
    # model
    n_neurons: int = 64
    tau: float = 0.5
    u_th: float = 1.0
    surrogate_width: float = 1.0
    d_model: int = 64
    n_blocks: int = 1
    n_heads: int = 1
    positional: bool = False
    window: int = 100
    hop: int = 25
    max_freq: float = 30.0
    T: int = 12
    bands: int = 30
    spike_seed: int = 0
    # eval / visualize / ablate
    checkpoint: str | None = None
    split: str = "test"
    sample_id: str | None = None
    variants: str = "Proposal,SpikeTrain,NoTS"
    seeds: str = "0,1,2,3,4"

    def validate(self) -> "RunConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.split not in ("train", "val", "test", "all"):
            raise ConfigError(f"split must be train, val, test or all, got {self.split!r}")
        for name in ("n_per_class", "epochs", "batch_size", "n_neurons", "d_model", "n_blocks", "n_heads",
                     "window", "hop", "T", "bands", "epoch_seconds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lr < 0 or self.noise < 0:
            raise ConfigError("lr and noise must be non-negative")
        if not (0 < self.train_frac < 1 and 0 < self.val_frac < 1 and self.train_frac + self.val_frac < 1):
            raise ConfigError("need 0 < train_frac, val_frac and train_frac + val_frac < 1")
        for v in self.variant_list():
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r} in variants")
        self.seed_list()
        return self

    def variant_list(self) -> list:
        return [v.strip() for v in self.variants.split(",") if v.strip()]

    def seed_list(self) -> list:
        try:
            seeds = [int(s) for s in str(self.seeds).split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"seeds must be comma-separated integers, got {self.seeds!r}") from None
        if not seeds:
            raise ConfigError("need at least one seed")
        return seeds

    def variant_config(self, name: str | None = None) -> VariantConfig:
        return VariantConfig.default(name or self.variant, T=self.T, bands=self.bands, spike_seed=self.spike_seed)

    def model_config(self) -> train.ModelConfig:
        return train.ModelConfig(
            n_neurons=self.n_neurons, tau=self.tau, u_th=self.u_th, surrogate_width=self.surrogate_width,
            d_model=self.d_model, n_blocks=self.n_blocks, n_heads=self.n_heads, positional=self.positional,
            tier1=Tier1Config(window=self.window, hop=self.hop, max_freq=self.max_freq),
        )

    def opt_config(self) -> train.OptConfig:
        return train.OptConfig(lr=self.lr, batch_size=self.batch_size, epochs=self.epochs, seed=self.seed)

    def gen_config(self) -> datagen.GenConfig:
        return datagen.GenConfig(sample_rate=self.sample_rate, epoch_seconds=self.epoch_seconds, noise=self.noise)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw):
    f = _FIELDS[key]
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    try:
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return None if raw is None else str(raw)


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS or key == "command":
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in _FIELDS:
        v = getattr(args, key, None)
        if v is not None and key != "command":
            values[key] = _coerce(key, v)
    return RunConfig(command=args.command, **values).validate()


# --- output helpers ----------------------------------------------------------


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(cfg: RunConfig) -> datagen.Dataset:
    if not cfg.data:
        raise ConfigError("--data is required for this command")
    return datagen.load_dataset(cfg.data)


def _select_split(ds, cfg: RunConfig):
    if cfg.split == "all":
        return ds
    parts = dict(zip(("train", "val", "test"), datagen.split(ds, cfg.train_frac, cfg.val_frac, cfg.seed)))
    return parts[cfg.split]


def _checkpoint_path(cfg: RunConfig) -> Path:
    return Path(cfg.checkpoint) if cfg.checkpoint else Path(cfg.out) / "model.ckpt"


# --- commands -----------------------------------------------------------------


def cmd_synth(cfg: RunConfig) -> int:
    ds = datagen.make_dataset(cfg.n_per_class, cfg.seed, cfg.gen_config())
    out = Path(cfg.out)
    if out.is_dir() or not out.suffix:
        out.mkdir(parents=True, exist_ok=True)
        out = out / "dataset.csv"
    tmp = out.with_name(out.name + ".partial")
    datagen.save_binary(ds, tmp) if out.suffix in (".bin", ".eegraw") else datagen.save_csv(ds, tmp)
    os.replace(tmp, out)
    print(f"wrote {len(ds)} records to {out}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    ds = _load_data(cfg)
    tr, va, te = datagen.split(ds, cfg.train_frac, cfg.val_frac, cfg.seed)
    params = train.init_model(cfg.variant_config(), cfg.model_config(), seed=cfg.seed, example=ds[0])
    params, history = train.train_epochs(tr, va, params, cfg.opt_config())
    out = _out_dir(cfg)
    save_checkpoint(params, _checkpoint_path(cfg))
    _write_text(out / "history.csv", train.history_csv(history))
    m = train.evaluate(te, params)
    print(f"trained {cfg.variant} for {cfg.epochs} epochs on {len(tr)} samples; "
          f"final loss {history[-1]['train_loss']:.4f}")
    print(m.report())
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    ds = _select_split(_load_data(cfg), cfg)
    params = load_checkpoint(_checkpoint_path(cfg))
    m = train.evaluate(ds, params)
    text = m.report()
    _write_text(_out_dir(cfg) / f"metrics_{cfg.split}.txt", text + "\n")
    print(text)
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    ds = _load_data(cfg)
    variants = [cfg.variant_config(v) for v in cfg.variant_list()]
    rows = ablation.run_ablation_suite(ds, variants, cfg.seed_list(), cfg.model_config(), cfg.opt_config(),
                                       fractions=(cfg.train_frac, cfg.val_frac))
    _write_text(_out_dir(cfg) / "ablation.csv", ablation.ablation_csv(rows))
    for name, acc in ablation.summarize(rows).items():
        print(f"{name:12s} mean overall accuracy {acc:.4f}")
    return 0


def cmd_visualize(cfg: RunConfig) -> int:
    ds = _load_data(cfg)
    if not cfg.sample_id:
        raise ConfigError("--sample-id is required for visualize")
    try:
        sig = ds.by_id(cfg.sample_id)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    params = load_checkpoint(_checkpoint_path(cfg))
    logits, trace = train.forward_sample(sig, params)
    rel = relevance(trace.attention)
    out = _out_dir(cfg)
    pred = ds.class_names[int(logits.argmax())]
    _write_text(out / "spectrogram.csv", viz.spectrogram_csv(trace.spectrogram))
    _write_text(out / "relevance.csv", viz.relevance_csv(rel))
    _write_text(out / "visualization.svg",
                viz.render_svg(trace.spectrogram, rel, f"{sig.id}: true {sig.stage}, predicted {pred}"))
    print(f"{sig.id}: true {sig.stage}, predicted {pred}; wrote spectrogram.csv, relevance.csv, "
          f"visualization.svg to {out}")
    return 0


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate,
            "visualize": cmd_visualize}
HELP = {
    "synth": "generate a labeled synthetic dataset",
    "train": "train a variant; writes model.ckpt and history.csv",
    "eval": "evaluate a checkpoint on a dataset split",
    "ablate": "train and test several variants over several seeds",
    "visualize": "export spectrogram, relevance and an SVG for one sample",
}


def make_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key=value config file; flags override it")
    shared.add_argument("--seed")
    shared.add_argument("--out")
    shared.add_argument("--variant", help=", ".join(VARIANTS))
    shared.add_argument("--data", help="dataset file (CSV or EEGRAW01 binary)")
    shared.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spikescope", description="Synthetic EEG sleep staging with a four-tier spiking and attention pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    model_flags = ("epochs", "batch-size", "lr", "train-frac", "val-frac", "n-neurons", "tau", "u-th",
                   "surrogate-width", "d-model", "n-blocks", "n-heads", "positional", "window", "hop",
                   "max-freq", "T", "bands", "spike-seed")
    specs = {
        "synth": ("n-per-class", "noise", "epoch-seconds", "sample-rate"),
        "train": model_flags + ("checkpoint",),
        "eval": ("checkpoint", "split", "train-frac", "val-frac"),
        "ablate": model_flags + ("variants", "seeds"),
        "visualize": ("checkpoint", "sample-id"),
    }
    for name, flags in specs.items():
        sp = sub.add_parser(name, parents=[shared], help=HELP[name])
        for flag in flags:
            sp.add_argument(f"--{flag}", dest=flag.replace("-", "_"))
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"spikescope {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
