"""Synthetic single-channel sleep EEG and the on-disk dataset formats.

Each synthetic epoch is a sum of band-limited sinusoids whose dominant
rhythm depends on the sleep stage, plus white Gaussian noise:

======  ==========================================================
Wake    alpha 8-13 Hz, waxing and waning, weak beta
N1      theta 4-8 Hz, fading alpha remnants
N2      sleep-spindle bursts 12-14 Hz at random times over theta
N3      high-amplitude delta 0.5-4 Hz
REM     low-amplitude mixed theta 4-8 Hz with beta 16-28 Hz
======  ==========================================================
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STAGES = ("Wake", "N1", "N2", "N3", "REM")
BINARY_MAGIC = b"EEGRAW01"


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    sample_rate: float = 100.0
    epoch_seconds: int = 30
    amplitude: float = 1.0
    noise: float = 0.3

    def __post_init__(self):
        if self.epoch_seconds < 1:
            raise ValueError(f"epoch_seconds must be >= 1, got {self.epoch_seconds}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.noise < 0:
            raise ValueError("noise amplitude must be non-negative")

    @property
    def n_samples(self) -> int:
        n = self.sample_rate * self.epoch_seconds
        if abs(n - round(n)) > 1e-9:
            raise ValueError("sample_rate * epoch_seconds must be an integer")
        return int(round(n))


@dataclass(frozen=True, eq=False)
class RawSignal:
    samples: np.ndarray
    sample_rate: float
    label: int
    id: str

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not 0 <= self.label < len(STAGES):
            raise ValueError(f"label index {self.label} out of range")
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def stage(self) -> str:
        return STAGES[self.label]

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def same_as(self, other: "RawSignal") -> bool:
        return (
            self.id == other.id
            and self.label == other.label
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    signals: tuple
    class_names: tuple = STAGES

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if not self.signals:
            raise DatasetFormatError("empty dataset")
        for s in self.signals:
            if not 0 <= s.label < len(self.class_names):
                raise DatasetFormatError(f"signal {s.id!r} has label outside class_names")

    def __len__(self):
        return len(self.signals)

    def __iter__(self):
        return iter(self.signals)

    def __getitem__(self, i):
        return self.signals[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.signals], dtype=np.int64)

    @property
    def ids(self) -> list:
        return [s.id for s in self.signals]

    def by_id(self, sample_id: str) -> RawSignal:
        for s in self.signals:
            if s.id == sample_id:
                return s
        raise KeyError(f"no sample with id {sample_id!r}")

    def same_as(self, other: "Dataset") -> bool:
        return (
            self.class_names == other.class_names
            and len(self) == len(other)
            and all(a.same_as(b) for a, b in zip(self, other))
        )


def stage_index(stage) -> int:
    if isinstance(stage, (int, np.integer)):
        if 0 <= stage < len(STAGES):
            return int(stage)
    elif stage in STAGES:
        return STAGES.index(stage)
    raise ValueError(f"invalid stage {stage!r}; expected one of {STAGES}")


# --- synthesis -------------------------------------------------------------


def _tone(rng, t, lo, hi, amp):
    f = rng.uniform(lo, hi)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return amp * np.sin(2.0 * np.pi * f * t + phase)


def _slow_envelope(rng, t, depth):
    # Amplitude modulation between 1-depth and 1 at 0.05-0.2 Hz.
    f = rng.uniform(0.05, 0.2)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return 1.0 - depth * 0.5 * (1.0 + np.sin(2.0 * np.pi * f * t + phase))


def _spindles(rng, t, duration, amp):
    out = np.zeros_like(t)
    for _ in range(rng.integers(3, 7)):
        length = rng.uniform(0.5, 2.0)
        start = rng.uniform(0.0, max(duration - length, 0.0))
        inside = (t >= start) & (t < start + length)
        env = np.zeros_like(t)
        env[inside] = np.sin(np.pi * (t[inside] - start) / length) ** 2
        out += env * _tone(rng, t, 12.0, 14.0, amp)
    return out


def _stage_waveform(stage: int, rng, t, duration):
    if stage == 0:  # Wake
        alpha = sum(_tone(rng, t, 8.5, 12.5, 0.6) for _ in range(2))
        return alpha * _slow_envelope(rng, t, 0.5) + _tone(rng, t, 15.0, 25.0, 0.2)
    if stage == 1:  # N1
        theta = sum(_tone(rng, t, 4.5, 7.5, 0.6) for _ in range(2))
        return theta + _tone(rng, t, 8.5, 12.5, 0.3) * _slow_envelope(rng, t, 0.6)
    if stage == 2:  # N2
        return _spindles(rng, t, duration, 1.5) + _tone(rng, t, 4.5, 7.5, 0.2)
    if stage == 3:  # N3
        return _tone(rng, t, 0.75, 2.0, 1.6) + _tone(rng, t, 2.0, 3.5, 0.8)
    # REM
    theta = sum(_tone(rng, t, 4.5, 7.5, 0.35) for _ in range(2))
    beta = sum(_tone(rng, t, 16.0, 28.0, 0.25) for _ in range(3))
    return theta + beta


def generate_sample(stage, seed: int, cfg: GenConfig = GenConfig(), sample_id: str | None = None) -> RawSignal:
    """Deterministic synthetic epoch for ``stage`` (name or index) and ``seed``."""
    label = stage_index(stage)
    n = cfg.n_samples
    rng = np.random.default_rng([int(seed), label])
    t = np.arange(n) / cfg.sample_rate
    x = cfg.amplitude * _stage_waveform(label, rng, t, cfg.epoch_seconds)
    if cfg.noise > 0:
        x = x + rng.normal(0.0, cfg.noise * cfg.amplitude, size=n)
    if sample_id is None:
        sample_id = f"{STAGES[label]}-{seed}"
    return RawSignal(samples=x, sample_rate=cfg.sample_rate, label=label, id=sample_id)


def make_dataset(n_per_class: int, seed: int, cfg: GenConfig = GenConfig()) -> Dataset:
    """Balanced synthetic dataset, ``n_per_class`` epochs per stage."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=(len(STAGES), n_per_class))
    signals = []
    for i in range(n_per_class):
        for label in range(len(STAGES)):
            signals.append(
                generate_sample(label, int(seeds[label, i]), cfg, sample_id=f"{STAGES[label]}-{i:04d}")
            )
    return Dataset(signals)


# --- splitting -------------------------------------------------------------


def split(ds: Dataset, train_frac: float, val_frac: float, seed: int):
    """Deterministic (train, val, test) partition, stratified when possible."""
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise ValueError(f"invalid split fractions train={train_frac} val={val_frac}")
    rng = np.random.default_rng(seed)
    labels = ds.labels
    counts = np.bincount(labels, minlength=len(ds.class_names))
    present = counts[counts > 0]
    if present.min() >= 3:
        groups = [np.flatnonzero(labels == c) for c in range(len(counts)) if counts[c] > 0]
    else:
        groups = [np.arange(len(ds))]
    parts = ([], [], [])
    for idx in groups:
        idx = rng.permutation(idx)
        n = len(idx)
        n_train = int(round(train_frac * n))
        n_val = int(round(val_frac * n))
        if n >= 3:  # keep every part non-empty
            n_train = min(max(n_train, 1), n - 2)
            n_val = min(max(n_val, 1), n - n_train - 1)
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train : n_train + n_val])
        parts[2].extend(idx[n_train + n_val :])
    out = []
    for name, part in zip(("train", "val", "test"), parts):
        if not part:
            raise ValueError(f"{name} split is empty; dataset too small for these fractions")
        out.append(Dataset([ds[i] for i in sorted(part)], ds.class_names))
    return tuple(out)


# --- CSV -------------------------------------------------------------------

CSV_HEADER = ["id", "label", "sample_rate", "n_samples"]


def save_csv(ds: Dataset, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in ds:
        w.writerow([s.id, ds.class_names[s.label], repr(float(s.sample_rate)), len(s.samples)]
                   + [repr(float(v)) for v in s.samples])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_csv(path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:4]] != CSV_HEADER:
        raise DatasetFormatError(f"{path}: row 1: expected header {','.join(CSV_HEADER)}")
    signals = []
    length = None
    for rownum, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) < 4:
            raise DatasetFormatError(f"{path}: row {rownum}: expected at least 4 fields")
        sid, label, rate, n = row[:4]
        if label not in STAGES:
            raise DatasetFormatError(f"{path}: row {rownum}: unknown label {label!r}")
        try:
            rate = float(rate)
            n = int(n)
            values = np.array([float(v) for v in row[4:]], dtype=np.float64)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: row {rownum}: malformed value ({exc})") from None
        if len(values) != n:
            raise DatasetFormatError(
                f"{path}: row {rownum}: n_samples={n} but {len(values)} values present"
            )
        if length is not None and n != length:
            raise DatasetFormatError(
                f"{path}: row {rownum}: inconsistent length {n} (earlier rows have {length})"
            )
        length = n
        try:
            signals.append(RawSignal(values, rate, STAGES.index(label), sid))
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: row {rownum}: {exc}") from None
    if not signals:
        raise DatasetFormatError("empty dataset")
    return Dataset(signals)


# --- binary ----------------------------------------------------------------


def save_binary(ds: Dataset, path) -> None:
    out = bytearray(BINARY_MAGIC)
    out += struct.pack("<I", len(ds))
    for s in ds:
        sid = s.id.encode("utf-8")
        out += struct.pack("<I", len(sid)) + sid
        out += struct.pack("<BdI", s.label, s.sample_rate, len(s.samples))
        out += s.samples.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_binary(path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    data = path.read_bytes()
    if data[:8] != BINARY_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic bytes, expected {BINARY_MAGIC!r}")
    pos = 8

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise DatasetFormatError(f"{path}: truncated at byte {pos}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    signals = []
    for rec in range(count):
        (id_len,) = struct.unpack("<I", take(4))
        sid = take(id_len).decode("utf-8")
        label, rate, n = struct.unpack("<BdI", take(13))
        if label >= len(STAGES):
            raise DatasetFormatError(f"{path}: record {rec}: unknown label index {label}")
        samples = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64)
        signals.append(RawSignal(samples, rate, label, sid))
    if pos != len(data):
        raise DatasetFormatError(f"{path}: {len(data) - pos} trailing bytes")
    if not signals:
        raise DatasetFormatError("empty dataset")
    return Dataset(signals)


def load_dataset(path) -> Dataset:
    """Load either format, sniffing the binary magic."""
    path = Path(path)
    if path.is_file():
        with path.open("rb") as fh:
            if fh.read(8) == BINARY_MAGIC:
                return load_binary(path)
    return load_csv(path)


def save_dataset(ds: Dataset, path) -> None:
    if str(path).endswith((".bin", ".eegraw")):
        save_binary(ds, path)
    else:
        save_csv(ds, path)
