"""Time-frequency front end: Hamming-windowed DFT, log magnitude, min-max
scaling, and cutting the image into per-second episodes.

The ablation encoders (frequency-band truncation and Bernoulli spike
coding) live here too since they act on the same image.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import RawSignal

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class Tier1Config:
    window: int = 100
    hop: int = 25
    max_freq: float = 30.0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if self.max_freq < 0:
            raise ValueError("max_freq must be >= 0")

    def n_bins(self, sample_rate: float) -> int:
        return int(np.floor(self.max_freq * self.window / sample_rate + 1e-9)) + 1

    def frames_per_second(self, sample_rate: float) -> int:
        fps = sample_rate / self.hop
        if abs(fps - round(fps)) > 1e-9:
            raise ValueError(f"hop {self.hop} does not divide one second at {sample_rate} Hz")
        return int(round(fps))


@dataclass(frozen=True, eq=False)
class Spectrogram:
    values: np.ndarray  # F x frames
    freqs: np.ndarray
    frame_hop_seconds: float

    @property
    def n_freqs(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "Spectrogram":
        return Spectrogram(np.asarray(values, dtype=np.float64), self.freqs, self.frame_hop_seconds)


@dataclass(frozen=True, eq=False)
class Episode:
    second_index: int
    values: np.ndarray  # F x C

    @property
    def flat(self) -> np.ndarray:
        return np.ascontiguousarray(self.values).reshape(-1)


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window of length ``n``."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    if n == 1:
        return np.ones(1)
    i = np.arange(n)
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * i / (n - 1))
    # Force exact symmetry; cos rounding can differ in the last ulp.
    half = n // 2
    w[n - half :] = w[:half][::-1]
    return w


def frame_signal(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Frames starting every ``hop`` samples, zero-padded past the end.

    The tail is padded by ``window - hop`` zeros so that a signal of length
    ``L`` (``hop`` dividing ``L``) yields exactly ``L / hop`` frames.
    """
    x = np.asarray(x, dtype=np.float64)
    if window > len(x):
        raise ValueError(f"window length {window} exceeds signal length {len(x)}")
    pad = max(window - hop, 0)
    padded = np.concatenate([x, np.zeros(pad)])
    n_frames = (len(padded) - window) // hop + 1
    view = np.lib.stride_tricks.sliding_window_view(padded, window)
    return view[::hop][:n_frames]


def stft_magnitude(sig: RawSignal, cfg: Tier1Config = Tier1Config()):
    """``|X(k)|`` per frame for bins 0..max_freq Hz, as (F x frames), plus bin frequencies."""
    frames = frame_signal(sig.samples, cfg.window, cfg.hop)
    spectrum = np.fft.rfft(frames * hamming_window(cfg.window), axis=1)
    n_bins = min(cfg.n_bins(sig.sample_rate), spectrum.shape[1])
    freqs = np.arange(n_bins) * sig.sample_rate / cfg.window
    return np.abs(spectrum[:, :n_bins]).T, freqs


def stft_logpower(sig: RawSignal, cfg: Tier1Config = Tier1Config()) -> Spectrogram:
    """Log-magnitude spectrogram (before normalization), bins 0..max_freq Hz."""
    mag, freqs = stft_magnitude(sig, cfg)
    return Spectrogram(np.log(np.maximum(mag, LOG_FLOOR)), freqs, cfg.hop / sig.sample_rate)


def normalize(spec: Spectrogram) -> Spectrogram:
    """Min-max scale the whole image into [0, 1]; a flat image maps to zeros."""
    v = spec.values
    lo, hi = v.min(), v.max()
    if hi - lo < 1e-12:
        return spec.with_values(np.zeros_like(v))
    out = (v - lo) / (hi - lo)
    # Pin the extremes exactly despite rounding in the division.
    out[v == lo] = 0.0
    out[v == hi] = 1.0
    return spec.with_values(np.clip(out, 0.0, 1.0))


def spectrogram(sig: RawSignal, cfg: Tier1Config = Tier1Config()) -> Spectrogram:
    return normalize(stft_logpower(sig, cfg))


def truncate_time(spec: Spectrogram, epoch_seconds: int) -> list:
    """Cut the image into ``epoch_seconds`` equal, contiguous time slices."""
    if epoch_seconds < 1:
        raise ValueError("epoch_seconds must be >= 1")
    if spec.frames % epoch_seconds:
        raise ValueError(
            f"{spec.frames} frames cannot be split evenly into {epoch_seconds} seconds"
        )
    c = spec.frames // epoch_seconds
    return [Episode(i, spec.values[:, i * c : (i + 1) * c].copy()) for i in range(epoch_seconds)]


def truncate_space(spec: Spectrogram, bands: int) -> list:
    """Cut the image into ``bands`` contiguous frequency groups over all frames.

    Bins are dealt out like ``numpy.array_split`` (earlier bands take the
    remainder); narrower bands are zero-padded at their high end so every
    episode has the same width.
    """
    if bands < 1:
        raise ValueError("bands must be >= 1")
    if bands > spec.n_freqs:
        raise ValueError(f"cannot split {spec.n_freqs} bins into {bands} bands")
    groups = np.array_split(np.arange(spec.n_freqs), bands)
    width = max(len(g) for g in groups)
    out = []
    for i, g in enumerate(groups):
        v = np.zeros((width, spec.frames))
        v[: len(g)] = spec.values[g]
        out.append(Episode(i, v))
    return out


def encode_spike_train(episode: Episode, seed) -> Episode:
    """Bernoulli spike coding: each element fires with probability = intensity."""
    v = episode.values
    if np.any(v < 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v)):
        raise ValueError("spike-train encoding needs intensities in [0, 1]")
    rng = np.random.default_rng(seed)
    spikes = (rng.random(v.shape) < v).astype(np.float64)
    return Episode(episode.second_index, spikes)


def stack_flats(episodes) -> np.ndarray:
    """(t, D) matrix of episode flats; all episodes must share a length."""
    flats = [e.flat for e in episodes]
    if not flats:
        raise ValueError("no episodes")
    d = len(flats[0])
    for f in flats:
        if len(f) != d:
            raise ValueError(f"inconsistent episode lengths {d} and {len(f)}")
    return np.stack(flats)
