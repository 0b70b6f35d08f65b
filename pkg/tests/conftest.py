import numpy as np
import pytest


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b))))


def naive_dft(frame):
    n = len(frame)
    out = np.zeros(n, dtype=complex)
    for kk in range(n):
        s = 0j
        for ii in range(n):
            s += frame[ii] * np.exp(-2j * np.pi * kk * ii / n)
        out[kk] = s
    return out


def oracle_magnitudes(x, fs, window, hop, max_freq):
    """Direct-summation DFT over frames starting every ``hop`` samples.

    Frames run while start + hop <= len(x); samples past the end count as 0.
    """
    w = np.array([0.54 - 0.46 * np.cos(2 * np.pi * i / (window - 1)) for i in range(window)]) if window > 1 else np.ones(1)
    cols = []
    start = 0
    while start + hop <= len(x):
        frame = np.zeros(window)
        chunk = x[start : start + window]
        frame[: len(chunk)] = chunk
        cols.append(np.abs(naive_dft(frame * w)))
        start += hop
    kmax = int(np.floor(max_freq * window / fs + 1e-9))
    return np.array(cols).T[: min(kmax + 1, window // 2 + 1)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
