import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikescope.datagen import (
    STAGES,
    Dataset,
    DatasetFormatError,
    GenConfig,
    RawSignal,
    generate_sample,
    load_binary,
    load_csv,
    load_dataset,
    make_dataset,
    save_binary,
    save_csv,
    split,
)


def periodogram_peak(x, fs):
    # Independent of the spectrogram code: plain |FFT|^2 of the whole epoch.
    p = np.abs(np.fft.rfft(x - x.mean())) ** 2
    f = np.fft.rfftfreq(len(x), 1.0 / fs)
    return f[np.argmax(p)]


def test_generate_is_deterministic():
    a = generate_sample("N2", 7)
    b = generate_sample("N2", 7)
    assert a.same_as(b)
    assert not np.array_equal(a.samples, generate_sample("N2", 8).samples)


def test_sample_length_matches_config():
    s = generate_sample("Wake", 0, GenConfig(sample_rate=50.0, epoch_seconds=4))
    assert len(s.samples) == 200 and s.duration == 4.0


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize(
    "stage,lo,hi", [("N3", 0.5, 4.0), ("Wake", 8.0, 13.0), ("N1", 4.0, 8.0), ("REM", 4.0, 8.0)]
)
def test_dominant_band_without_noise(stage, lo, hi, seed):
    s = generate_sample(stage, seed, GenConfig(noise=0.0))
    assert lo <= periodogram_peak(s.samples, s.sample_rate) <= hi


@pytest.mark.parametrize("seed", range(10))
def test_n2_spindle_energy_in_sigma_band(seed):
    s = generate_sample("N2", seed, GenConfig(noise=0.0))
    p = np.abs(np.fft.rfft(s.samples)) ** 2
    f = np.fft.rfftfreq(len(s.samples), 0.01)
    sigma = p[(f >= 11.5) & (f <= 14.5)].sum()
    theta = p[(f >= 4.0) & (f <= 8.0)].sum()
    assert sigma > theta


@pytest.mark.parametrize("stage", STAGES)
def test_zero_mean_over_seeds(stage):
    means = [generate_sample(stage, seed, GenConfig(noise=0.0)).samples.mean() for seed in range(100)]
    assert np.all(np.abs(means) < 0.05)


def test_invalid_stage_and_duration():
    with pytest.raises(ValueError):
        generate_sample("N4", 0)
    with pytest.raises(ValueError):
        GenConfig(epoch_seconds=0)


def _tiny(n=2):
    return Dataset(
        [
            RawSignal(np.array([0.1, -2.5, 3.0, 1e-300]), 4.0, i % 5, f"s{i}")
            for i in range(n)
        ]
    )


def test_csv_round_trip(tmp_path):
    ds = _tiny()
    save_csv(ds, tmp_path / "d.csv")
    assert load_csv(tmp_path / "d.csv").same_as(ds)


def test_csv_round_trip_synthetic(tmp_path):
    ds = make_dataset(2, 3)
    save_csv(ds, tmp_path / "d.csv")
    assert load_csv(tmp_path / "d.csv").same_as(ds)


def test_csv_unknown_label(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,sample_rate,n_samples\na,Wake,1.0,2,0,1\nb,N4,1.0,2,0,1\n")
    with pytest.raises(DatasetFormatError, match=r"row 3.*N4"):
        load_csv(p)


def test_csv_empty(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,sample_rate,n_samples\n")
    with pytest.raises(DatasetFormatError, match="empty dataset"):
        load_csv(p)


def test_csv_malformed_and_inconsistent(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,sample_rate,n_samples\na,Wake,1.0,2,0,x\n")
    with pytest.raises(DatasetFormatError, match="row 2"):
        load_csv(p)
    p.write_text("id,label,sample_rate,n_samples\na,Wake,1.0,3,0,1\n")
    with pytest.raises(DatasetFormatError, match="row 2"):
        load_csv(p)
    p.write_text("id,label,sample_rate,n_samples\na,Wake,1.0,2,0,1\nb,N1,1.0,3,0,1,2\n")
    with pytest.raises(DatasetFormatError, match="inconsistent"):
        load_csv(p)


def test_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_binary_round_trip(tmp_path):
    ds = make_dataset(1, 5)
    save_binary(ds, tmp_path / "d.bin")
    assert load_binary(tmp_path / "d.bin").same_as(ds)
    assert load_dataset(tmp_path / "d.bin").same_as(ds)


def test_binary_layout(tmp_path):
    ds = Dataset([RawSignal(np.array([1.5]), 2.0, 3, "ab")])
    save_binary(ds, tmp_path / "d.bin")
    raw = (tmp_path / "d.bin").read_bytes()
    expected = b"EEGRAW01" + struct.pack("<I", 1) + struct.pack("<I", 2) + b"ab"
    expected += struct.pack("<B", 3) + struct.pack("<d", 2.0) + struct.pack("<I", 1) + struct.pack("<d", 1.5)
    assert raw == expected


def test_binary_errors(tmp_path):
    p = tmp_path / "d.bin"
    p.write_bytes(b"NOTMAGIC")
    with pytest.raises(DatasetFormatError, match="magic"):
        load_binary(p)
    save_binary(make_dataset(1, 0), p)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(DatasetFormatError, match="truncated"):
        load_binary(p)


def test_split_stratified_counts():
    ds = make_dataset(10, 0, GenConfig(epoch_seconds=1))
    tr, va, te = split(ds, 0.6, 0.2, seed=3)
    for part, n in ((tr, 6), (va, 2), (te, 2)):
        assert np.bincount(part.labels, minlength=5).tolist() == [n] * 5


def test_split_deterministic():
    ds = make_dataset(10, 0, GenConfig(epoch_seconds=1))
    a = split(ds, 0.6, 0.2, seed=9)
    b = split(ds, 0.6, 0.2, seed=9)
    assert all(x.ids == y.ids for x, y in zip(a, b))
    c = split(ds, 0.6, 0.2, seed=10)
    assert a[0].ids != c[0].ids


def test_split_invalid_fractions():
    ds = make_dataset(3, 0, GenConfig(epoch_seconds=1))
    for tf, vf in ((0.0, 0.2), (0.8, 0.2), (1.2, 0.1), (0.5, -0.1)):
        with pytest.raises(ValueError):
            split(ds, tf, vf, 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2**16), st.floats(0.2, 0.6), st.floats(0.1, 0.3))
def test_split_is_partition(n, seed, tf, vf):
    ds = make_dataset(n, 1, GenConfig(epoch_seconds=1))
    parts = split(ds, tf, vf, seed)
    ids = [i for p in parts for i in p.ids]
    assert len(ids) == len(set(ids))
    assert sorted(ids) == sorted(ds.ids)


def test_split_unstratified_small_classes():
    sigs = [RawSignal(np.zeros(2), 1.0, lab, f"x{i}") for i, lab in enumerate([0, 0, 0, 0, 1, 2, 2, 2, 2, 2])]
    parts = split(Dataset(sigs), 0.5, 0.2, 0)
    assert sorted(i for p in parts for i in p.ids) == sorted(s.id for s in sigs)
