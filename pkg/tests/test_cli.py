import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spikescope import cli
from spikescope.datagen import load_csv, load_dataset


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small separable dataset and a model trained on it."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data.csv"
    assert run("synth", "--n-per-class", 6, "--seed", 3, "--noise", 0, "--out", data) == 0
    out = root / "run"
    assert run("train", "--data", data, "--out", out, "--epochs", 60, "--seed", 0) == 0
    return root, data, out


def test_synth_record_count_and_reload(tmp_path):
    path = tmp_path / "d.csv"
    assert run("synth", "--n-per-class", 2, "--seed", 9, "--out", path) == 0
    ds = load_csv(path)
    assert len(ds) == 10
    assert sorted(np.bincount(ds.labels).tolist()) == [2] * 5


def test_synth_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("synth", "--n-per-class", 2, "--seed", 4, "--epoch-seconds", 5, "--out", a)
    run("synth", "--n-per-class", 2, "--seed", 4, "--epoch-seconds", 5, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert not (tmp_path / "a.csv.partial").exists()


def test_synth_binary(tmp_path):
    path = tmp_path / "d.bin"
    assert run("synth", "--n-per-class", 1, "--seed", 0, "--out", path) == 0
    assert path.read_bytes()[:8] == b"EEGRAW01"
    assert len(load_dataset(path)) == 5


def test_train_writes_artifacts(workspace):
    _, _, out = workspace
    assert (out / "model.ckpt").read_bytes()[:8] == b"EEG4TIER"
    lines = (out / "history.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "epoch" and len(lines) == 61


def test_eval_on_train_split_is_perfect(workspace, capsys):
    _, data, out = workspace
    assert run("eval", "--data", data, "--out", out, "--split", "train", "--seed", 0) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split() == ["Pre", "Re", "F1"]
    assert [l.split()[0] for l in lines[1:6]] == ["Wake", "N1", "N2", "N3", "REM"]
    assert lines[6].startswith("Overall Accuracy 1.0000")


def test_eval_missing_checkpoint(workspace, capsys):
    _, data, out = workspace
    assert run("eval", "--data", data, "--out", out, "--checkpoint", out / "missing.ckpt") != 0
    assert "checkpoint not found" in capsys.readouterr().err


def test_visualize(workspace):
    _, data, out = workspace
    assert run("visualize", "--data", data, "--out", out, "--sample-id", "N2-0002") == 0
    rows = (out / "relevance.csv").read_text().splitlines()
    assert rows[0] == "second_index,relevance"
    rel = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert len(rel) == 30
    assert abs(rel.sum() - 1.0) < 1e-9
    spec = (out / "spectrogram.csv").read_text().splitlines()
    assert len(spec) == 1 + 31 and len(spec[0].split(",")) == 1 + 120
    root = ET.parse(out / "visualization.svg").getroot()
    assert root.get("width") == "800" and root.get("height") == "400"
    ids = {g.get("id") for g in root.iter("{http://www.w3.org/2000/svg}g")}
    assert {"spectrogram-panel", "relevance-panel"} <= ids


def test_visualize_unknown_sample(workspace, capsys):
    _, data, out = workspace
    assert run("visualize", "--data", data, "--out", out, "--sample-id", "nope") != 0
    assert "nope" in capsys.readouterr().err


def test_ablate_writes_csv(workspace, tmp_path, capsys):
    _, data, _ = workspace
    assert run("ablate", "--data", data, "--out", tmp_path, "--variants", "NoTier2", "--seeds", "0,1",
               "--epochs", 1) == 0
    lines = (tmp_path / "ablation.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("NoTier2,0,")
    assert "NoTier2" in capsys.readouterr().out


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn_per_class = 1\nseed = 2\nepoch-seconds = 3\n")
    out = tmp_path / "d.csv"
    assert run("synth", "--config", cfg, "--out", out) == 0
    assert len(load_csv(out)) == 5
    assert run("synth", "--config", cfg, "--n-per-class", 2, "--out", out) == 0
    ds = load_csv(out)
    assert len(ds) == 10 and ds[0].duration == 3


def test_config_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_per_class=1\nlearning_rate=0.1\n")
    assert run("synth", "--config", cfg, "--out", tmp_path / "x.csv") != 0
    assert "unknown key 'learning_rate'" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


@pytest.mark.parametrize("argv", [
    ["synth", "--n-per-class", "0"],
    ["synth", "--noise", "abc"],
    ["train", "--variant", "Bogus"],
    ["train"],
    ["eval", "--split", "holdout"],
])
def test_validation_errors_exit_nonzero(tmp_path, argv):
    assert run(*argv, "--out", tmp_path / "o") != 0


def test_missing_data_file(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "none.csv", "--out", tmp_path) != 0
    assert capsys.readouterr().err
