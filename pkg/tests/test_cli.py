import json
import subprocess
import sys

import numpy as np
import pytest

from gitm.cli import EXIT_CONFIG, main
from gitm.dataset import TrustLevel, write_dataset_csv
from gitm.plots import read_table
from gitm.synthetic import level_vectors

TINY = """
device_count = 30
field_size = 100
base_x = 50
base_y = 150
rounds = 80
bootstrap_rounds = 10
min_training_vectors = 64
batch_size = 16
train_epochs = 10
retrain_epochs = 2
batches_per_epoch = 2
retrain_batches_per_epoch = 1
retrain_batches = 2
"""


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return path


def test_simulate_writes_outputs_deterministically(tmp_path, tiny_file):
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(tiny_file), "--seed", "42", "--out-dir", str(tmp_path / name)]) == 0
    for name in ("metrics.csv", "events.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["rounds_run"] == 80


def test_seed_override_changes_run(tmp_path, tiny_file):
    main(["simulate", "--config", str(tiny_file), "--seed", "1", "--out-dir", str(tmp_path / "a")])
    main(["simulate", "--config", str(tiny_file), "--seed", "2", "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "events.csv").read_bytes() != (tmp_path / "b" / "events.csv").read_bytes()


def test_sweep_and_plot(tmp_path, tiny_file):
    out = tmp_path / "sweep"
    args = ["--config", str(tiny_file), "--out-dir", str(out)]
    assert main(["sweep", *args, "--percentages", "10", "30", "--seeds", "1", "2"]) == 0
    header, rows = read_table(out / "sweep.csv")
    assert len(rows) == 4 + 4
    assert main(["plot", *args]) == 0
    assert (out / "security.svg").exists() and (out / "network.svg").exists()


def test_train_synthetic_and_csv(tmp_path):
    out = tmp_path / "syn"
    assert main(["train", "--synthetic", "128", "--seed", "3", "--out-dir", str(out)]) == 0
    assert (out / "model.json").exists()
    header, rows = read_table(out / "training.csv")
    assert header[0] == "epoch" and len(rows) == 200

    rng = np.random.default_rng(0)
    X = np.vstack([level_vectors(lvl, 60, rng=rng) for lvl in TrustLevel])
    data = tmp_path / "data.csv"
    write_dataset_csv(data, X)
    cfg = tmp_path / "short.cfg"
    cfg.write_text("train_epochs = 3\n")
    out = tmp_path / "csv"
    assert main(["train", "--data", str(data), "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert len(read_table(out / "training.csv")[1]) == 3


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("malicious_pct = 150\n")
    assert main(["simulate", "--config", str(path), "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_missing_inputs_fail_cleanly(tmp_path):
    assert main(["plot", "--out-dir", str(tmp_path)]) == 1
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out-dir", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gitm", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
