import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

CLI = os.environ.get("UTVI_CLI")
if not CLI:
    pytest.skip("UTVI_CLI not set", allow_module_level=True)


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("UTVI_THREADS", None)
    if env:
        full_env.update(env)
    return subprocess.run(
        [CLI, *[str(a) for a in args]],
        capture_output=True,
        text=True,
        env=full_env,
        timeout=600,
    )


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


TINY_TRAIN = {
    "epochs": 3,
    "batches_per_epoch": 2,
    "batch_size": 16,
    "val_size": 32,
}


def write_config(path, **overrides):
    cfg = {"task": "regression", "mode": "utvi", "seeds": [5], "train": dict(TINY_TRAIN)}
    for key, value in overrides.items():
        if key in ("epochs", "batches_per_epoch", "batch_size", "val_size", "learning_rate",
                   "mc_samples", "fixed_dataset_size"):
            cfg["train"][key] = value
        else:
            cfg[key] = value
    path.write_text(json.dumps(cfg))
    return path


def test_usage_errors():
    assert run().returncode == 2
    assert run("frobnicate").returncode == 2
    assert run("eval").returncode == 2  # --model/--data are required
    r = run("--help")
    assert r.returncode == 0
    for cmd in ("gen", "train", "eval", "bench", "maps"):
        assert cmd in r.stdout


def test_gen_regression(tmp_path):
    out = tmp_path / "data"
    r = run("gen", "--task", "regression", "--n", "40", "--seed", "3", "--out", out)
    assert r.returncode == 0, r.stderr
    assert "40 rows" in r.stdout
    assert "seed 3" in r.stdout
    rows = read_csv(out / "regression.csv")
    assert rows[0] == ["x", "y"]
    assert len(rows) == 41

    again = tmp_path / "again.csv"
    r = run("gen", "--task", "regression", "--n", "40", "--seed", "3", "--out", again)
    assert r.returncode == 0
    assert again.read_bytes() == (out / "regression.csv").read_bytes()

    other = tmp_path / "other.csv"
    run("gen", "--task", "regression", "--n", "40", "--seed", "4", "--out", other)
    assert other.read_bytes() != again.read_bytes()


def test_gen_localization(tmp_path):
    out = tmp_path / "loc.csv"
    r = run("gen", "--task", "localization", "--n", "6", "--seed", "1", "--out", out)
    assert r.returncode == 0, r.stderr
    rows = read_csv(out)
    assert len(rows) == 7
    assert len(rows[0]) == 67
    assert rows[0][0] == "px_0"
    assert rows[0][-3:] == ["x", "y", "n_detected"]


def test_gen_missing_task(tmp_path):
    r = run("gen", "--out", tmp_path / "x.csv")
    assert r.returncode == 2
    assert "--task" in r.stderr


def test_train_artifacts_and_determinism(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out1 = tmp_path / "run1"
    r = run("train", "--config", cfg, "--out", out1)
    assert r.returncode == 0, r.stderr

    assert (out1 / "config.json").is_file()
    seed_dir = out1 / "seed5"
    log = read_csv(seed_dir / "train_log.csv")
    assert log[0] == ["epoch", "train_loss", "val_nll", "kl_scale", "wall_ms"]
    assert len(log) == 4
    assert [row[0] for row in log[1:]] == ["1", "2", "3"]
    # kl annealing for M=3: phi = 4/7, 2/7, 1/7
    assert abs(float(log[1][3]) - 4.0 / 7.0) < 1e-15
    assert abs(float(log[2][3]) - 2.0 / 7.0) < 1e-15
    assert abs(float(log[3][3]) - 1.0 / 7.0) < 1e-15

    best = json.loads((seed_dir / "checkpoint_best.json").read_text())
    final = json.loads((seed_dir / "checkpoint_final.json").read_text())
    assert best["best"] is True
    assert final["best"] is False
    assert final["epoch"] == 3

    out2 = tmp_path / "run2"
    r = run("train", "--config", cfg, "--out", out2)
    assert r.returncode == 0
    for name in ("checkpoint_best.json", "checkpoint_final.json"):
        assert (out2 / "seed5" / name).read_bytes() == (seed_dir / name).read_bytes()
    log2 = read_csv(out2 / "seed5" / "train_log.csv")
    for a, b in zip(log[1:], log2[1:]):
        assert a[:4] == b[:4]  # wall_ms may differ

    # the echoed config is itself a valid input that reproduces the run
    out3 = tmp_path / "run3"
    r = run("train", "--config", out1 / "config.json", "--out", out3)
    assert r.returncode == 0
    assert (out3 / "seed5" / "checkpoint_best.json").read_bytes() == (
        seed_dir / "checkpoint_best.json"
    ).read_bytes()


def test_train_seed_fanout(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", seeds=[2, 7])
    out = tmp_path / "fan"
    r = run("train", "--config", cfg, "--out", out)
    assert r.returncode == 0, r.stderr
    assert (out / "seed2" / "checkpoint_best.json").is_file()
    assert (out / "seed7" / "checkpoint_best.json").is_file()
    a = (out / "seed2" / "checkpoint_best.json").read_bytes()
    b = (out / "seed7" / "checkpoint_best.json").read_bytes()
    assert a != b

    # a --seed flag overrides the config's seed list
    out2 = tmp_path / "single"
    r = run("train", "--config", cfg, "--seed", "2", "--out", out2)
    assert r.returncode == 0
    assert (out2 / "seed2" / "checkpoint_best.json").read_bytes() == a
    assert not (out2 / "seed7").exists()


def test_train_divergence_diagnostics(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", learning_rate=1e308)
    out = tmp_path / "boom"
    r = run("train", "--config", cfg, "--out", out)
    assert r.returncode == 3
    diag = (out / "seed5" / "diagnostics.txt").read_text()
    assert "epoch" in diag
    assert "seed" in diag


def test_flag_overrides(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "ovr"
    r = run("train", "--config", cfg, "--mode", "smp", "--epochs", "2", "--out", out)
    assert r.returncode == 0, r.stderr
    echo = json.loads((out / "config.json").read_text())
    assert echo["mode"] == "smp"
    assert echo["train"]["epochs"] == 2
    log = read_csv(out / "seed5" / "train_log.csv")
    assert len(log) == 3


def test_eval(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "run"
    assert run("train", "--config", cfg, "--out", out).returncode == 0
    data = tmp_path / "test.csv"
    assert run("gen", "--task", "regression", "--n", "64", "--seed", "11",
               "--out", data).returncode == 0

    ck = out / "seed5" / "checkpoint_best.json"
    ev = tmp_path / "ev"
    r = run("eval", "--model", ck, "--data", data, "--out", ev)
    assert r.returncode == 0, r.stderr
    metrics = json.loads((ev / "metrics.json").read_text())
    assert metrics["mode"] == "utvi"
    assert metrics["members"] == 1
    assert metrics["n"] == 64
    assert "mean_nll" in metrics

    ev2 = tmp_path / "ev2"
    r = run("eval", "--model", ck, "--data", data, "--mode", "mcvi", "--samples", "8",
            "--out", ev2)
    assert r.returncode == 0, r.stderr
    m2 = json.loads((ev2 / "metrics.json").read_text())
    assert m2["mode"] == "mcvi"
    assert m2["samples"] == 8
    assert m2["mean_nll"] != metrics["mean_nll"]

    # feeding the wrong dataset shape is an artifact mismatch
    loc = tmp_path / "loc.csv"
    run("gen", "--task", "localization", "--n", "4", "--seed", "1", "--out", loc)
    r = run("eval", "--model", ck, "--data", loc, "--out", tmp_path / "ev3")
    assert r.returncode == 4


def test_eval_threads_agree(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "run"
    assert run("train", "--config", cfg, "--out", out).returncode == 0
    data = tmp_path / "test.csv"
    assert run("gen", "--task", "regression", "--n", "200", "--seed", "12",
               "--out", data).returncode == 0
    ck = out / "seed5" / "checkpoint_best.json"

    r1 = run("eval", "--model", ck, "--data", data, "--out", tmp_path / "t1",
             env={"UTVI_THREADS": "1"})
    r4 = run("eval", "--model", ck, "--data", data, "--out", tmp_path / "t4",
             env={"UTVI_THREADS": "4"})
    assert r1.returncode == 0 and r4.returncode == 0
    assert (tmp_path / "t1" / "metrics.json").read_bytes() == (
        tmp_path / "t4" / "metrics.json"
    ).read_bytes()


def test_bench(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "bench"
    r = run("bench", "--config", cfg, "--samples", "2,3", "--batch", "8", "--repeats", "3",
            "--out", out)
    assert r.returncode == 0, r.stderr
    rows = read_csv(out / "timing.csv")
    assert rows[0] == ["mode", "samples", "batch", "median_ms", "iqr_ms"]
    assert len(rows) == 4  # 2 mcvi rows + 1 utvi row
    assert [row[0] for row in rows[1:]] == ["mcvi", "mcvi", "utvi"]
    assert [row[1] for row in rows[1:]] == ["2", "3", "3"]
    assert all(row[2] == "8" for row in rows[1:])


def test_maps(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", task="localization", epochs=1,
                       batches_per_epoch=1, batch_size=4, val_size=4)
    out = tmp_path / "run"
    r = run("train", "--config", cfg, "--out", out)
    assert r.returncode == 0, r.stderr
    ck = out / "seed5" / "checkpoint_best.json"

    maps = tmp_path / "maps"
    r = run("maps", "--model", ck, "--per-pixel", "4", "--out", maps)
    assert r.returncode == 0, r.stderr
    for name in ("varmap.csv", "crbmap.csv"):
        rows = read_csv(maps / name)
        assert rows[0] == ["row", "col", "value", "count"]
        assert len(rows) == 65

    crb = read_csv(maps / "crbmap.csv")
    assert all(row[3] == "4" for row in crb[1:])

    # regression checkpoints cannot produce localization maps
    reg_cfg = write_config(tmp_path / "reg.json")
    reg_out = tmp_path / "reg"
    assert run("train", "--config", reg_cfg, "--out", reg_out).returncode == 0
    r = run("maps", "--model", reg_out / "seed5" / "checkpoint_best.json",
            "--out", tmp_path / "m2")
    assert r.returncode == 4


def test_corrupt_checkpoint(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "run"
    assert run("train", "--config", cfg, "--out", out).returncode == 0
    ck = out / "seed5" / "checkpoint_best.json"
    data = tmp_path / "d.csv"
    run("gen", "--task", "regression", "--n", "8", "--seed", "2", "--out", data)

    bad = tmp_path / "bad.json"
    bad.write_text(ck.read_text().replace("utvi-checkpoint-1", "utvi-checkpoint-9"))
    r = run("eval", "--model", bad, "--data", data, "--out", tmp_path / "ev")
    assert r.returncode == 4
