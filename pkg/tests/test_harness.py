import csv
import json
import math
import os

import numpy as np
import pytest

from taafs.config import load_bench_config, load_run_config
from taafs.data import gen_lennard_jones
from taafs.harness import (NOT_REACHED, REPORT_HEADER, build_model, epochs_to_target,
                           load_run, predict_pair, read_report, run_bench, run_training,
                           split, write_report)
from taafs.net import load_checkpoint

# Frozen from a reference run of the default LJ baseline (tanh, seed 7).
PINNED_VAL_RMSE = 0.006867053095769777
PINNED_TRAIN_RMSE = 0.007974677009718066


def small(tmp_path, *extra):
    return load_run_config("", ["topology = n:6,1", "n_samples = 150", "epochs = 3",
                                f"out_dir = {tmp_path}", *extra])


def test_pinned_baseline_run(tmp_path):
    cfg = load_run_config("", ["activation = tanh", "seed = 7", f"out_dir = {tmp_path}"])
    report = run_training(cfg)
    assert len(report.rows) == 30
    assert report.rows[-1]["val_rmse"] == pytest.approx(PINNED_VAL_RMSE, rel=1e-8)
    assert report.rows[-1]["train_rmse"] == pytest.approx(PINNED_TRAIN_RMSE, rel=1e-8)
    assert [r["epoch"] for r in report.rows] == list(range(1, 31))
    rows = read_report(tmp_path / "report.csv")
    assert rows == report.rows


def test_per_layer_bspline_same_row_count(tmp_path):
    cfg = load_run_config("", ["seed = 7", f"out_dir = {tmp_path}", "curves = false"])
    report = run_training(cfg)
    assert len(report.rows) == 30
    # 6 activated layers x 8 coefficients
    assert report.taaf_added == 48
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["taaf_added"] == 48 and summary["status"] == "ok"


def test_zero_epochs_checkpoint_is_init(tmp_path):
    cfg = small(tmp_path, "epochs = 0")
    report = run_training(cfg)
    assert report.rows == []
    with open(tmp_path / "report.csv") as fh:
        assert list(csv.reader(fh)) == [REPORT_HEADER]
    model, _ = load_checkpoint(tmp_path / "checkpoint.json")
    init = build_model(cfg, 4, np.random.default_rng(cfg.seed))
    for p, q in zip(model.parameters(), init.parameters()):
        np.testing.assert_array_equal(p, q)


def test_curves_written_each_epoch(tmp_path):
    run_training(small(tmp_path, "scheme = global", "curve_samples = 9"))
    names = sorted(os.listdir(tmp_path / "curves"))
    assert names == [f"epoch_{e:03d}.csv" for e in range(4)]


def test_fixed_run_writes_no_curves(tmp_path):
    run_training(small(tmp_path, "activation = silu"))
    assert not (tmp_path / "curves").exists()


def test_write_false_touches_nothing(tmp_path):
    out = tmp_path / "never"
    report = run_training(small(out), write=False)
    assert len(report.rows) == 3 and not out.exists()


def test_split_is_seeded_and_disjoint():
    ds = gen_lennard_jones(50, seed=1)
    a_tr, a_va = split(ds, 0.2, 3)
    b_tr, b_va = split(ds, 0.2, 3)
    assert a_tr == b_tr and a_va == b_va and len(a_va) == 10
    both = np.concatenate([a_tr.energy, a_va.energy])
    np.testing.assert_array_equal(np.sort(both), np.sort(ds.energy))


def test_report_round_trip(tmp_path):
    rows = [dict(epoch=1, train_rmse=0.1 / 3, val_rmse=2 / 7, train_force_rmse=math.nan,
                 val_force_rmse=1e-300, lr=1e-3)]
    write_report(tmp_path / "r.csv", rows)
    back = read_report(tmp_path / "r.csv")
    assert back[0]["train_rmse"] == rows[0]["train_rmse"] and back[0]["val_rmse"] == 2 / 7
    assert math.isnan(back[0]["train_force_rmse"]) and back[0]["val_force_rmse"] == 1e-300


def test_predict_pair_matches_finite_difference(tmp_path):
    run_training(small(tmp_path))
    model, stats, _ = load_run(tmp_path)
    r = np.array([1.0, 1.3, 2.0])
    e, f = predict_pair(model, stats, r)
    h = 1e-6
    num = -(predict_pair(model, stats, r + h)[0] - predict_pair(model, stats, r - h)[0]) / (2 * h)
    np.testing.assert_allclose(f, num, rtol=1e-6, atol=1e-9)


def test_divergence_is_reported(tmp_path):
    report = run_training(small(tmp_path, "lr = 1e200", "scheme = per_neuron"))
    assert report.status == "diverged"
    doc = json.loads((tmp_path / "divergence.json").read_text())
    assert "non-finite" in doc["reason"]
    assert not (tmp_path / "checkpoint.json").exists()


# -- epochs to target -------------------------------------------------------


def rows_of(values):
    return [{"epoch": i + 1, "val_rmse": v} for i, v in enumerate(values)]


def test_epochs_to_target_first_hit():
    rows = rows_of([0.9, 0.5, 0.6, 0.4, 0.3])
    assert epochs_to_target(rows, 0.5) == 2
    assert epochs_to_target(rows, 0.45) == 4
    assert epochs_to_target(rows, 0.1) is None
    assert epochs_to_target(rows, math.nan) is None
    assert epochs_to_target([], 1.0) is None


def test_tanh_only_bench_is_all_hundred_percent(tmp_path):
    bench = load_bench_config("", ["cells = tanh", "seeds = 0, 1", "datasets = lj, morse",
                                   "topology = n:6,1", "n_samples = 150", "epochs = 4",
                                   f"out_dir = {tmp_path}"])
    runs, table = run_bench(bench)
    assert len(table) == 2 and len(runs) == 4
    for row in table:
        assert row["ratio_pct"] == 100.0 and row["time_ratio_pct"] == 100.0
        assert row["epochs_to_target"] == "4"
    for run in runs:
        assert run["ratio_pct"] == 100.0 and run["epochs_to_target"] == run["epochs"]
    with open(tmp_path / "bench_table.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_bench_marks_diverged_cells(tmp_path):
    bench = load_bench_config("", ["cells = tanh, bspline", "seeds = 0", "datasets = lj",
                                   "topology = n:6,1", "n_samples = 150", "epochs = 2",
                                   "scheme = per_neuron", "lr = 1e200", f"out_dir = {tmp_path}"])
    runs, table = run_bench(bench)
    statuses = {r["cell"]: r["status"] for r in table}
    assert statuses["bspline"] == "diverged 1/1"
    assert {r["cell"]: r["epochs_to_target"] for r in table}["bspline"] == NOT_REACHED
