"""Training runs and the activation benchmark matrix.

A training run writes into its output directory:

``report.csv``
    ``epoch,train_rmse,val_rmse,train_force_rmse,val_force_rmse,lr``, one
    row per completed epoch.  RMSEs are in dataset energy (force) units;
    force columns are empty when the dataset has no pair-distance forces.
``timing.csv``
    ``epoch,seconds``.  Kept apart so the report is reproducible bit for bit.
``summary.json``
    Status, parameter counts, final metrics and the resolved config.
``checkpoint.json``
    Model parameters plus normalization statistics.
``curves/epoch_NNN.csv``
    Activation curves of every unit (TAAF runs only), epoch 0 = init.
``divergence.json``
    Only for runs stopped by a non-finite loss or gradient.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import data as _data
from .config import BenchConfig, RunConfig
from .net import Model, backward, forward, load_checkpoint, parameter_count, save_checkpoint
from .optim import Adam, DivergenceError, PlateauSchedule
from .taaf import export_curve, write_curves

REPORT_HEADER = ["epoch", "train_rmse", "val_rmse", "train_force_rmse", "val_force_rmse", "lr"]
TIMING_HEADER = ["epoch", "seconds"]
BENCH_RUNS_HEADER = ["dataset", "cell", "seed", "status", "epochs", "final_rmse", "ratio_pct",
                     "epochs_to_target", "s_per_epoch", "taaf_added"]
BENCH_TABLE_HEADER = ["dataset", "cell", "taaf_added", "median_final_rmse", "ratio_pct",
                      "time_ratio_pct", "epochs_to_target", "status"]
NOT_REACHED = "not reached"


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    total_params: int = 0
    taaf_added: int = 0
    status: str = "ok"
    divergence: dict | None = None
    out_dir: str | None = None

    @property
    def final_rmse(self) -> float:
        return self.rows[-1]["val_rmse"] if self.rows else math.nan

    @property
    def val_history(self) -> list[float]:
        return [r["val_rmse"] for r in self.rows]


def load_dataset(cfg: RunConfig) -> _data.Dataset:
    if cfg.dataset in _data.GENERATORS:
        r_range = cfg.r_range() or _data.DEFAULT_R_RANGE[cfg.dataset]
        return _data.GENERATORS[cfg.dataset](cfg.n_samples, r_range, cfg.data_seed)
    return _data.load_csv(cfg.dataset)


def split(ds: _data.Dataset, val_fraction: float, seed: int):
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_val = max(1, int(round(val_fraction * len(ds))))
    if n_val >= len(ds):
        raise _data.DatasetError("validation split leaves no training samples")
    return ds.subset(np.sort(perm[n_val:])), ds.subset(np.sort(perm[:n_val]))


def build_model(cfg: RunConfig, input_dim: int, rng) -> Model:
    return Model.build(cfg.parsed_topology(input_dim), cfg.activation, cfg.basis_spec(),
                       cfg.scheme, cfg.normalizer, cfg.unit_bias, rng)


def _pair_energy_force(model: Model, stats: _data.DatasetStats, features, jac):
    pred, caches = forward(model, stats.transform_features(features))
    dx = backward(model, caches, 1.0).dx
    dE_df = stats.energy_std * dx / stats.feature_std
    return stats.inverse_energy(pred), -np.sum(dE_df * jac[:, stats.kept], axis=1)


def predict_pair(model: Model, stats: _data.DatasetStats, r) -> tuple[np.ndarray, np.ndarray]:
    """Energy and force ``-dE/dr`` in raw units for a model trained on pair
    descriptors."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return _pair_energy_force(model, stats, _data.pair_features(r), _data.pair_feature_jacobian(r))


class _Evaluator:
    """Energy and (for pair data) force RMSE in raw dataset units."""

    def __init__(self, raw: _data.Dataset, stats: _data.DatasetStats):
        self.raw = raw
        self.stats = stats
        self.jac = None
        if (raw.forces is not None and raw.forces.shape[1] == 1
                and _data.is_pair_descriptor(raw.features)):
            self.jac = _data.pair_feature_jacobian(raw.features[:, 0])

    def __call__(self, model: Model) -> tuple[float, float]:
        if self.jac is None:
            pred = self.stats.inverse_energy(model(self.stats.transform_features(self.raw.features)))
            return float(np.sqrt(np.mean((pred - self.raw.energy) ** 2))), math.nan
        energy, force = _pair_energy_force(model, self.stats, self.raw.features, self.jac)
        return (float(np.sqrt(np.mean((energy - self.raw.energy) ** 2))),
                float(np.sqrt(np.mean((force - self.raw.forces[:, 0]) ** 2))))


def _fmt(v: float) -> str:
    return "" if isinstance(v, float) and math.isnan(v) else f"{v:.17g}"


def write_report(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow([r["epoch"]] + [_fmt(r[k]) for k in REPORT_HEADER[1:]])


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(r[k]) if k == "epoch" else (float(r[k]) if r[k] else math.nan))
             for k in REPORT_HEADER} for r in rows]


def _write_timing(path, seconds: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMING_HEADER)
        for i, s in enumerate(seconds, start=1):
            w.writerow([i, f"{s:.6f}"])


def run_training(cfg: RunConfig, write: bool = True) -> RunReport:
    """Train one model as configured.

    Divergence does not raise: the report comes back with ``status ==
    "diverged"`` and a ``divergence`` record.
    """
    cfg.validate()
    raw = load_dataset(cfg)
    train_raw, val_raw = split(raw, cfg.val_fraction, cfg.data_seed)
    train_ds, stats = _data.normalize(train_raw)
    rng = np.random.default_rng(cfg.seed)
    model = build_model(cfg, train_ds.n_features, rng)
    total, added = parameter_count(model)
    report = RunReport(total_params=total, taaf_added=added, out_dir=cfg.out_dir if write else None)
    eval_train = _Evaluator(train_raw, stats)
    eval_val = _Evaluator(val_raw, stats)

    out = cfg.out_dir
    if write:
        os.makedirs(out, exist_ok=True)
        if model.units and cfg.curves:
            os.makedirs(os.path.join(out, "curves"), exist_ok=True)
    def dump_curves(epoch):
        if write and model.units and cfg.curves:
            curves = [export_curve(u, cfg.curve_samples, epoch) for u in model.units]
            write_curves(os.path.join(out, "curves", f"epoch_{epoch:03d}.csv"), curves)

    dump_curves(0)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    sched = PlateauSchedule(cfg.lr, cfg.lr_decay, cfg.lr_floor, cfg.lr_patience)
    params = model.parameters()
    x, y = train_ds.features, train_ds.energy
    n = len(y)
    epoch = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        try:
            for epoch in range(1, cfg.epochs + 1):
                t0 = time.perf_counter()
                order = rng.permutation(n)
                for step, start in enumerate(range(0, n, cfg.batch_size)):
                    idx = order[start:start + cfg.batch_size]
                    pred, caches = forward(model, x[idx])
                    resid = pred - y[idx]
                    loss = float(np.mean(resid * resid))
                    if not math.isfinite(loss):
                        raise DivergenceError(f"non-finite loss {loss} at epoch {epoch}, step {step}")
                    grads = backward(model, caches, 2.0 * resid / len(idx))
                    opt.step(params, grads.arrays(model))
                tr_e, tr_f = eval_train(model)
                va_e, va_f = eval_val(model)
                if not (math.isfinite(tr_e) and math.isfinite(va_e)):
                    raise DivergenceError(f"non-finite evaluation RMSE at epoch {epoch}")
                report.seconds.append(time.perf_counter() - t0)
                report.rows.append(dict(epoch=epoch, train_rmse=tr_e, val_rmse=va_e,
                                        train_force_rmse=tr_f, val_force_rmse=va_f, lr=opt.lr))
                dump_curves(epoch)
                lr, stop = sched.step(report.val_history)
                opt.lr = lr
                if stop:
                    break
        except DivergenceError as exc:
            report.status = "diverged"
            report.divergence = {"epoch": epoch, "completed_epochs": len(report.rows),
                                 "reason": str(exc)}

    if write:
        write_report(os.path.join(out, "report.csv"), report.rows)
        _write_timing(os.path.join(out, "timing.csv"), report.seconds)
        if report.status == "ok":
            save_checkpoint(os.path.join(out, "checkpoint.json"), model,
                            {"stats": stats.to_dict(), "epoch": len(report.rows),
                             "config": cfg.to_dict()})
        else:
            with open(os.path.join(out, "divergence.json"), "w") as fh:
                json.dump(report.divergence, fh, indent=1)
                fh.write("\n")
        summary = {"status": report.status, "total_params": total, "taaf_added": added,
                   "epochs": len(report.rows),
                   "final_val_rmse": None if not report.rows else report.final_rmse,
                   "divergence": report.divergence, "config": cfg.to_dict()}
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
    return report


# --------------------------------------------------------------------------
# Benchmark matrix
# --------------------------------------------------------------------------


def epochs_to_target(rows: list[dict], target: float, key: str = "val_rmse") -> int | None:
    """First epoch whose ``key`` is at or below ``target``; None if never."""
    if not math.isfinite(target):
        return None
    for r in rows:
        if r[key] <= target:
            return int(r["epoch"])
    return None


def _run_cell(args) -> tuple[str, str, int, RunReport]:
    dataset, cell, seed, cfg = args
    return dataset, cell, seed, run_training(cfg, write=True)


def _median(values) -> float:
    vals = [v for v in values if math.isfinite(v)]
    return statistics.median(vals) if vals else math.nan


def _fmt_ett(v: float) -> str:
    return NOT_REACHED if not math.isfinite(v) else f"{v:g}"


def run_bench(bench: BenchConfig, out_dir: str | None = None) -> tuple[list[dict], list[dict]]:
    """Run every (dataset, cell, seed) and compare against the baseline.

    Returns ``(runs, table)``: one row per run and one aggregated row per
    (dataset, cell).  Both are also written as ``bench_runs.csv`` and
    ``bench_table.csv`` under ``out_dir``.
    """
    bench.validate()
    out_dir = out_dir or bench.run.out_dir
    os.makedirs(out_dir, exist_ok=True)
    jobs = []
    for dataset in bench.datasets:
        dname = os.path.splitext(os.path.basename(dataset))[0]
        for cell in bench.cells:
            for seed in bench.seeds:
                cell_dir = os.path.join(out_dir, dname, cell, f"seed{seed}")
                jobs.append((dataset, cell, seed, bench.cell_config(cell, dataset, seed, cell_dir)))
    if bench.workers > 1:
        with ProcessPoolExecutor(bench.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    reports = {(d, c, s): r for d, c, s, r in results}

    runs, table = [], []
    for dataset in bench.datasets:
        for cell in bench.cells:
            finals, times, etts = [], [], []
            statuses, added = [], 0
            for seed in bench.seeds:
                rep = reports[(dataset, cell, seed)]
                base = reports[(dataset, bench.baseline, seed)]
                final = rep.final_rmse if rep.status == "ok" else math.nan
                base_final = base.final_rmse if base.status == "ok" else math.nan
                if cell == bench.baseline:
                    # the reference row reports its own epoch budget
                    ett = len(rep.rows) if rep.status == "ok" else None
                else:
                    ett = epochs_to_target(rep.rows, base_final) if rep.status == "ok" else None
                spe = statistics.fmean(rep.seconds) if rep.seconds else math.nan
                finals.append(final)
                times.append(spe)
                etts.append(math.inf if ett is None else float(ett))
                statuses.append(rep.status)
                added = rep.taaf_added
                runs.append({
                    "dataset": dataset, "cell": cell, "seed": seed, "status": rep.status,
                    "epochs": len(rep.rows), "final_rmse": final,
                    "ratio_pct": 100.0 * (final / base_final),
                    "epochs_to_target": NOT_REACHED if ett is None else ett,
                    "s_per_epoch": spe, "taaf_added": rep.taaf_added,
                })
            base_finals = [reports[(dataset, bench.baseline, s)].final_rmse
                           if reports[(dataset, bench.baseline, s)].status == "ok" else math.nan
                           for s in bench.seeds]
            base_times = [statistics.fmean(reports[(dataset, bench.baseline, s)].seconds)
                          if reports[(dataset, bench.baseline, s)].seconds else math.nan
                          for s in bench.seeds]
            n_div = statuses.count("diverged")
            table.append({
                "dataset": dataset, "cell": cell, "taaf_added": added,
                "median_final_rmse": _median(finals),
                "ratio_pct": 100.0 * (_median(finals) / _median(base_finals)),
                "time_ratio_pct": 100.0 * (_median(times) / _median(base_times)),
                "epochs_to_target": _fmt_ett(statistics.median(etts)),
                "status": "ok" if n_div == 0 else f"diverged {n_div}/{len(statuses)}",
            })
    _write_rows(os.path.join(out_dir, "bench_runs.csv"), BENCH_RUNS_HEADER, runs)
    _write_rows(os.path.join(out_dir, "bench_table.csv"), BENCH_TABLE_HEADER, table)
    return runs, table


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[k]) if isinstance(r[k], float) else r[k] for k in header])


def format_table(rows: list[dict], header: list[str]) -> str:
    """Plain fixed-width rendering for terminals."""
    def cell(v):
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.6g}"
        return str(v)
    body = [[cell(r[k]) for k in header] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def load_run(out_dir: str):
    """Model, normalization stats and report of a finished run."""
    model, extra = load_checkpoint(os.path.join(out_dir, "checkpoint.json"))
    stats = _data.DatasetStats.from_dict(extra["stats"])
    return model, stats, read_report(os.path.join(out_dir, "report.csv"))
