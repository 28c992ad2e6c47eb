"""Command-line entry point: ``taafs {train,bench,params,curve,gen}``.

Exit codes: 0 on success, 1 for configuration or input errors, 2 when a
training run diverges.
"""

from __future__ import annotations

import argparse
import fnmatch
import os
import sys

from . import data as _data
from .config import ConfigError, load_bench_config, load_run_config
from .harness import (BENCH_RUNS_HEADER, BENCH_TABLE_HEADER, REPORT_HEADER, format_table,
                      run_bench, run_training)
from .net import Model, load_checkpoint, parameter_count
from .taaf import CURVE_HEADER, Granularity, export_curve, write_curves

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2

FILES_HELP = f"""\
output files (CSV, fixed headers):
  report.csv        {",".join(REPORT_HEADER)}
  timing.csv        epoch,seconds
  curves/*.csv      {",".join(CURVE_HEADER)}
  bench_runs.csv    {",".join(BENCH_RUNS_HEADER)}
  bench_table.csv   {",".join(BENCH_TABLE_HEADER)}
  dataset CSV       f0,...,fk,energy[,fx0,...]
"""


class CliError(Exception):
    pass


def _read_config_text(path: str | None) -> tuple[str, str]:
    if path is None:
        return "", "<defaults>"
    try:
        with open(path) as fh:
            return fh.read(), path
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _run_config(args):
    text, source = _read_config_text(args.config)
    overrides = list(args.set or [])
    if getattr(args, "out_dir", None):
        overrides.append(f"out_dir={args.out_dir}")
    return load_run_config(text, overrides, source)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    report = run_training(cfg)
    print(f"total_params={report.total_params} taaf_added={report.taaf_added}")
    if report.rows:
        last = report.rows[-1]
        print(f"epochs={len(report.rows)} train_rmse={last['train_rmse']:.6g} "
              f"val_rmse={last['val_rmse']:.6g}")
    if report.status == "diverged":
        print(f"diverged: {report.divergence['reason']} "
              f"(report in {os.path.join(cfg.out_dir, 'divergence.json')})", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"wrote {cfg.out_dir}")
    return EXIT_OK


def cmd_bench(args) -> int:
    text, source = _read_config_text(args.config)
    overrides = list(args.set or [])
    if args.out_dir:
        overrides.append(f"out_dir={args.out_dir}")
    bench = load_bench_config(text, overrides, source)
    runs, table = run_bench(bench)
    print(format_table(table, BENCH_TABLE_HEADER))
    print(f"wrote {os.path.join(bench.run.out_dir, 'bench_table.csv')}")
    return EXIT_OK


def params_table(cfg) -> list[dict]:
    """Parameter accounting for the fixed baseline and every scheme."""
    input_dim = input_dim_for(cfg)
    topo = cfg.parsed_topology(input_dim)
    base_total, _ = parameter_count(Model.build(topo, "tanh"))
    rows = [{"scheme": "fixed", "units": 0, "total": base_total, "taaf_added": 0,
             "ratio_pct": 100.0}]
    spec = cfg.basis_spec()
    for scheme in Granularity:
        model = Model.build(topo, "taaf", spec, scheme, cfg.normalizer, cfg.unit_bias)
        total, added = parameter_count(model)
        rows.append({"scheme": scheme.value, "units": len(model.units), "total": total,
                     "taaf_added": added, "ratio_pct": 100.0 * total / base_total})
    return rows


def input_dim_for(cfg) -> int:
    if cfg.dataset in _data.GENERATORS:
        return 4
    return _data.load_csv(cfg.dataset).n_features


def cmd_params(args) -> int:
    cfg = _run_config(args)
    rows = params_table(cfg)
    spec = cfg.basis_spec()
    print(f"topology {cfg.topology} (input_dim={input_dim_for(cfg)}); basis {spec.family} "
          f"degree={spec.degree} grid_count={spec.grid_count} -> {spec.basis_count} coefficients")
    print(format_table([dict(r, ratio_pct=f"{r['ratio_pct']:.2f}%") for r in rows],
                       ["scheme", "units", "total", "taaf_added", "ratio_pct"]))
    per_neuron = rows[-1]
    n_params = spec.basis_count + int(cfg.unit_bias)
    print(f"note: per_neuron gives each of the {per_neuron['units']} activated neurons a full "
          f"unit ({n_params} parameters each, +{per_neuron['taaf_added']}); a one-parameter-"
          f"per-neuron variant would add only +{per_neuron['units']}.")
    return EXIT_OK


def cmd_curve(args) -> int:
    try:
        model, extra = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load checkpoint {args.checkpoint}: {exc}") from None
    units = [u for u in model.units if fnmatch.fnmatchcase(u.unit_id, args.units)]
    if not units:
        available = ", ".join(u.unit_id for u in model.units) or "none"
        raise CliError(f"no unit matches {args.units!r} (available: {available})")
    if args.samples < 2:
        raise CliError("--samples must be >= 2")
    epoch = int(extra.get("epoch", 0))
    write_curves(args.out, [export_curve(u, args.samples, epoch) for u in units])
    print(f"wrote {len(units)} curve(s) to {args.out}")
    return EXIT_OK


def cmd_gen(args) -> int:
    gen = _data.GENERATORS[args.kind]
    r_range = list(_data.DEFAULT_R_RANGE[args.kind])
    if args.r_lo is not None:
        r_range[0] = args.r_lo
    if args.r_hi is not None:
        r_range[1] = args.r_hi
    try:
        ds = gen(args.n, tuple(r_range), args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _data.save_csv(ds, args.out)
    print(f"wrote {len(ds)} samples to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taafs", description="Trainable adaptive activation networks.",
        epilog=FILES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out-dir", help="shortcut for --set out_dir=...")
        return p

    kw = dict(epilog=FILES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    with_config(sub.add_parser("train", help="train one model", **kw)).set_defaults(func=cmd_train)
    with_config(sub.add_parser("bench", help="run the activation comparison matrix", **kw)
                ).set_defaults(func=cmd_bench)
    with_config(sub.add_parser("params", help="parameter accounting per scheme")
                ).set_defaults(func=cmd_params)

    p = sub.add_parser("curve", help="export activation curves from a checkpoint", **kw)
    p.add_argument("checkpoint")
    p.add_argument("--units", default="*", help="glob over unit ids (default: all)")
    p.add_argument("--samples", type=int, default=121)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("gen", help="generate a synthetic dataset CSV", **kw)
    p.add_argument("--kind", choices=sorted(_data.GENERATORS), default="lj")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--r-lo", type=float)
    p.add_argument("--r-hi", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CliError, _data.DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
