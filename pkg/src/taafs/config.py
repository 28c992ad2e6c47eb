"""Run configuration in a flat ``key = value`` text format.

Blank lines and ``#`` comments are ignored.  Keys are strict: an unknown key,
a repeated key or a value that does not parse is a :class:`ConfigError`.
The value ``auto`` selects the family default for ``degree``,
``grid_count`` and ``domain_lo``/``domain_hi``, the generator default for
``r_lo``/``r_hi``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from typing import Optional

from .basis import BasisSpec, Family, default_spec
from .data import DEFAULT_R_RANGE, GENERATORS
from .net import DP_TOPOLOGY, FIXED_ACTIVATIONS, TAAF, Topology
from .taaf import Granularity, Normalizer


class ConfigError(ValueError):
    """Invalid configuration."""


@dataclass
class RunConfig:
    # model
    topology: str = DP_TOPOLOGY
    activation: str = TAAF
    basis: str = "bspline"
    degree: Optional[int] = None
    grid_count: Optional[int] = None
    domain_lo: Optional[float] = None
    domain_hi: Optional[float] = None
    jacobi_alpha: float = 0.0
    jacobi_beta: float = 0.0
    normalizer: str = "tanh"
    unit_bias: bool = False
    scheme: str = "per_layer"
    # optimizer and schedule
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 0.5
    lr_patience: int = 5
    lr_floor: float = 1e-7
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    # data
    dataset: str = "lj"
    n_samples: int = 2000
    r_lo: Optional[float] = None
    r_hi: Optional[float] = None
    data_seed: int = 0
    val_fraction: float = 0.1
    # output
    out_dir: str = "runs/default"
    curves: bool = True
    curve_samples: int = 121

    def basis_spec(self) -> BasisSpec:
        overrides = dict(jacobi_alpha=self.jacobi_alpha, jacobi_beta=self.jacobi_beta)
        for key in ("degree", "grid_count", "domain_lo", "domain_hi"):
            if getattr(self, key) is not None:
                overrides[key] = getattr(self, key)
        return default_spec(self.basis, **overrides)

    def parsed_topology(self, input_dim: int) -> Topology:
        return Topology.parse(self.topology, input_dim)

    def r_range(self) -> tuple | None:
        if self.r_lo is None and self.r_hi is None:
            return None
        default = DEFAULT_R_RANGE.get(self.dataset, (None, None))
        return (default[0] if self.r_lo is None else self.r_lo,
                default[1] if self.r_hi is None else self.r_hi)

    def validate(self) -> "RunConfig":
        try:
            if self.activation not in FIXED_ACTIVATIONS + (TAAF,):
                raise ConfigError(f"activation must be one of {FIXED_ACTIVATIONS + (TAAF,)}, "
                                  f"got {self.activation!r}")
            Family(self.basis)
            Granularity(self.scheme)
            Normalizer(self.normalizer)
            self.basis_spec()
            self.parsed_topology(1)
            if self.dataset not in GENERATORS and not os.path.isfile(self.dataset):
                raise ConfigError(f"dataset must be one of {sorted(GENERATORS)} or an existing "
                                  f"CSV path, got {self.dataset!r}")
            if self.r_range() is not None and self.dataset not in GENERATORS:
                raise ConfigError("r_lo/r_hi only apply to generated datasets")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (self.lr > 0, "lr must be positive"),
            (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "beta1/beta2 must lie in [0, 1)"),
            (self.eps > 0, "eps must be positive"),
            (0 < self.lr_decay < 1, "lr_decay must lie in (0, 1)"),
            (self.lr_patience >= 1, "lr_patience must be >= 1"),
            (self.lr_floor > 0, "lr_floor must be positive"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.n_samples >= 2, "n_samples must be >= 2"),
            (0 < self.val_fraction < 1, "val_fraction must lie in (0, 1)"),
            (self.curve_samples >= 2, "curve_samples must be >= 2"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def format(self) -> str:
        return "".join(f"{k} = {_format_value(v)}\n" for k, v in self.to_dict().items())


@dataclass
class BenchConfig:
    """A base run plus the matrix axes.

    ``cells`` are fixed activation tags or basis family names; a family name
    means a TAAF run with that family's default spec.
    """

    run: RunConfig = field(default_factory=RunConfig)
    cells: list = field(default_factory=lambda: ["tanh", "bspline", "chebyshev1", "fourier"])
    baseline: str = "tanh"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    datasets: list = field(default_factory=lambda: ["lj", "morse"])
    workers: int = 1

    def validate(self) -> "BenchConfig":
        self.run.validate()
        if not self.cells:
            raise ConfigError("cells is empty")
        if len(set(self.cells)) != len(self.cells):
            raise ConfigError(f"duplicate cells in {self.cells}")
        for c in self.cells:
            if c not in FIXED_ACTIVATIONS and c not in {f.value for f in Family}:
                raise ConfigError(f"unknown cell {c!r}")
        if self.baseline not in self.cells:
            raise ConfigError(f"baseline {self.baseline!r} is not among the cells {self.cells}")
        if self.baseline not in FIXED_ACTIVATIONS:
            raise ConfigError(f"baseline must be a fixed activation, got {self.baseline!r}")
        if not self.seeds or not self.datasets:
            raise ConfigError("seeds and datasets must be non-empty")
        for d in self.datasets:
            if d not in GENERATORS and not os.path.isfile(d):
                raise ConfigError(f"unknown dataset {d!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def cell_config(self, cell: str, dataset: str, seed: int, out_dir: str) -> RunConfig:
        cfg = dataclasses.replace(self.run, dataset=dataset, seed=seed, out_dir=out_dir)
        if cell in FIXED_ACTIVATIONS:
            return dataclasses.replace(cfg, activation=cell)
        if cell != cfg.basis:
            # family defaults, not the base run's degree/grid
            cfg = dataclasses.replace(cfg, basis=cell, degree=None, grid_count=None,
                                      domain_lo=None, domain_hi=None)
        return dataclasses.replace(cfg, activation=TAAF)


_BENCH_KEYS = {"cells": str, "baseline": str, "seeds": int, "datasets": str, "workers": int}


def _format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(map(str, v))
    return str(v)


def _convert(key: str, raw: str, typ):
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        if typ in ("Optional[int]", "Optional[float]"):
            if raw.lower() == "auto":
                return None
            return int(raw) if typ == "Optional[int]" else float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None


def parse_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _apply(pairs: dict[str, str], bench: bool):
    types = {f.name: f.type for f in fields(RunConfig)}
    run_kwargs, bench_kwargs = {}, {}
    for key, raw in pairs.items():
        if key in types:
            run_kwargs[key] = _convert(key, raw, types[key])
        elif bench and key in _BENCH_KEYS:
            typ = _BENCH_KEYS[key]
            if key in ("cells", "seeds", "datasets"):
                bench_kwargs[key] = [_convert(key, p.strip(), typ)
                                     for p in raw.split(",") if p.strip()]
            else:
                bench_kwargs[key] = _convert(key, raw, typ)
        else:
            raise ConfigError(f"unknown key {key!r}")
    run = RunConfig(**run_kwargs)
    if bench:
        return BenchConfig(run=run, **bench_kwargs)
    return run


def load_run_config(text: str = "", overrides=(), source: str = "<config>") -> RunConfig:
    """Parse and validate a run config.

    ``overrides`` are ``key=value`` strings applied in order after the text,
    so a later override replaces an earlier one.
    """
    pairs = parse_pairs(text, source)
    for item in overrides:
        pairs.update(parse_pairs(item, "<override>"))
    return _apply(pairs, bench=False).validate()


def load_bench_config(text: str = "", overrides=(), source: str = "<config>") -> BenchConfig:
    pairs = parse_pairs(text, source)
    for item in overrides:
        pairs.update(parse_pairs(item, "<override>"))
    return _apply(pairs, bench=True).validate()
