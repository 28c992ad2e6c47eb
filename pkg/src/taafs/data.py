"""Synthetic pair-potential datasets, standardization and CSV storage.

Generated samples describe one pair distance ``r`` with the descriptor
``[r, 1/r, 1/r**6, 1/r**12]``.  Energies come from the analytic potential
and forces are ``-dE/dr``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

LJ_EPSILON = 1.0
LJ_SIGMA = 1.0
MORSE_D = 1.0
MORSE_A = 1.5
MORSE_RE = 1.2
R_BOUNDS = (0.8, 3.0)


class DatasetError(ValueError):
    """Malformed dataset input."""


@dataclass
class Dataset:
    features: np.ndarray
    energy: np.ndarray
    forces: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.energy = np.asarray(self.energy, dtype=float)
        if self.features.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {self.features.shape}")
        if self.energy.shape != (len(self.features),):
            raise DatasetError(
                f"{len(self.features)} feature rows but energy has shape {self.energy.shape}"
            )
        if not np.all(np.isfinite(self.energy)):
            raise DatasetError("energies must be finite")
        if self.forces is not None:
            self.forces = np.asarray(self.forces, dtype=float).reshape(len(self.features), -1)

    def __len__(self) -> int:
        return len(self.energy)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.energy[idx],
                       None if self.forces is None else self.forces[idx])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.forces is None) != (other.forces is None):
            return False
        return (np.array_equal(self.features, other.features)
                and np.array_equal(self.energy, other.energy)
                and (self.forces is None or np.array_equal(self.forces, other.forces)))


# --------------------------------------------------------------------------
# Analytic potentials
# --------------------------------------------------------------------------


def lj_energy(r, epsilon=LJ_EPSILON, sigma=LJ_SIGMA):
    sr6 = (sigma / np.asarray(r, dtype=float)) ** 6
    return 4.0 * epsilon * (sr6 * sr6 - sr6)


def lj_force(r, epsilon=LJ_EPSILON, sigma=LJ_SIGMA):
    """``-dE/dr`` for Lennard-Jones."""
    r = np.asarray(r, dtype=float)
    sr6 = (sigma / r) ** 6
    return 24.0 * epsilon * (2.0 * sr6 * sr6 - sr6) / r


def morse_energy(r, D=MORSE_D, a=MORSE_A, r_e=MORSE_RE):
    e = np.exp(-a * (np.asarray(r, dtype=float) - r_e))
    return D * (1.0 - e) ** 2 - D


def morse_force(r, D=MORSE_D, a=MORSE_A, r_e=MORSE_RE):
    """``-dE/dr`` for Morse."""
    e = np.exp(-a * (np.asarray(r, dtype=float) - r_e))
    return -2.0 * D * a * (1.0 - e) * e


def pair_features(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    inv = 1.0 / r
    inv6 = inv**6
    return np.stack([r, inv, inv6, inv6 * inv6], axis=-1)


def pair_feature_jacobian(r) -> np.ndarray:
    """``d(features)/dr``, shape ``r.shape + (4,)``."""
    r = np.asarray(r, dtype=float)
    return np.stack([np.ones_like(r), -(r**-2), -6.0 * r**-7, -12.0 * r**-13], axis=-1)


def is_pair_descriptor(features: np.ndarray) -> bool:
    """True when the columns are exactly the pair descriptor of column 0."""
    f = np.asarray(features, dtype=float)
    if f.ndim != 2 or f.shape[1] != 4 or np.any(f[:, 0] <= 0):
        return False
    return bool(np.allclose(pair_features(f[:, 0]), f, rtol=1e-12, atol=0.0))


def _check_range(r_range) -> tuple[float, float]:
    lo, hi = map(float, r_range)
    if lo <= 0:
        raise ValueError(f"pair distances must be positive, got range {r_range}")
    if not lo < hi:
        raise ValueError(f"empty distance range {r_range}")
    if lo < R_BOUNDS[0] or hi > R_BOUNDS[1]:
        raise ValueError(f"distance range {r_range} must lie within {R_BOUNDS}")
    return lo, hi


def _generate(n, r_range, seed, energy_fn, force_fn) -> Dataset:
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    lo, hi = _check_range(r_range)
    r = np.random.default_rng(seed).uniform(lo, hi, size=n)
    return Dataset(pair_features(r), energy_fn(r), force_fn(r)[:, None])


def gen_lennard_jones(n: int, r_range=(0.95, 2.5), seed: int = 0) -> Dataset:
    """Lennard-Jones pairs with ``epsilon = sigma = 1``."""
    return _generate(n, r_range, seed, lj_energy, lj_force)


def gen_morse(n: int, r_range=(0.8, 3.0), seed: int = 0) -> Dataset:
    """Morse pairs with ``D = 1``, ``a = 1.5``, ``r_e = 1.2``."""
    return _generate(n, r_range, seed, morse_energy, morse_force)


GENERATORS = {"lj": gen_lennard_jones, "morse": gen_morse}
DEFAULT_R_RANGE = {"lj": (0.95, 2.5), "morse": (0.8, 3.0)}


# --------------------------------------------------------------------------
# Standardization
# --------------------------------------------------------------------------


@dataclass
class DatasetStats:
    """Per-feature and energy mean/std (population convention, ``ddof=0``).

    ``kept`` marks the features retained after dropping constant columns.
    """

    feature_mean: np.ndarray
    feature_std: np.ndarray
    kept: np.ndarray
    energy_mean: float
    energy_std: float
    convention: str = "population"

    def to_dict(self) -> dict:
        return {
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "kept": self.kept.tolist(),
            "energy_mean": self.energy_mean,
            "energy_std": self.energy_std,
            "convention": self.convention,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetStats":
        return cls(np.array(d["feature_mean"], dtype=float), np.array(d["feature_std"], dtype=float),
                   np.array(d["kept"], dtype=bool), float(d["energy_mean"]),
                   float(d["energy_std"]), d.get("convention", "population"))

    def transform_features(self, features) -> np.ndarray:
        f = np.asarray(features, dtype=float)[..., self.kept]
        return (f - self.feature_mean) / self.feature_std

    def transform_energy(self, energy) -> np.ndarray:
        return (np.asarray(energy, dtype=float) - self.energy_mean) / self.energy_std

    def inverse_energy(self, energy) -> np.ndarray:
        return np.asarray(energy, dtype=float) * self.energy_std + self.energy_mean


def compute_stats(ds: Dataset) -> DatasetStats:
    if len(ds) == 0:
        raise DatasetError("cannot standardize an empty dataset")
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    kept = std > 0
    e_std = float(ds.energy.std())
    if e_std == 0:
        raise DatasetError("energy column is constant")
    return DatasetStats(mean[kept], std[kept], kept, float(ds.energy.mean()), e_std)


def normalize(ds: Dataset, stats: DatasetStats | None = None) -> tuple[Dataset, DatasetStats]:
    """Standardize features and energies; forces scale with the energy only."""
    stats = compute_stats(ds) if stats is None else stats
    forces = None if ds.forces is None else ds.forces / stats.energy_std
    return Dataset(stats.transform_features(ds.features), stats.transform_energy(ds.energy),
                   forces), stats


def denormalize(ds: Dataset, stats: DatasetStats) -> Dataset:
    """Invert :func:`normalize`.  Dropped constant features come back from
    their stored means only if ``stats`` kept every column."""
    if not stats.kept.all():
        raise DatasetError("cannot restore dropped constant features")
    forces = None if ds.forces is None else ds.forces * stats.energy_std
    return Dataset(ds.features * stats.feature_std + stats.feature_mean,
                   stats.inverse_energy(ds.energy), forces)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def save_csv(ds: Dataset, path) -> None:
    """Write ``f0..fk,energy[,fx0..]`` rows at 17 significant digits."""
    header = [f"f{i}" for i in range(ds.n_features)] + ["energy"]
    if ds.forces is not None:
        header += [f"fx{i}" for i in range(ds.forces.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(ds)):
            row = list(ds.features[i]) + [ds.energy[i]]
            if ds.forces is not None:
                row += list(ds.forces[i])
            w.writerow([_fmt(v) for v in row])


def _parse_header(path, header) -> tuple[int, int]:
    if not header:
        raise DatasetError(f"{path}: missing header row")
    if "energy" not in header:
        raise DatasetError(f"{path}: header has no 'energy' column: {','.join(header)}")
    k = header.index("energy")
    expect = [f"f{i}" for i in range(k)] + ["energy"]
    expect += [f"fx{i}" for i in range(len(header) - k - 1)]
    if header != expect or k == 0:
        raise DatasetError(f"{path}: expected header {','.join(expect)}, got {','.join(header)}")
    return k, len(header) - k - 1


def load_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_csv`.

    Errors name the file and the 1-based line number of the offending row.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: file is empty")
    n_feat, n_force = _parse_header(path, rows[0])
    width = n_feat + 1 + n_force
    values = []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise DatasetError(f"{path}: line {line} has {len(row)} cells, expected {width}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise DatasetError(f"{path}: line {line} has a non-numeric cell: {row}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DatasetError(f"{path}: line {line} (row {len(values)}) has a non-finite value")
        values.append(vals)
    if not values:
        raise DatasetError(f"{path}: no data rows")
    arr = np.array(values)
    forces = arr[:, n_feat + 1 :] if n_force else None
    return Dataset(arr[:, :n_feat], arr[:, n_feat], forces)
