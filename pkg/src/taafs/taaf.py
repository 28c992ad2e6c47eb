"""Trainable adaptive activation units.

A unit squashes its pre-activation with a normalizer, expands the result in a
basis, and returns the coefficient-weighted sum plus an optional bias::

    a = normalizer(z)
    y = theta . basis(a) + bias

Units are shared between neurons according to a :class:`Granularity` scheme;
a shared unit simply receives the sum of all gradient contributions.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from . import basis as _basis
from .basis import BasisSpec

PROBE_RANGE = (-3.0, 3.0)
INIT_SAMPLES = 64


class Normalizer(str, enum.Enum):
    TANH = "tanh"
    IDENTITY = "identity"

    def __str__(self) -> str:
        return self.value


class Granularity(str, enum.Enum):
    GLOBAL = "global"
    PER_NETWORK = "per_network"
    PER_LAYER = "per_layer"
    PER_NEURON = "per_neuron"

    def __str__(self) -> str:
        return self.value


def _normalize(kind: Normalizer, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if kind is Normalizer.TANH:
        a = np.tanh(z)
        return a, 1.0 - a * a
    return z, np.ones_like(z)


def _inverse_normalize(kind: Normalizer, a: np.ndarray) -> np.ndarray:
    if kind is Normalizer.TANH:
        return np.arctanh(a)
    return a


@dataclass
class TaafCache:
    z: np.ndarray
    a: np.ndarray
    values: np.ndarray
    dvalues: np.ndarray
    dnorm: np.ndarray


@dataclass(eq=False)
class TaafUnit:
    """One trainable activation.

    ``bias`` is stored as a 0-d array so optimizers can update it in place.
    When ``use_bias`` is False the bias stays at zero and is not a trainable.
    """

    spec: BasisSpec
    theta: np.ndarray
    bias: np.ndarray = field(default_factory=lambda: np.zeros(()))
    normalizer: Normalizer = Normalizer.TANH
    use_bias: bool = False
    unit_id: str = "unit"

    def __post_init__(self):
        self.normalizer = Normalizer(self.normalizer)
        self.theta = np.asarray(self.theta, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float).reshape(())
        if self.theta.shape != (self.spec.basis_count,):
            raise ValueError(
                f"theta has shape {self.theta.shape}, expected ({self.spec.basis_count},)"
            )

    @classmethod
    def initialized(cls, spec: BasisSpec, normalizer=Normalizer.TANH, use_bias=False,
                    unit_id="unit") -> "TaafUnit":
        """A unit whose output approximates ``tanh(z)``.

        Coefficients are the least-squares fit over 64 equispaced points of
        the normalized range [-1, 1]; the bias starts at zero.
        """
        normalizer = Normalizer(normalizer)
        a = np.linspace(-1.0, 1.0, INIT_SAMPLES)
        # keep arctanh finite at the endpoints
        a_src = np.clip(a, -1 + 1e-12, 1 - 1e-12) if normalizer is Normalizer.TANH else a
        target = np.tanh(_inverse_normalize(normalizer, a_src))
        A = _basis.evaluate(spec, a)
        theta = np.linalg.lstsq(A, target, rcond=None)[0]
        return cls(spec, theta, normalizer=normalizer, use_bias=use_bias, unit_id=unit_id)

    @property
    def n_params(self) -> int:
        return self.spec.basis_count + int(self.use_bias)

    def parameters(self) -> list[np.ndarray]:
        return [self.theta, self.bias] if self.use_bias else [self.theta]

    def copy(self) -> "TaafUnit":
        return TaafUnit(self.spec, self.theta.copy(), self.bias.copy(), self.normalizer,
                        self.use_bias, self.unit_id)

    def forward(self, z) -> tuple[np.ndarray, TaafCache]:
        return taaf_forward(self, z)

    def backward(self, cache: TaafCache, upstream):
        return taaf_backward(self, cache, upstream)

    def __call__(self, z) -> np.ndarray:
        a, _ = _normalize(self.normalizer, np.asarray(z, dtype=float))
        return _basis.evaluate(self.spec, a) @ self.theta + self.bias


def taaf_forward(unit: TaafUnit, z) -> tuple[np.ndarray, TaafCache]:
    """Apply ``unit`` elementwise to ``z`` (scalar or array)."""
    z = np.asarray(z, dtype=float)
    a, dnorm = _normalize(unit.normalizer, z)
    values, dvalues = _basis.evaluate_with_derivative(unit.spec, a)
    y = values @ unit.theta + unit.bias
    return y, TaafCache(z, a, values, dvalues, dnorm)


def taaf_backward(unit: TaafUnit, cache: TaafCache, upstream):
    """Gradients of ``sum(upstream * y)``.

    Returns ``(dz, dtheta, dbias)``.  ``dtheta`` and ``dbias`` are summed over
    every element the unit was applied to; ``dbias`` is 0 for bias-free units.
    """
    g = np.broadcast_to(np.asarray(upstream, dtype=float), cache.z.shape)
    dz = g * (cache.dvalues @ unit.theta) * cache.dnorm
    dtheta = np.tensordot(g, cache.values, axes=g.ndim)
    dbias = float(g.sum()) if unit.use_bias else 0.0
    return dz, dtheta, dbias


# --------------------------------------------------------------------------
# Granularity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerShape:
    network: str
    index: int
    width: int
    activated: bool


def instantiate_units(scheme, layers, spec: BasisSpec, normalizer=Normalizer.TANH,
                      use_bias=False):
    """Create units for ``layers`` and bind every activated neuron to one.

    Parameters
    ----------
    scheme : Granularity or str
    layers : sequence of LayerShape
        All layers of the model in execution order.

    Returns
    -------
    units : list of TaafUnit
        Distinct units, each created by :meth:`TaafUnit.initialized`.
    binding : list
        One entry per layer: ``None`` for unactivated layers, otherwise an
        integer array mapping each neuron to its index in ``units``.
    """
    scheme = Granularity(scheme)
    layers = list(layers)
    if not layers:
        raise ValueError("topology is empty")
    units: list[TaafUnit] = []
    keys: dict[str, int] = {}

    def unit_for(key: str) -> int:
        if key not in keys:
            keys[key] = len(units)
            units.append(TaafUnit.initialized(spec, normalizer, use_bias, unit_id=key))
        return keys[key]

    binding = []
    for layer in layers:
        if not layer.activated:
            binding.append(None)
            continue
        layer_key = f"{layer.network}.L{layer.index}"
        if scheme is Granularity.GLOBAL:
            ids = np.full(layer.width, unit_for("global"))
        elif scheme is Granularity.PER_NETWORK:
            ids = np.full(layer.width, unit_for(layer.network))
        elif scheme is Granularity.PER_LAYER:
            ids = np.full(layer.width, unit_for(layer_key))
        else:
            ids = np.array([unit_for(f"{layer_key}.n{j}") for j in range(layer.width)])
        binding.append(ids)
    return units, binding


# --------------------------------------------------------------------------
# Curves
# --------------------------------------------------------------------------

CURVE_HEADER = ["x", "y", "epoch", "unit_id"]


@dataclass
class ActivationCurve:
    xs: np.ndarray
    ys: np.ndarray
    epoch: int
    unit_id: str

    def __eq__(self, other):
        if not isinstance(other, ActivationCurve):
            return NotImplemented
        return (self.epoch == other.epoch and self.unit_id == other.unit_id
                and np.array_equal(self.xs, other.xs) and np.array_equal(self.ys, other.ys))


def export_curve(unit: TaafUnit, n_samples: int = 201, epoch: int = 0) -> ActivationCurve:
    """Sample ``unit`` on the pre-normalization probe range [-3, 3]."""
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    xs = np.linspace(*PROBE_RANGE, n_samples)
    return ActivationCurve(xs, unit(xs), int(epoch), unit.unit_id)


def write_curves(path, curves) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_HEADER)
        for c in curves:
            for x, y in zip(c.xs, c.ys):
                w.writerow([f"{x:.17g}", f"{y:.17g}", c.epoch, c.unit_id])


def read_curves(path) -> list[ActivationCurve]:
    """Read a curve CSV back, one curve per (epoch, unit_id) in file order."""
    groups: dict[tuple[int, str], tuple[list, list]] = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != CURVE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CURVE_HEADER)}, got {header}")
        for row in r:
            xs, ys = groups.setdefault((int(row[2]), row[3]), ([], []))
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    return [ActivationCurve(np.array(xs), np.array(ys), e, u) for (e, u), (xs, ys) in groups.items()]
