"""Dense feed-forward networks with fixed or trainable activations.

A :class:`Model` is a chain of named sub-networks (for example an embedding
network feeding a fitting network).  All layers share one flat execution
order; each layer holds its weights and either a fixed activation tag or a
binding of its neurons to :class:`~taafs.taaf.TaafUnit` objects.

Forward and backward passes are vectorized over a batch of samples, and the
backward pass returns gradients summed over the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec
from .taaf import Granularity, LayerShape, Normalizer, TaafUnit, instantiate_units

LRELU_ALPHA = 0.01
FIXED_ACTIVATIONS = ("tanh", "sigmoid", "relu", "lrelu", "silu", "none")
TAAF = "taaf"
CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# Fixed activations
# --------------------------------------------------------------------------


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fixed_activation(tag: str, z) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative of a fixed activation at ``z``."""
    z = np.asarray(z, dtype=float)
    if tag == "tanh":
        y = np.tanh(z)
        return y, 1.0 - y * y
    if tag == "sigmoid":
        s = _sigmoid(np.atleast_1d(z)).reshape(z.shape)
        return s, s * (1.0 - s)
    if tag == "relu":
        return np.maximum(z, 0.0), (z > 0).astype(float)
    if tag == "lrelu":
        return np.maximum(LRELU_ALPHA * z, z), np.where(z > 0, 1.0, LRELU_ALPHA)
    if tag == "silu":
        s = _sigmoid(np.atleast_1d(z)).reshape(z.shape)
        return z * s, s * (1.0 + z * (1.0 - s))
    if tag == "none":
        return z, np.ones_like(z)
    raise ValueError(f"unknown activation {tag!r}; expected one of {FIXED_ACTIVATIONS}")


# --------------------------------------------------------------------------
# Topology
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Layer widths per sub-network, executed in order.

    ``activated`` optionally lists, per sub-network, which layers carry an
    activation.  By default every layer is activated except the last layer
    of the last sub-network (the regression head).
    """

    input_dim: int
    networks: tuple[tuple[str, tuple[int, ...]], ...]
    activated: tuple[tuple[bool, ...], ...] | None = None

    def __post_init__(self):
        nets = tuple((str(name), tuple(int(w) for w in widths)) for name, widths in self.networks)
        object.__setattr__(self, "networks", nets)
        if not nets or not any(w for _, w in nets):
            raise ValueError("topology is empty")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        names = [n for n, _ in nets]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate sub-network names in {names}")
        for name, widths in nets:
            if not widths or min(widths) < 1:
                raise ValueError(f"sub-network {name!r} needs positive widths, got {widths}")
        if nets[-1][1][-1] != 1:
            raise ValueError("the last layer must have width 1 (scalar energy)")
        if self.activated is None:
            flags = [[True] * len(w) for _, w in nets]
            flags[-1][-1] = False
            object.__setattr__(self, "activated", tuple(tuple(f) for f in flags))
        else:
            flags = tuple(tuple(bool(f) for f in fl) for fl in self.activated)
            if [len(f) for f in flags] != [len(w) for _, w in nets]:
                raise ValueError("activated flags must mirror the layer widths")
            object.__setattr__(self, "activated", flags)

    @classmethod
    def parse(cls, text: str, input_dim: int) -> "Topology":
        """Parse ``"embedding:25,25,25;fitting:50,50,50,1"``."""
        nets = []
        for i, part in enumerate(p.strip() for p in text.split(";") if p.strip()):
            name, _, widths = part.rpartition(":")
            nets.append((name.strip() or f"net{i}", tuple(int(w) for w in widths.split(","))))
        return cls(input_dim, tuple(nets))

    def format(self) -> str:
        return ";".join(f"{n}:{','.join(map(str, w))}" for n, w in self.networks)

    def layer_shapes(self) -> list[LayerShape]:
        return [
            LayerShape(name, i, width, self.activated[k][i])
            for k, (name, widths) in enumerate(self.networks)
            for i, width in enumerate(widths)
        ]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "networks": [[n, list(w)] for n, w in self.networks],
            "activated": [list(f) for f in self.activated],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(d["input_dim"], tuple((n, tuple(w)) for n, w in d["networks"]),
                   tuple(tuple(f) for f in d["activated"]))


DP_TOPOLOGY = "embedding:25,25,25;fitting:50,50,50,1"


# --------------------------------------------------------------------------
# Layers and model
# --------------------------------------------------------------------------


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray
    activation: str
    unit_ids: np.ndarray | None = None
    network: str = ""
    index: int = 0
    groups: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        out, _ = self.weights.shape
        if self.biases.shape != (out,):
            raise ValueError(f"bias shape {self.biases.shape} does not match {out} outputs")
        if self.activation == TAAF:
            if self.unit_ids is None or len(self.unit_ids) != out:
                raise ValueError("a TAAF layer needs one unit id per neuron")
            self.groups = _group_columns(self.unit_ids)
        elif self.activation not in FIXED_ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


def _group_columns(unit_ids: np.ndarray) -> list[tuple[int, object]]:
    uniq = np.unique(unit_ids)
    if len(uniq) == 1:
        return [(int(uniq[0]), slice(None))]
    return [(int(u), np.flatnonzero(unit_ids == u)) for u in uniq]


@dataclass
class GradientBundle:
    """Gradients mirroring a model: per-layer ``dW``/``db``, per-unit
    ``dtheta``/``dbias`` and the input gradient ``dx``."""

    dW: list[np.ndarray]
    db: list[np.ndarray]
    dtheta: list[np.ndarray]
    dbias: list[np.ndarray]
    dx: np.ndarray | None = None

    @classmethod
    def zeros_like(cls, model: "Model") -> "GradientBundle":
        return cls(
            [np.zeros_like(l.weights) for l in model.layers],
            [np.zeros_like(l.biases) for l in model.layers],
            [np.zeros_like(u.theta) for u in model.units],
            [np.zeros(()) for _ in model.units],
        )

    def arrays(self, model: "Model") -> list[np.ndarray]:
        """Gradients in the same order as :meth:`Model.parameters`."""
        out = []
        for dW, db in zip(self.dW, self.db):
            out += [dW, db]
        for u, dt, dbias in zip(model.units, self.dtheta, self.dbias):
            out += [dt, dbias] if u.use_bias else [dt]
        return out

    def __iadd__(self, other: "GradientBundle"):
        for mine, theirs in ((self.dW, other.dW), (self.db, other.db),
                             (self.dtheta, other.dtheta), (self.dbias, other.dbias)):
            for a, b in zip(mine, theirs):
                a += b
        if other.dx is not None:
            self.dx = other.dx if self.dx is None else np.concatenate([self.dx, other.dx])
        return self


class Model:
    """Chain of dense sub-networks with per-layer activations.

    Build models with :meth:`Model.build`; construct directly only when you
    already have layers and units.
    """

    def __init__(self, topology: Topology, layers: list[DenseLayer], units: list[TaafUnit],
                 activation: str = "tanh", scheme: Granularity | None = None,
                 spec: BasisSpec | None = None):
        self.topology = topology
        self.layers = layers
        self.units = units
        self.activation = activation
        self.scheme = Granularity(scheme) if scheme is not None else None
        self.spec = spec
        fan_in = topology.input_dim
        for layer in layers:
            if layer.weights.shape[1] != fan_in:
                raise ValueError(
                    f"layer {layer.network}.L{layer.index} expects {layer.weights.shape[1]} "
                    f"inputs but receives {fan_in}"
                )
            fan_in = layer.weights.shape[0]
            if layer.unit_ids is not None and layer.unit_ids.max() >= len(units):
                raise ValueError("unit binding refers to a missing unit")

    @classmethod
    def build(cls, topology: Topology, activation: str = "tanh", spec: BasisSpec | None = None,
              scheme: Granularity | str = Granularity.PER_LAYER,
              normalizer: Normalizer | str = Normalizer.TANH, use_bias: bool = False,
              rng: np.random.Generator | int | None = 0) -> "Model":
        """Glorot-uniform weights, zero biases, units initialized near tanh.

        ``activation`` is a fixed tag or ``"taaf"``; ``spec``/``scheme`` only
        matter for ``"taaf"``.
        """
        rng = np.random.default_rng(rng)
        shapes = topology.layer_shapes()
        if activation == TAAF:
            spec = spec if spec is not None else BasisSpec()
            scheme = Granularity(scheme)
            units, binding = instantiate_units(scheme, shapes, spec, normalizer, use_bias)
        elif activation in FIXED_ACTIVATIONS:
            units, binding, spec, scheme = [], [None] * len(shapes), None, None
        else:
            raise ValueError(f"unknown activation {activation!r}")
        layers = []
        fan_in = topology.input_dim
        for shape, ids in zip(shapes, binding):
            limit = np.sqrt(6.0 / (fan_in + shape.width))
            W = rng.uniform(-limit, limit, size=(shape.width, fan_in))
            if not shape.activated:
                act = "none"
            elif activation == TAAF:
                act = TAAF
            else:
                act = activation
            layers.append(DenseLayer(W, np.zeros(shape.width), act, ids, shape.network, shape.index))
            fan_in = shape.width
        return cls(topology, layers, units, activation, scheme, spec)

    # -- parameters -------------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        """Every trainable array, in a fixed order; updates must be in place."""
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.biases]
        for u in self.units:
            out += u.parameters()
        return out

    def dense_parameter_count(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)

    def copy(self) -> "Model":
        layers = [DenseLayer(l.weights.copy(), l.biases.copy(), l.activation,
                             None if l.unit_ids is None else l.unit_ids.copy(), l.network, l.index)
                  for l in self.layers]
        return Model(self.topology, layers, [u.copy() for u in self.units], self.activation,
                     self.scheme, self.spec)

    # -- passes -----------------------------------------------------------

    def forward(self, x):
        return forward(self, x)

    def backward(self, caches, upstream=1.0):
        return backward(self, caches, upstream)

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class _LayerCache:
    inputs: np.ndarray
    dact: np.ndarray | None = None
    unit_caches: list = field(default_factory=list)


@dataclass
class ForwardCache:
    layers: list[_LayerCache]
    batched: bool


def forward(model: Model, x) -> tuple[np.ndarray | float, ForwardCache]:
    """Energies for one feature vector (returns a float) or a batch
    ``(n, input_dim)`` (returns shape ``(n,)``)."""
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    h = x if batched else x[None, :]
    if h.shape[1] != model.topology.input_dim:
        raise ValueError(f"expected {model.topology.input_dim} features, got {h.shape[1]}")
    caches = []
    for layer in model.layers:
        lc = _LayerCache(h)
        z = h @ layer.weights.T + layer.biases
        if layer.activation == TAAF:
            h = np.empty_like(z)
            for uid, cols in layer.groups:
                y, uc = model.units[uid].forward(z[:, cols])
                h[:, cols] = y
                lc.unit_caches.append((uid, cols, uc))
        elif layer.activation == "none":
            h = z
        else:
            h, lc.dact = fixed_activation(layer.activation, z)
        caches.append(lc)
    energy = h[:, 0]
    return (energy if batched else float(energy[0])), ForwardCache(caches, batched)


def backward(model: Model, caches: ForwardCache, upstream=1.0) -> GradientBundle:
    """Reverse-mode gradients of ``sum(upstream * energy)``.

    ``upstream`` is a scalar or one weight per sample.  Trainable gradients
    are summed over the batch; ``dx`` keeps one row per sample (a vector for
    unbatched input).
    """
    grads = GradientBundle.zeros_like(model)
    n = caches.layers[0].inputs.shape[0]
    g = np.broadcast_to(np.asarray(upstream, dtype=float), (n,))[:, None].copy()
    for k in range(len(model.layers) - 1, -1, -1):
        layer, lc = model.layers[k], caches.layers[k]
        if layer.activation == TAAF:
            dz = np.empty_like(g)
            for uid, cols, uc in lc.unit_caches:
                unit = model.units[uid]
                d, dtheta, dbias = unit.backward(uc, g[:, cols])
                dz[:, cols] = d
                grads.dtheta[uid] += dtheta
                grads.dbias[uid] += dbias
        elif lc.dact is not None:
            dz = g * lc.dact
        else:
            dz = g
        grads.dW[k] = dz.T @ lc.inputs
        grads.db[k] = dz.sum(axis=0)
        g = dz @ layer.weights
    grads.dx = g if caches.batched else g[0]
    return grads


def input_gradient(model: Model, x) -> np.ndarray:
    """Forces ``-dE/dx`` with respect to the model inputs."""
    _, caches = forward(model, x)
    return -backward(model, caches, 1.0).dx


# --------------------------------------------------------------------------
# Parameter accounting
# --------------------------------------------------------------------------


def parameter_count(model: Model) -> tuple[int, int]:
    """``(total, taaf_added)``: all trainables, and the share owned by units."""
    added = sum(u.n_params for u in model.units)
    return model.dense_parameter_count() + added, added


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


def model_to_dict(model: Model) -> dict:
    return {
        "topology": model.topology.to_dict(),
        "activation": model.activation,
        "scheme": None if model.scheme is None else model.scheme.value,
        "spec": None if model.spec is None else model.spec.to_dict(),
        "layers": [
            {
                "network": l.network,
                "index": l.index,
                "activation": l.activation,
                "weights": l.weights.tolist(),
                "biases": l.biases.tolist(),
                "unit_ids": None if l.unit_ids is None else l.unit_ids.tolist(),
            }
            for l in model.layers
        ],
        "units": [
            {
                "unit_id": u.unit_id,
                "spec": u.spec.to_dict(),
                "normalizer": u.normalizer.value,
                "use_bias": u.use_bias,
                "theta": u.theta.tolist(),
                "bias": float(u.bias),
            }
            for u in model.units
        ],
    }


def model_from_dict(d: dict) -> Model:
    layers = [
        DenseLayer(np.array(l["weights"], dtype=float).reshape(len(l["biases"]), -1),
                   np.array(l["biases"], dtype=float), l["activation"],
                   None if l["unit_ids"] is None else np.array(l["unit_ids"], dtype=int),
                   l["network"], l["index"])
        for l in d["layers"]
    ]
    units = [
        TaafUnit(BasisSpec.from_dict(u["spec"]), np.array(u["theta"], dtype=float),
                 np.array(u["bias"]), u["normalizer"], u["use_bias"], u["unit_id"])
        for u in d["units"]
    ]
    spec = None if d["spec"] is None else BasisSpec.from_dict(d["spec"])
    return Model(Topology.from_dict(d["topology"]), layers, units, d["activation"],
                 d["scheme"], spec)


def save_checkpoint(path, model: Model, extra: dict | None = None) -> None:
    """Write a JSON checkpoint.

    Python's float repr round-trips exactly, so loading is lossless.
    ``extra`` carries caller metadata such as normalization statistics.
    """
    doc = {"format": "taafs-checkpoint", "version": CHECKPOINT_VERSION,
           "model": model_to_dict(model), "extra": extra or {}}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Model, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "taafs-checkpoint":
        raise ValueError(f"{path}: not a taafs checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    return model_from_dict(doc["model"]), doc.get("extra", {})
