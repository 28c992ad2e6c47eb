"""Trainable adaptive activation functions for small force-field networks."""

from .basis import BasisSpec, Family, default_spec
from .data import Dataset, gen_lennard_jones, gen_morse
from .net import Model, Topology, parameter_count
from .taaf import Granularity, Normalizer, TaafUnit

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "Dataset",
    "Family",
    "Granularity",
    "Model",
    "Normalizer",
    "TaafUnit",
    "Topology",
    "default_spec",
    "gen_lennard_jones",
    "gen_morse",
    "parameter_count",
]
