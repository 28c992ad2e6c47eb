"""Parameter cost of trainable activations under each sharing scheme."""

from taafs.basis import default_spec
from taafs.net import Model, Topology, parameter_count
from taafs.taaf import Granularity

# An embedding network feeding a fitting network; the final layer is linear.
topo = Topology.parse("embedding:25,25,25;fitting:50,50,50,1", input_dim=4)
base, _ = parameter_count(Model.build(topo, "tanh"))
print(f"fixed tanh: {base} parameters")

spec = default_spec("bspline")
for scheme in Granularity:
    model = Model.build(topo, "taaf", spec, scheme)
    total, added = parameter_count(model)
    print(f"{scheme.value:12s} units={len(model.units):3d} +{added:5d} "
          f"({100 * total / base:.2f}%)")

# Per-neuron sharing is the expensive one: 225 activated neurons, 8 each.
