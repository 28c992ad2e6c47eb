"""One trainable activation unit: init, forward, backward, curves."""

import numpy as np

from taafs.basis import BasisSpec, default_spec
from taafs.taaf import TaafUnit, export_curve, taaf_backward, taaf_forward

z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])

# A fresh unit is fitted so that it starts out as tanh.
unit = TaafUnit.initialized(default_spec("bspline"))
print("init unit:", np.round(unit(z), 4))
print("tanh     :", np.round(np.tanh(z), 4))

# With Chebyshev coefficients e_1 the unit is exactly tanh: T_1(tanh z) = tanh z.
spec = BasisSpec("chebyshev1", 7)
exact = TaafUnit(spec, np.eye(spec.basis_count)[1])
print("max |e_1 unit - tanh|:", np.abs(exact(z) - np.tanh(z)).max())

# Backward returns the input gradient and the coefficient gradient.
y, cache = taaf_forward(unit, z)
dz, dtheta, dbias = taaf_backward(unit, cache, np.ones_like(z))
print("dy/dz:", np.round(dz, 4))
print("dL/dtheta:", np.round(dtheta, 4))

# Training changes the shape; here a manual nudge of two coefficients.
unit.theta[2:4] += 0.3
curve = export_curve(unit, n_samples=7)
for x, y in zip(curve.xs, curve.ys):
    print(f"  {x:+.1f}  {y:+.4f}")
