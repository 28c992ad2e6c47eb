"""Basis families: evaluate, differentiate, check the identities."""

import numpy as np

from taafs.basis import (BasisSpec, Family, default_spec, derivative, evaluate,
                         make_knot_vector)

# Every family maps a point (or array of points) to a vector of basis values.
x = np.linspace(-1, 1, 5)
for fam in Family:
    spec = default_spec(fam)
    print(f"{fam.value:10s} {spec.basis_count} functions, values at x=0.3:",
          np.round(evaluate(spec, 0.3), 3))

# Clamped cubic B-splines on 5 intervals: 12 knots, 8 functions.
spec = BasisSpec("bspline", degree=3, grid_count=5)
print("\nknots:", make_knot_vector(spec))

# Partition of unity and local support.
u = np.linspace(-1, 1, 1001)
B = evaluate(spec, u)
print("max |sum - 1|:", np.abs(B.sum(axis=1) - 1).max())
print("non-zero functions per point:", np.unique((B > 0).sum(axis=1)))

# Chebyshev T_n(cos t) = cos(n t).
t = np.linspace(0, np.pi, 7)
T = evaluate(BasisSpec("chebyshev1", 4), np.cos(t))
print("max |T_n(cos t) - cos(n t)|:", np.abs(T - np.cos(np.arange(5) * t[:, None])).max())

# Analytic derivatives agree with a central difference.
spec = default_spec("legendre")
h = 1e-6
x = np.linspace(-0.9, 0.9, 7)  # a central difference straddling the edge sees the clamp
fd = (evaluate(spec, x + h) - evaluate(spec, x - h)) / (2 * h)
print("max |analytic - FD| (legendre):", np.abs(derivative(spec, x) - fd).max())

# Inputs outside the domain are clamped, so the basis is flat there.
print("derivative outside the domain:", derivative(default_spec("bspline"), 1.5))
