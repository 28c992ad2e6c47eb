"""Basis families for trainable activations.

Every family is evaluated through :func:`evaluate` and differentiated through
:func:`derivative`.  Both accept a scalar or an array of points and return an
array of shape ``x.shape + (spec.basis_count,)``.

Grid-based families (``bspline``, ``fourier``, ``grbf``) use ``grid_count``;
order-based polynomial families use ``degree`` as the highest order ``K``.
Points outside ``[domain_lo, domain_hi]`` are clamped to the domain before
evaluation, so derivatives at clamped points are the boundary derivatives.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np


class Family(str, enum.Enum):
    BSPLINE = "bspline"
    FOURIER = "fourier"
    GRBF = "grbf"
    LEGENDRE = "legendre"
    HERMITE = "hermite"
    CHEBYSHEV1 = "chebyshev1"
    CHEBYSHEV2 = "chebyshev2"
    BESSEL = "bessel"
    JACOBI = "jacobi"

    def __str__(self) -> str:
        return self.value


GRID_FAMILIES = frozenset({Family.BSPLINE, Family.GRBF})
POLY_FAMILIES = frozenset(
    {
        Family.LEGENDRE,
        Family.HERMITE,
        Family.CHEBYSHEV1,
        Family.CHEBYSHEV2,
        Family.BESSEL,
        Family.JACOBI,
    }
)


@dataclass(frozen=True)
class BasisSpec:
    """Which basis family to use and how it is laid out.

    Parameters
    ----------
    family : Family or str
        Basis family name.
    degree : int
        Spline degree ``p`` for ``bspline``; harmonic count ``K`` for
        ``fourier``; highest polynomial order ``K`` for polynomial families.
        Ignored by ``grbf``.
    grid_count : int
        Number of grid intervals ``G`` for ``bspline`` and ``grbf``.
    domain_lo, domain_hi : float
        Evaluation domain.
    jacobi_alpha, jacobi_beta : float
        Jacobi shape parameters, both must exceed -1.
    """

    family: Family = Family.BSPLINE
    degree: int = 3
    grid_count: int = 5
    domain_lo: float = -1.0
    domain_hi: float = 1.0
    jacobi_alpha: float = 0.0
    jacobi_beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.domain_lo < self.domain_hi:
            raise ValueError(
                f"domain_lo must be < domain_hi, got [{self.domain_lo}, {self.domain_hi}]"
            )
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")
        if self.grid_count < 1:
            raise ValueError(f"grid_count must be positive, got {self.grid_count}")
        if self.family is Family.JACOBI and (self.jacobi_alpha <= -1 or self.jacobi_beta <= -1):
            raise ValueError(
                f"Jacobi parameters must exceed -1, got alpha={self.jacobi_alpha}, "
                f"beta={self.jacobi_beta}"
            )

    @property
    def basis_count(self) -> int:
        if self.family is Family.BSPLINE:
            return self.grid_count + self.degree
        if self.family is Family.FOURIER:
            return 2 * self.degree + 1
        if self.family is Family.GRBF:
            return self.grid_count + 1
        return self.degree + 1

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "degree": self.degree,
            "grid_count": self.grid_count,
            "domain_lo": self.domain_lo,
            "domain_hi": self.domain_hi,
            "jacobi_alpha": self.jacobi_alpha,
            "jacobi_beta": self.jacobi_beta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(**d)


# Defaults keep per-unit coefficient budgets close to 8 across families.  The
# Fourier period spans twice the normalized range: a series periodic on
# [-1, 1] cannot fit a monotone activation there.
_DEFAULTS = {
    Family.BSPLINE: dict(degree=3, grid_count=5),
    Family.FOURIER: dict(degree=3, domain_lo=-2.0, domain_hi=2.0),
    Family.GRBF: dict(grid_count=7),
}


def default_spec(family: Family | str, **overrides) -> BasisSpec:
    """Default spec for ``family``: cubic B-spline on 5 intervals, Fourier
    with 3 harmonics of period 4, 8 Gaussian bumps, order-7 polynomials."""
    family = Family(family)
    kwargs = dict(_DEFAULTS.get(family, dict(degree=7)))
    kwargs.update(overrides)
    return BasisSpec(family=family, **kwargs)


# --------------------------------------------------------------------------
# B-splines
# --------------------------------------------------------------------------


def make_knot_vector(spec: BasisSpec) -> np.ndarray:
    """Clamped uniform knot vector of length ``G + 2p + 1``."""
    if spec.family is not Family.BSPLINE:
        raise ValueError(f"knot vectors only exist for bspline, not {spec.family}")
    p, G = spec.degree, spec.grid_count
    inner = np.linspace(spec.domain_lo, spec.domain_hi, G + 1)
    return np.concatenate([np.full(p, spec.domain_lo), inner, np.full(p, spec.domain_hi)])


def _find_span(knots: np.ndarray, degree: int, u: np.ndarray) -> np.ndarray:
    # half-open spans; the right end of the domain closes the last span
    n_basis = len(knots) - 1 - degree
    span = np.searchsorted(knots, u, side="right") - 1
    return np.clip(span, degree, n_basis - 1)


def _bspline_local(knots: np.ndarray, degree: int, u: np.ndarray, want_deriv: bool):
    """Non-zero basis functions ``N_{s-p..s, p}`` at flat points ``u``.

    Cox-de Boor recursion in triangular form: on a non-empty span every
    denominator is a positive knot difference, so no 0/0 case arises.
    Returns ``(span, values, derivs)`` with values of shape ``(len(u), p+1)``.
    """
    p = degree
    span = _find_span(knots, p, u)
    left = [None] + [u - knots[span + 1 - j] for j in range(1, p + 1)]
    right = [None] + [knots[span + j] - u for j in range(1, p + 1)]
    N = np.zeros((u.size, p + 1))
    N[:, 0] = 1.0
    lower = None
    for j in range(1, p + 1):
        if j == p and want_deriv:
            lower = N[:, :p].copy()
        saved = np.zeros(u.size)
        for r in range(j):
            temp = N[:, r] / (right[r + 1] + left[j - r])
            N[:, r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[:, j] = saved
    dN = None
    if want_deriv:
        dN = np.zeros_like(N)
        if p > 0:
            # N'_{i,p} = p N_{i,p-1}/(u_{i+p}-u_i) - p N_{i+1,p-1}/(u_{i+p+1}-u_{i+1})
            for r in range(p):
                i = span - p + 1 + r
                term = p * lower[:, r] / (knots[i + p] - knots[i])
                dN[:, r + 1] += term
                dN[:, r] -= term
    return span, N, dN


def _scatter(span: np.ndarray, local: np.ndarray, degree: int, n_basis: int) -> np.ndarray:
    out = np.zeros(span.size * n_basis)
    flat = (np.arange(span.size) * n_basis + span - degree)[:, None] + np.arange(degree + 1)
    out[flat] = local
    return out.reshape(span.size, n_basis)


def _bspline(spec: BasisSpec, u: np.ndarray, want_deriv: bool):
    knots = make_knot_vector(spec)
    flat = u.reshape(-1)
    span, N, dN = _bspline_local(knots, spec.degree, flat, want_deriv)
    shape = u.shape + (spec.basis_count,)
    values = _scatter(span, N, spec.degree, spec.basis_count).reshape(shape)
    if not want_deriv:
        return values, None
    return values, _scatter(span, dN, spec.degree, spec.basis_count).reshape(shape)


def bspline_eval(spec: BasisSpec, u) -> np.ndarray:
    """B-spline basis values ``N_{i,p}(u)`` on the clamped uniform grid."""
    if spec.family is not Family.BSPLINE:
        raise ValueError(f"expected bspline spec, got {spec.family}")
    return _bspline(spec, _clamp(spec, u), False)[0]


# --------------------------------------------------------------------------
# Fourier and Gaussian radial basis
# --------------------------------------------------------------------------


def _omega(spec: BasisSpec) -> float:
    return 2.0 * np.pi / (spec.domain_hi - spec.domain_lo)


def fourier_eval(spec: BasisSpec, x) -> np.ndarray:
    """``[1/2, cos(wx), sin(wx), ..., cos(Kwx), sin(Kwx)]`` with one period
    spanning the domain."""
    x = _clamp(spec, x)
    K = spec.degree
    out = np.empty(x.shape + (2 * K + 1,))
    out[..., 0] = 0.5
    if K:
        phase = _omega(spec) * x[..., None] * np.arange(1, K + 1)
        out[..., 1::2] = np.cos(phase)
        out[..., 2::2] = np.sin(phase)
    return out


def _fourier_deriv(spec: BasisSpec, x: np.ndarray) -> np.ndarray:
    K = spec.degree
    out = np.zeros(x.shape + (2 * K + 1,))
    if K:
        freq = _omega(spec) * np.arange(1, K + 1)
        phase = x[..., None] * freq
        out[..., 1::2] = -freq * np.sin(phase)
        out[..., 2::2] = freq * np.cos(phase)
    return out


def grbf_centers(spec: BasisSpec) -> tuple[np.ndarray, float]:
    centers = np.linspace(spec.domain_lo, spec.domain_hi, spec.grid_count + 1)
    sigma = (spec.domain_hi - spec.domain_lo) / spec.grid_count
    return centers, sigma


def _grbf_eval(spec: BasisSpec, x: np.ndarray) -> np.ndarray:
    c, s = grbf_centers(spec)
    d = x[..., None] - c
    return np.exp(-(d**2) / (2 * s**2))


def _grbf_deriv(spec: BasisSpec, x: np.ndarray) -> np.ndarray:
    c, s = grbf_centers(spec)
    d = x[..., None] - c
    return -d / s**2 * np.exp(-(d**2) / (2 * s**2))


# --------------------------------------------------------------------------
# Orthogonal polynomials
# --------------------------------------------------------------------------


def _recurrence(spec: BasisSpec, n: int) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` with ``P_{n+1} = (a x + b) P_n - c P_{n-1}``."""
    fam = spec.family
    if fam is Family.CHEBYSHEV1:
        return (1.0 if n == 0 else 2.0), 0.0, (0.0 if n == 0 else 1.0)
    if fam is Family.CHEBYSHEV2:
        return 2.0, 0.0, (0.0 if n == 0 else 1.0)
    if fam is Family.LEGENDRE:
        return (2 * n + 1) / (n + 1), 0.0, n / (n + 1)
    if fam is Family.HERMITE:
        # probabilists' He_n
        return 1.0, 0.0, float(n)
    if fam is Family.BESSEL:
        # Krall-Frink: y_{n+1} = (2n+1) x y_n + y_{n-1}, y_1 = 1 + x
        if n == 0:
            return 1.0, 1.0, 0.0
        return float(2 * n + 1), 0.0, -1.0
    if fam is Family.JACOBI:
        al, be = spec.jacobi_alpha, spec.jacobi_beta
        if n == 0:
            return (al + be + 2) / 2, (al - be) / 2, 0.0
        s = 2 * n + al + be
        den = 2 * (n + 1) * (n + al + be + 1) * s
        a = (s + 1) * (s + 2) * s / den
        b = (s + 1) * (al**2 - be**2) / den
        c = 2 * (n + al) * (n + be) * (s + 2) / den
        return a, b, c
    raise ValueError(f"{fam} is not a polynomial family")


def _to_reference(spec: BasisSpec, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Affine map of the domain onto [-1, 1] and its slope."""
    lo, hi = spec.domain_lo, spec.domain_hi
    if lo == -1.0 and hi == 1.0:
        return x, 1.0
    return (2.0 * x - lo - hi) / (hi - lo), 2.0 / (hi - lo)


@functools.lru_cache(maxsize=64)
def _recurrence_table(spec: BasisSpec) -> tuple[tuple[float, float, float], ...]:
    return tuple(_recurrence(spec, n) for n in range(spec.degree))


def _poly_values_and_derivs(spec: BasisSpec, x: np.ndarray, want_deriv: bool):
    t, slope = _to_reference(spec, x)
    # build each order as its own contiguous array, stack once at the end
    P = [np.ones_like(t)]
    dP = [np.zeros_like(t)]
    prev = dprev = 0.0
    for a, b, c in _recurrence_table(spec):
        lin = a * t + b
        nxt = lin * P[-1] - c * prev
        if want_deriv:
            dnxt = a * P[-1] + lin * dP[-1] - c * dprev
            dprev = dP[-1]
            dP.append(dnxt)
        prev = P[-1]
        P.append(nxt)
    values = np.stack(P, axis=-1)
    if want_deriv:
        return values, np.stack(dP, axis=-1) * slope
    return values, None


def chebyshev1_eval(spec: BasisSpec, x) -> np.ndarray:
    """Chebyshev polynomials of the first kind ``T_0..T_K``."""
    if spec.family is not Family.CHEBYSHEV1:
        raise ValueError(f"expected chebyshev1 spec, got {spec.family}")
    return _poly_values_and_derivs(spec, _clamp(spec, x), False)[0]


def polyfamily_eval(spec: BasisSpec, x) -> np.ndarray:
    """Legendre, Hermite, Chebyshev-2, Bessel, Jacobi or GRBF values."""
    x = _clamp(spec, x)
    if spec.family is Family.GRBF:
        return _grbf_eval(spec, x)
    if spec.family not in POLY_FAMILIES:
        raise ValueError(f"{spec.family} is not handled by polyfamily_eval")
    return _poly_values_and_derivs(spec, x, False)[0]


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------


def _clamp(spec: BasisSpec, x) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), spec.domain_lo, spec.domain_hi)


def evaluate(spec: BasisSpec, x) -> np.ndarray:
    """Basis vector(s) at ``x``; shape ``np.shape(x) + (basis_count,)``."""
    fam = spec.family
    if fam is Family.BSPLINE:
        return bspline_eval(spec, x)
    if fam is Family.FOURIER:
        return fourier_eval(spec, x)
    return polyfamily_eval(spec, x)


def _zero_outside(spec: BasisSpec, x, d: np.ndarray) -> np.ndarray:
    # clamped inputs see a constant basis
    x = np.asarray(x, dtype=float)
    outside = (x < spec.domain_lo) | (x > spec.domain_hi)
    if outside.any():
        d[outside] = 0.0
    return d


def derivative(spec: BasisSpec, x) -> np.ndarray:
    """Analytic first derivative of every basis function at ``x``.

    Zero outside the domain, where :func:`evaluate` clamps its input.
    """
    xc = _clamp(spec, x)
    fam = spec.family
    if fam is Family.BSPLINE:
        d = _bspline(spec, xc, True)[1]
    elif fam is Family.FOURIER:
        d = _fourier_deriv(spec, xc)
    elif fam is Family.GRBF:
        d = _grbf_deriv(spec, xc)
    else:
        d = _poly_values_and_derivs(spec, xc, True)[1]
    return _zero_outside(spec, x, d)


def evaluate_with_derivative(spec: BasisSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives together, sharing work where possible."""
    if spec.family in POLY_FAMILIES:
        v, d = _poly_values_and_derivs(spec, _clamp(spec, x), True)
    elif spec.family is Family.BSPLINE:
        v, d = _bspline(spec, _clamp(spec, x), True)
    else:
        return evaluate(spec, x), derivative(spec, x)
    return v, _zero_outside(spec, x, d)


basis_derivative = derivative
