"""
Polynomial coefficient functions and Dirichlet grid functions on [0, l].

Two families of objects live here:

- ``Poly``: exact, low-degree coefficient data (B, D, alpha, beta, gamma of the
  ODE-PDE example). Its L2 / H0^1 norms are computed by Gauss-Legendre
  quadrature that is exact for the integrand degree, and its C-norm by
  critical-point maximization.
- ``GridFunction``: a discrete state on the uniform grid z_i = i*h,
  h = l/(n+1), with values pinned to zero at both ends. Norms use the
  trapezoid rule (L2) and forward differences (H0^1), so the sharp discrete
  Friedrichs constant is the first eigenvalue of the second-difference operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as _leg
from numpy.polynomial import polynomial as _P
from scipy.optimize import brentq

MAX_DEGREE = 16
_CRIT_GRID = 2**14
_CRIT_XTOL = 1e-12


def _trim(coeffs: Sequence[float]) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
    if c.ndim != 1:
        raise ValueError("polynomial coefficients must be a flat sequence")
    if not np.all(np.isfinite(c)):
        raise ValueError("polynomial coefficients must be finite")
    nz = np.flatnonzero(c)
    c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
    return c


@dataclass(frozen=True)
class Poly:
    """Real polynomial with ascending coefficients, ``coeffs[k]`` multiplies z**k."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[float] = (0.0,)):
        c = _trim(coeffs)
        if c.size - 1 > MAX_DEGREE:
            raise ValueError(f"degree {c.size - 1} exceeds the supported maximum {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))

    @classmethod
    def constant(cls, value: float) -> "Poly":
        return cls([value])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, z):
        return _P.polyval(z, np.asarray(self.coeffs))

    def deriv(self, m: int = 1) -> "Poly":
        if self.degree < m:
            return Poly([0.0])
        return Poly(_P.polyder(np.asarray(self.coeffs), m))

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(_P.polymul(self.coeffs, other.coeffs))
        return Poly(np.asarray(self.coeffs) * float(other))

    __rmul__ = __mul__

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(_P.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return Poly(_P.polysub(self.coeffs, other.coeffs))

    def __neg__(self) -> "Poly":
        return Poly(-np.asarray(self.coeffs))

    def vanishes_at_ends(self, l: float, rtol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs))) * max(1.0, l) ** self.degree)
        return abs(self(0.0)) <= rtol * scale and abs(self(l)) <= rtol * scale


def gauss_integral(p: Poly, l: float) -> float:
    """Integral of ``p`` over [0, l]; exact for deg(p) <= 2*npts - 1."""
    npts = p.degree // 2 + 2
    x, w = _leg.leggauss(npts)
    z = 0.5 * l * (x + 1.0)
    return float(0.5 * l * np.dot(w, p(z)))


def l2_norm_poly(p: Poly, l: float) -> float:
    """L2[0, l] norm of a polynomial, exact up to rounding."""
    return float(np.sqrt(max(gauss_integral(p * p, l), 0.0)))


def h01_norm_poly(p: Poly, l: float) -> float:
    """H0^1 norm sqrt(int p_z^2) on [0, l]."""
    return l2_norm_poly(p.deriv(), l)


def critical_points(p: Poly, l: float) -> np.ndarray:
    """Zeros of p' in [0, l], isolated by sign changes on a fine grid then bisected."""
    dp = p.deriv()
    if dp.is_zero:
        return np.empty(0)
    z = np.linspace(0.0, l, _CRIT_GRID + 1)
    v = dp(z)
    pts = list(z[v == 0.0])
    s = np.sign(v)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    for i in idx:
        pts.append(brentq(dp, z[i], z[i + 1], xtol=_CRIT_XTOL))
    return np.sort(np.asarray(pts, dtype=float))


def c_norm_poly(p: Poly, l: float) -> float:
    """max over [0, l] of |p|, evaluated at endpoints and critical points."""
    cand = np.concatenate([[0.0, l], critical_points(p, l)])
    return float(np.max(np.abs(p(cand))))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Dirichlet grid function on [0, l] with ``n`` interior nodes.

    ``values`` has length n + 2; the end values are zero. The array is
    read-only, so derive new states with :meth:`with_values`.
    """

    l: float
    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.l > 0:
            raise ValueError("domain length must be positive")
        if self.n < 3:
            raise ValueError("need at least 3 interior nodes")
        v = np.array(self.values, dtype=float)
        if v.shape != (self.n + 2,):
            raise ValueError(f"expected {self.n + 2} nodal values, got shape {v.shape}")
        tol = 1e-12 * max(1.0, float(np.max(np.abs(v))))
        if abs(v[0]) > tol or abs(v[-1]) > tol:
            raise ValueError("grid function must vanish at z=0 and z=l")
        v[0] = v[-1] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return self.l / (self.n + 1)

    @property
    def z(self) -> np.ndarray:
        return grid_nodes(self.l, self.n)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    @classmethod
    def zeros(cls, l: float, n: int) -> "GridFunction":
        return cls(l, n, np.zeros(n + 2))

    @classmethod
    def from_function(cls, f: Callable, l: float, n: int) -> "GridFunction":
        z = grid_nodes(l, n)
        return cls(l, n, np.array(np.broadcast_to(f(z), z.shape), dtype=float))

    @classmethod
    def from_interior(cls, interior: np.ndarray, l: float) -> "GridFunction":
        interior = np.asarray(interior, dtype=float)
        v = np.zeros(interior.size + 2)
        v[1:-1] = interior
        return cls(l, interior.size, v)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.l, self.n, values)

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.l == other.l and self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.l, self.n, self.values.tobytes()))


def grid_nodes(l: float, n: int) -> np.ndarray:
    return np.linspace(0.0, l, n + 2)


def trapezoid(values: np.ndarray, h: float) -> float:
    """Composite trapezoid rule for nodal values on a uniform grid."""
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


def l2_norm(f: GridFunction) -> float:
    return float(np.sqrt(trapezoid(f.values**2, f.h)))


def forward_diff(f: GridFunction) -> np.ndarray:
    return np.diff(f.values) / f.h


def h01_norm(f: GridFunction) -> float:
    d = forward_diff(f)
    return float(np.sqrt(f.h * np.dot(d, d)))


def second_diff(f: GridFunction) -> np.ndarray:
    """Central second difference at the interior nodes."""
    v = f.values
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / f.h**2


def laplacian_norm(f: GridFunction) -> float:
    """Discrete L2 norm of the second difference, sqrt(h * sum (D2 f)^2)."""
    d2 = second_diff(f)
    return float(np.sqrt(f.h * np.dot(d2, d2)))


def discrete_friedrichs_constant(l: float, n: int) -> float:
    """First Dirichlet eigenvalue (4/h^2) sin^2(pi h / (2 l)) of -D2 on the grid."""
    h = l / (n + 1)
    return float(4.0 / h**2 * np.sin(np.pi * h / (2.0 * l)) ** 2)


def friedrichs_check(f: GridFunction) -> tuple[float, float]:
    """Rayleigh quotient h01^2 / l2^2 together with the sharp discrete bound.

    The quotient is never below the bound; equality holds for the sampled
    first sine mode.
    """
    l2 = l2_norm(f)
    if l2 == 0.0:
        raise ValueError("Rayleigh quotient undefined for the zero function")
    return h01_norm(f) ** 2 / l2**2, discrete_friedrichs_constant(f.l, f.n)


def sample_poly(p: Poly, l: float, n: int) -> np.ndarray:
    return p(grid_nodes(l, n))
