"""
Comparison-function calculus for dwell-time certificates.

Rate functions are the class-P / class-K maps that appear in the Lyapunov and
Chetaev conditions (phi_1, phi_2, psi_1, psi_2, chi, alpha_1, alpha_2, and the
flow / jump bounds xi, eta). For an ordered pair of rates the module provides

    phi_hat(s) = min(phi_1(s), phi_2(s), s)
    F(s, q)    = integral from s to q of dsigma / phi_hat(sigma)

its inverse in the first argument, and the geometric decay envelope obtained
by spending a fixed budget ``margin`` of F per jump.

Linear rates are handled in closed form. Power and tabulated rates go through
an adaptive Simpson rule in the variable u = ln(sigma), which keeps the
integrand bounded over many decades.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

QUAD_ATOL = 1e-10
QUAD_RTOL = 1e-12
S_FLOOR = 1e-12
BISECT_WIDTH = 1e-12
_MAX_DEPTH = 60


class RateFunction:
    """Base class; subclasses are immutable and callable on nonnegative reals."""

    strictly_increasing = True

    def __call__(self, s: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def inverse(self, v: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def linear_slope(self) -> float | None:
        """Slope if the rate is linear, else None."""
        return None


@dataclass(frozen=True)
class Linear(RateFunction):
    slope: float

    def __post_init__(self):
        if not (self.slope > 0 and math.isfinite(self.slope)):
            raise ValueError(f"linear rate needs a positive finite slope, got {self.slope}")

    def __call__(self, s):
        return self.slope * s

    def inverse(self, v):
        return v / self.slope

    @property
    def linear_slope(self):
        return self.slope


@dataclass(frozen=True)
class Power(RateFunction):
    coefficient: float
    exponent: float

    def __post_init__(self):
        if not (self.coefficient > 0 and self.exponent > 0):
            raise ValueError("power rate needs positive coefficient and exponent")

    def __call__(self, s):
        return self.coefficient * np.power(s, self.exponent)

    def inverse(self, v):
        return np.power(v / self.coefficient, 1.0 / self.exponent)

    @property
    def linear_slope(self):
        return self.coefficient if self.exponent == 1.0 else None


@dataclass(frozen=True)
class Tabulated(RateFunction):
    """Piecewise-linear rate through (0, 0) and the given samples.

    Beyond the last sample the final segment's slope is continued, so the
    function stays unbounded and strictly increasing.
    """

    xs: tuple
    ys: tuple

    def __init__(self, pairs: Sequence[tuple[float, float]]):
        pts = sorted((float(a), float(b)) for a, b in pairs)
        if not pts or pts[0][0] != 0.0:
            pts.insert(0, (0.0, 0.0))
        xs, ys = zip(*pts)
        if ys[0] != 0.0:
            raise ValueError("tabulated rate must vanish at 0")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValueError("tabulated rate must be strictly increasing")
        if len(xs) < 2:
            raise ValueError("tabulated rate needs at least one positive sample")
        object.__setattr__(self, "xs", tuple(xs))
        object.__setattr__(self, "ys", tuple(ys))

    def _extend(self, s, xs, ys):
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        s = np.asarray(s, dtype=float)
        out = np.interp(s, xs, ys)
        return np.where(s > xs[-1], ys[-1] + slope * (s - xs[-1]), out)

    def __call__(self, s):
        out = self._extend(s, self.xs, self.ys)
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, v):
        out = self._extend(v, self.ys, self.xs)
        return float(out) if np.ndim(out) == 0 else out


def linear(slope: float) -> Linear:
    return Linear(float(slope))


def power(coefficient: float, exponent: float) -> Power:
    return Power(float(coefficient), float(exponent))


def tabulated(pairs) -> Tabulated:
    return Tabulated(pairs)


IDENTITY = Linear(1.0)
SQUARE = Power(1.0, 2.0)


def eval_rate(r: RateFunction, s: float) -> float:
    if s < 0:
        raise ValueError(f"rate functions are defined on [0, inf), got {s}")
    return float(r(s))


@dataclass(frozen=True)
class RateSet:
    """Decay/growth rates (phi1, phi2), jump gains (psi1, psi2) and the gain chi."""

    phi1: RateFunction
    phi2: RateFunction
    psi1: RateFunction
    psi2: RateFunction
    chi: RateFunction = IDENTITY

    def __post_init__(self):
        for name in ("phi1", "phi2", "psi1", "psi2", "chi"):
            if not isinstance(getattr(self, name), RateFunction):
                raise TypeError(f"{name} must be a RateFunction")

    @property
    def phi_hat_slope(self) -> float | None:
        """Slope of phi_hat when both phi_i are linear, else None."""
        a, b = self.phi1.linear_slope, self.phi2.linear_slope
        if a is None or b is None:
            return None
        return min(a, b, 1.0)


@dataclass(frozen=True)
class DwellWindow:
    theta1: float
    theta2: float
    margin: float

    def __post_init__(self):
        if self.theta1 > self.theta2:
            raise ValueError("theta1 must not exceed theta2")
        if not self.margin > 0:
            raise ValueError("margin must be positive")

    def contains(self, gap: float) -> bool:
        return self.theta1 <= gap <= self.theta2


def phi_hat(rates: RateSet, s: float) -> float:
    if not s > 0:
        raise ValueError("phi_hat is evaluated on positive arguments only")
    return float(min(rates.phi1(s), rates.phi2(s), s))


def _simpson(f, a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(f, a, m, fa, flm, fm)
    right = _simpson(f, m, b, fm, frm, fb)
    delta = left + right - whole
    if depth >= _MAX_DEPTH or abs(delta) <= 15.0 * max(tol, QUAD_RTOL * abs(left + right)):
        return left + right + delta / 15.0
    return (_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + _adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_ATOL) -> float:
    """Adaptive Simpson quadrature of ``f`` over [a, b] (signed).

    A panel is accepted once its error estimate is below the absolute
    tolerance, or below QUAD_RTOL relative to the panel value, whichever is
    larger; the relative guard keeps huge integrands near the floor finite.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol)
    # a few fixed panels first, so sharp features are not skipped by the first estimate
    edges = np.linspace(a, b, 9)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        flo, fmid, fhi = f(lo), f(0.5 * (lo + hi)), f(hi)
        whole = _simpson(f, lo, hi, flo, fmid, fhi)
        total += _adaptive(f, lo, hi, flo, fmid, fhi, whole, tol / 8.0, 0)
    return total


def reciprocal_integral(rate, s: float, q: float, tol: float = QUAD_ATOL) -> float:
    """Signed integral of 1/rate(sigma) from s to q, for s, q > 0."""
    if s < S_FLOOR or q < S_FLOOR:
        raise ValueError(f"integration endpoints must be >= {S_FLOOR}")
    slope = getattr(rate, "linear_slope", None)
    if slope is not None:
        return math.log(q / s) / slope

    def g(u):
        x = math.exp(u)
        return x / float(rate(x))

    return adaptive_simpson(g, math.log(s), math.log(q), tol)


def f_integral(rates: RateSet, s: float, q: float) -> float:
    """F(s, q) = int_s^q dsigma / phi_hat(sigma); positive iff s < q."""
    if not (s > 0 and q > 0):
        raise ValueError("F is defined for positive endpoints")
    mu = rates.phi_hat_slope
    if mu is not None:
        return math.log(q / s) / mu
    return reciprocal_integral(lambda x: phi_hat(rates, x), s, q)


def f_inverse(rates: RateSet, q: float, r: float) -> float:
    """The unique x in (0, q] with F(x, q) = r."""
    if not q > 0:
        raise ValueError("q must be positive")
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return float(q)
    mu = rates.phi_hat_slope
    if mu is not None:
        return float(q * math.exp(-mu * r))
    lo, hi = math.log(S_FLOOR), math.log(q)
    # F(e^u, q) is strictly decreasing in u; bisect in log space, keeping
    # acc = F(e^hi, q) so each step only integrates over the current bracket
    acc = 0.0
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        piece = f_integral(rates, math.exp(mid), math.exp(hi))
        if acc + piece > r:
            lo = mid
        else:
            hi = mid
            acc += piece
    if lo == math.log(S_FLOOR):
        # never moved off the floor: check whether the root is really below it
        if acc + f_integral(rates, S_FLOOR, math.exp(hi)) < r:
            raise ValueError(f"F^-1 falls below the quadrature floor {S_FLOOR}")
    return math.exp(0.5 * (lo + hi))


def decay_envelope(rates: RateSet, alpha2: RateFunction, v0: float, margin: float, k: int) -> float:
    """Upper envelope F^-1(alpha2(v0), k * margin) for the Lyapunov value after k jumps.

    ``v0`` is the state norm right after the first jump of the range.
    """
    if v0 < 0:
        raise ValueError("v0 must be nonnegative")
    if v0 == 0:
        return 0.0
    return f_inverse(rates, float(alpha2(v0)), k * margin)
