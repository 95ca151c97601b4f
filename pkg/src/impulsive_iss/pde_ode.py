"""
Method-of-lines simulator for the impulsive heat-equation / ODE system.

The spatial operator a^2 d_zz with Dirichlet ends is discretized by the
standard three-point stencil on the interior nodes. Time stepping is IMEX:

- ``imex_euler``: backward Euler on diffusion, forward Euler on the rest;
- ``imex_cn``: Crank-Nicolson on diffusion with a Heun (explicit
  trapezoidal) predictor-corrector on the rest, second order overall.

The implicit matrix I - theta*dt*L is symmetric positive definite and
tridiagonal, so it is factored once per step size with a banded Cholesky.

Steps are taken on the global grid t_k = k*dt; a flow segment that starts or
ends between grid points uses shortened first/last steps. Restarting a flow
from an on-grid time therefore reproduces the unsplit run bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .certificate import ExampleParams, build_Atilde0
from .functionspace import (
    GridFunction,
    Poly,
    grid_nodes,
    h01_norm,
    h01_norm_poly,
    l2_norm,
    l2_norm_poly,
)

SCHEMES = ("imex_euler", "imex_cn")
EXPLICIT_CAP = 0.1
_SNAP = 1e-9


class StepSizeError(ValueError):
    """dt violates the stability cap of the explicit part."""


class ConvergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# disturbances

@dataclass(frozen=True)
class TimeProfile:
    """Scalar time profile: zero, constant, sinusoid or seeded piecewise-constant.

    ``offset`` shifts the argument, so ``p.shifted(s)(t) == p(t + s)``.
    ``frequency`` is angular (rad per unit time). For the piecewise profile
    ``amplitude`` bounds the values and ``period`` is the switch period.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    period: float = 1.0
    seed: int = 0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid", "piecewise"):
            raise ValueError(f"unknown time profile kind {self.kind!r}")
        if self.kind == "piecewise" and not self.period > 0:
            raise ValueError("piecewise profile needs a positive switch period")

    def __call__(self, t: float) -> float:
        t = t + self.offset
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.amplitude
        if self.kind == "sinusoid":
            return self.amplitude * math.sin(self.frequency * t + self.phase)
        k = math.floor(t / self.period)
        rng = np.random.default_rng([self.seed, k + 2**31])
        return self.amplitude * float(rng.uniform(-1.0, 1.0))

    @property
    def sup(self) -> float:
        return 0.0 if self.kind == "zero" else abs(self.amplitude)

    def shifted(self, s: float) -> "TimeProfile":
        return TimeProfile(self.kind, self.amplitude, self.frequency, self.phase,
                           self.period, self.seed, self.offset + s)

    def scaled(self, k: float) -> "TimeProfile":
        return TimeProfile(self.kind, self.amplitude * k, self.frequency, self.phase,
                           self.period, self.seed, self.offset)


ZERO = TimeProfile()


@dataclass(frozen=True)
class DisturbanceSignal:
    """d11(z,t) = shape11(z)*p11(t), d12(t) = p12(t); per-jump d21 = shape21*p21(k), d22 = p22(k)."""

    shape11: Poly = field(default_factory=Poly)
    p11: TimeProfile = ZERO
    p12: TimeProfile = ZERO
    shape21: Poly = field(default_factory=Poly)
    p21: TimeProfile = ZERO
    p22: TimeProfile = ZERO

    def check_domain(self, l: float):
        for name in ("shape11", "shape21"):
            if not getattr(self, name).vanishes_at_ends(l):
                raise ValueError(f"{name} must vanish at z=0 and z=l")

    def d1(self, t: float) -> tuple[float, float]:
        return self.p11(t), self.p12(t)

    def d2(self, k: int) -> tuple[Poly, float]:
        return self.shape21 * self.p21(k), self.p22(k)

    def sup_norm(self, l: float) -> float:
        """max(sup_t |d1(t)|_{U1}, sup_k |d2(k)|_{U2}) with U = H0^1 x R.

        Computed from the profile bounds; exact whenever the two components of
        each pair peak simultaneously, and an upper bound otherwise.
        """
        n11 = h01_norm_poly(self.shape11, l) * self.p11.sup
        n21 = h01_norm_poly(self.shape21, l) * self.p21.sup
        return max(math.hypot(n11, self.p12.sup), math.hypot(n21, self.p22.sup))

    @property
    def is_zero(self) -> bool:
        return all(p.sup == 0.0 for p in (self.p11, self.p12, self.p21, self.p22))

    def shifted(self, s: float) -> "DisturbanceSignal":
        return DisturbanceSignal(self.shape11, self.p11.shifted(s), self.p12.shifted(s),
                                 self.shape21, self.p21, self.p22)

    def scaled(self, k: float) -> "DisturbanceSignal":
        return DisturbanceSignal(self.shape11, self.p11.scaled(k), self.p12.scaled(k),
                                 self.shape21, self.p21.scaled(k), self.p22.scaled(k))


NO_DISTURBANCE = DisturbanceSignal()


# --------------------------------------------------------------------------
# states and flow parameters

@dataclass(frozen=True)
class HybridState:
    x: GridFunction
    y: float
    t: float = 0.0

    @classmethod
    def from_functions(cls, fx, y: float, l: float, n: int, t: float = 0.0) -> "HybridState":
        return cls(GridFunction.from_function(fx, l, n), float(y), float(t))

    @classmethod
    def origin(cls, l: float, n: int, t: float = 0.0) -> "HybridState":
        return cls(GridFunction.zeros(l, n), 0.0, t)

    def norm(self) -> float:
        """State norm in H0^1 x R."""
        return math.hypot(h01_norm(self.x), self.y)


class FlowParams:
    """Discretized operators and coefficient samples for one grid and step size."""

    def __init__(self, example: ExampleParams, n: int, dt: float, scheme: str = "imex_cn"):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not dt > 0:
            raise ValueError("dt must be positive")
        if n < 3:
            raise ValueError("need at least 3 interior nodes")
        cap = EXPLICIT_CAP / max(example.c**2, example.kappa1, 1e-300)
        if dt > cap:
            raise StepSizeError(f"dt={dt} exceeds the explicit-part cap {cap:.3g}")
        self.example = example
        self.n = n
        self.dt = float(dt)
        self.scheme = scheme
        self.l = example.l
        self.h = example.l / (n + 1)
        z = grid_nodes(example.l, n)
        self.z = z
        self.B = example.B_poly(z)
        self.D = example.D_poly(z)
        self.alpha = example.alpha_poly(z) * np.ones_like(z)
        self.beta = example.beta_poly(z) * np.ones_like(z)
        self.gamma = example.gamma_poly(z) * np.ones_like(z)
        self.lap = example.a**2 / self.h**2
        self._factors = {}

    @property
    def theta(self) -> float:
        return 1.0 if self.scheme == "imex_euler" else 0.5

    def factor(self, dt: float):
        # nominal dt is cached; shortened steps are factored on demand
        key = dt if dt == self.dt else None
        if key is not None and key in self._factors:
            return self._factors[key]
        n, r = self.n, self.theta * dt * self.lap
        ab = np.empty((2, n))
        ab[0, 0] = 0.0
        ab[0, 1:] = -r
        ab[1, :] = 1.0 + 2.0 * r
        cb = cholesky_banded(ab, lower=False)
        if key is not None:
            self._factors[key] = cb
        return cb

    def apply_lap(self, xi: np.ndarray) -> np.ndarray:
        """a^2 D2 on interior values (zero Dirichlet ends)."""
        out = -2.0 * xi
        out[1:] += xi[:-1]
        out[:-1] += xi[1:]
        return self.lap * out

    def integral(self, weights: np.ndarray, xi: np.ndarray) -> float:
        """Trapezoid integral of weights * x; the end values of x are zero."""
        return float(self.h * np.dot(weights[1:-1], xi))

    def explicit_rhs(self, xi, y, t, d: DisturbanceSignal):
        ex = self.example
        p11, p12 = d.d1(t)
        fx = ex.phi(xi) + self.B[1:-1] * y
        if p11 != 0.0:
            fx = fx + d.shape11(self.z[1:-1]) * p11
        fy = ex.c**2 * y + self.integral(self.D, xi) + p12
        return fx, fy

    def check_step(self, xi: np.ndarray, dt: float):
        ex = self.example
        stiff = max(ex.c**2, ex.kappa1 + 3.0 * ex.kappa3 * float(np.max(xi * xi, initial=0.0)))
        if dt * stiff > EXPLICIT_CAP * (1 + 1e-12):
            raise StepSizeError(
                f"dt={dt:.3g} too large for explicit terms (stiffness {stiff:.3g}); "
                f"need dt <= {EXPLICIT_CAP / stiff:.3g}")

    def raw_step(self, xi: np.ndarray, y: float, t: float, dt: float, d: DisturbanceSignal):
        self.check_step(xi, dt)
        cb = self.factor(dt)
        fx, fy = self.explicit_rhs(xi, y, t, d)
        if self.scheme == "imex_euler":
            x_new = cho_solve_banded((cb, False), xi + dt * fx)
            return x_new, y + dt * fy
        base = xi + 0.5 * dt * self.apply_lap(xi)
        xs = cho_solve_banded((cb, False), base + dt * fx)
        ys = y + dt * fy
        fx2, fy2 = self.explicit_rhs(xs, ys, t + dt, d)
        x_new = cho_solve_banded((cb, False), base + 0.5 * dt * (fx + fx2))
        return x_new, y + 0.5 * dt * (fy + fy2)


def _wrap(p: FlowParams, xi: np.ndarray, y: float, t: float) -> HybridState:
    return HybridState(GridFunction.from_interior(xi, p.l), float(y), float(t))


def step_flow(s: HybridState, p: FlowParams, d: DisturbanceSignal, dt: float) -> HybridState:
    """One IMEX step of size dt from s."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if s.x.n != p.n:
        raise ValueError("state grid does not match flow parameters")
    x_new, y_new = p.raw_step(s.x.interior, s.y, s.t, dt, d)
    return _wrap(p, x_new, y_new, s.t + dt)


def step_times(t0: float, t1: float, dt: float) -> list[float]:
    """Breakpoints from t0 to t1 on the global grid k*dt, with shortened end steps."""
    snap = _SNAP * dt
    times = [t0]
    k = math.floor((t0 + snap) / dt) + 1
    while k * dt < t1 - snap:
        times.append(k * dt)
        k += 1
    if t1 > t0:
        times.append(t1)
    return times


def flow_raw(p: FlowParams, xi: np.ndarray, y: float, t0: float, t1: float, d: DisturbanceSignal):
    times = step_times(t0, t1, p.dt)
    for ta, tb in zip(times[:-1], times[1:]):
        xi, y = p.raw_step(xi, y, ta, tb - ta, d)
    return xi, y


def flow(s: HybridState, p: FlowParams, d: DisturbanceSignal, t_target: float) -> HybridState:
    """Continuous dynamics from s.t to t_target (no jumps)."""
    if t_target < s.t:
        raise ValueError("t_target must not precede the state time")
    if t_target == s.t:
        return s
    xi, y = flow_raw(p, s.x.interior.copy(), s.y, s.t, t_target, d)
    return _wrap(p, xi, y, t_target)


def apply_jump(s: HybridState, p: ExampleParams, d21: Optional[Poly] = None, d22: float = 0.0) -> HybridState:
    """Impulsive map x+ = alpha x + beta y + d21, y+ = int gamma x + delta y + d22."""
    z = s.x.z
    x = s.x.values
    xp = p.alpha_poly(z) * x + p.beta_poly(z) * s.y
    if d21 is not None and not d21.is_zero:
        xp = xp + d21(z)
    xp = np.asarray(xp, dtype=float) * np.ones_like(z)
    xp[0] = xp[-1] = 0.0
    g = p.gamma_poly(z) * np.ones_like(z) * x
    yp = s.x.h * float(np.sum(g[1:-1])) + p.delta_jump * s.y + d22
    return HybridState(s.x.with_values(xp), float(yp), s.t)


# --------------------------------------------------------------------------
# functionals

def v_eval(s: HybridState) -> float:
    return h01_norm(s.x) ** 2 + s.y**2


def w_eval(s: HybridState) -> float:
    return s.y**2 - h01_norm(s.x) ** 2


def u_eval(s: HybridState) -> float:
    return l2_norm(s.x) ** 2 + s.y**2


def in_gplus(s: HybridState) -> bool:
    """W >= 0; the boundary W = 0 is assigned to G+."""
    return w_eval(s) >= 0.0


def lie_derivative_fd(fun, s: HybridState, p: FlowParams, d: DisturbanceSignal,
                      dt_probe: float = 1e-6) -> float:
    """One-sided second-order difference (-3f0 + 4f1 - f2) / (2h) along two probe steps."""
    probe = FlowParams(p.example, p.n, dt_probe, "imex_cn")
    s1 = step_flow(s, probe, d, dt_probe)
    s2 = step_flow(s1, probe, d, dt_probe)
    return (-3.0 * fun(s) + 4.0 * fun(s1) - fun(s2)) / (2.0 * dt_probe)


def u_dot_bound(s: HybridState, p: FlowParams, d: DisturbanceSignal, eps: float) -> float:
    """zeta^T (A0_tilde + eps I) zeta + |xi|^2 / eps with zeta = (|x|_L2, |y|)."""
    At = build_Atilde0(p.example)
    u, v = l2_norm(s.x), abs(s.y)
    p11, p12 = d.d1(s.t)
    xi_sq = (l2_norm_poly(d.shape11, p.l) * p11) ** 2 + p12**2
    return At.quad(u, v) + eps * (u * u + v * v) + xi_sq / eps


def u_dot_fd(s, p, d, dt_probe=1e-6) -> float:
    return lie_derivative_fd(u_eval, s, p, d, dt_probe)


def u_dot_residual(s: HybridState, p: FlowParams, d: DisturbanceSignal,
                   dt_probe: float = 1e-6, eps: float = 0.1) -> float:
    """Estimated U-dot minus its upper bound; nonpositive up to discretization error."""
    return u_dot_fd(s, p, d, dt_probe) - u_dot_bound(s, p, d, eps)


def w_dot_fd(s, p, d, dt_probe=1e-6) -> float:
    return lie_derivative_fd(w_eval, s, p, d, dt_probe)


def v_dot_fd(s, p, d, dt_probe=1e-6) -> float:
    return lie_derivative_fd(v_eval, s, p, d, dt_probe)


def jump_bound(s: HybridState, ex: ExampleParams, B0, B1, kappa: float, eps: float,
               mu_norm: float = 0.0) -> float:
    """zeta^T (B0 + eps B1) zeta + kappa |mu|^2 with zeta = (|x|_{H0^1}, |y|)."""
    u, v = h01_norm(s.x), abs(s.y)
    return (B0 + B1.scale(eps)).quad(u, v) + kappa * mu_norm**2


# --------------------------------------------------------------------------
# jump operator spectrum

def jump_matvec(ex: ExampleParams, n: int):
    h = ex.l / (n + 1)
    zi = grid_nodes(ex.l, n)[1:-1]
    al = ex.alpha_poly(zi) * np.ones(n)
    be = ex.beta_poly(zi) * np.ones(n)
    ga = ex.gamma_poly(zi) * np.ones(n)
    de = ex.delta_jump

    def mv(v):
        x, y = v[:-1], v[-1]
        out = np.empty_like(v)
        out[:-1] = al * x + be * y
        out[-1] = h * np.dot(ga, x) + de * y
        return out

    return mv


def jump_matrix(ex: ExampleParams, n: int) -> np.ndarray:
    """Dense matrix of the discretized jump operator on (interior x, y)."""
    mv = jump_matvec(ex, n)
    eye = np.eye(n + 1)
    return np.column_stack([mv(eye[:, j]) for j in range(n + 1)])


def _power(mv, v, tol, maxiter):
    lam_prev = None
    for it in range(1, maxiter + 1):
        w = mv(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0, True
        v = w / lam
        if lam_prev is not None and abs(lam - lam_prev) <= tol * max(1.0, lam):
            return lam, True
        lam_prev = lam
    return lam, False


def jump_spectral_radius(ex: ExampleParams, n: int, tol: float = 1e-10,
                         maxiter: int = 100_000) -> float:
    """Spectral radius of the discretized jump operator by power iteration.

    Falls back to iterating the squared operator when the plain iteration
    stalls (e.g. a +-lambda pair of equal modulus).
    """
    if n < 3:
        raise ValueError("need at least 3 interior nodes")
    mv = jump_matvec(ex, n)
    rng = np.random.default_rng(12345)
    v0 = 1.0 + 0.1 * rng.standard_normal(n + 1)
    v0 /= np.linalg.norm(v0)
    lam, ok = _power(mv, v0, tol, maxiter)
    if ok:
        return lam
    lam2, ok = _power(lambda v: mv(mv(v)), v0, tol, maxiter)
    if ok:
        return math.sqrt(lam2)
    raise ConvergenceError(f"power iteration did not converge in {maxiter} steps (last {lam:.6g})")
