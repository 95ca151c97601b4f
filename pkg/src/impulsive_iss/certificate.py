"""
Dwell-time certificate for the coupled heat-equation / scalar-ODE impulsive system

    x_t = a^2 x_zz + Phi(x) + B(z) y + d11,     y' = c^2 y + int D x dz + d12,
    x(t+) = alpha x + beta y + d21,             y(t+) = int gamma x dz + delta y + d22,

with Dirichlet ends and Phi(s) = -kappa1 s - kappa3 s^3.

The certificate uses V = |x|_{H0^1}^2 + y^2 and the Chetaev function
W = y^2 - |x|_{H0^1}^2. Everything reduces to 2x2 symmetric matrices built
from norms of the coefficient polynomials:

- A0 bounds V-dot, B0 and B1 bound V after a jump, A0-tilde bounds the
  L2 energy U-dot;
- sigma and vartheta give the jump gain and flow decay on the two regions;
- the eigenvector of lambda_max(B0) decides which region the jump contracts
  from (case "a" or "b"), which fixes the admissible dwell-time window.

``certify`` runs the whole pipeline and returns a :class:`CertificateReport`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comparison import (
    SQUARE,
    DwellWindow,
    Linear,
    RateFunction,
    RateSet,
    linear,
    reciprocal_integral,
)
from .functionspace import Poly, c_norm_poly, h01_norm_poly, l2_norm_poly

PI = math.pi


class EmptyWindow(ValueError):
    """The admissible dwell-time interval is empty."""


@dataclass(frozen=True)
class ExampleParams:
    a: float
    c: float
    l: float
    B_poly: Poly = field(default_factory=Poly)
    D_poly: Poly = field(default_factory=Poly)
    alpha_poly: Poly = field(default_factory=lambda: Poly([1.0]))
    beta_poly: Poly = field(default_factory=Poly)
    gamma_poly: Poly = field(default_factory=Poly)
    delta_jump: float = 0.0
    kappa1: float = 0.0
    kappa3: float = 0.0
    epsilon: Optional[float] = None

    def __post_init__(self):
        for name in ("B_poly", "D_poly", "alpha_poly", "beta_poly", "gamma_poly"):
            v = getattr(self, name)
            if not isinstance(v, Poly):
                object.__setattr__(self, name, Poly(v))
        if not (self.a > 0 and self.c > 0 and self.l > 0):
            raise ValueError("a, c and l must be positive")
        if self.kappa1 < 0 or self.kappa3 < 0:
            raise ValueError("kappa1 and kappa3 must be nonnegative (Phi' <= 0, s Phi(s) <= 0)")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        for name in ("B_poly", "beta_poly"):
            if not getattr(self, name).vanishes_at_ends(self.l):
                raise ValueError(f"{name} must vanish at z=0 and z=l")

    def phi(self, s):
        return -self.kappa1 * s - self.kappa3 * s**3

    def dphi(self, s):
        return -self.kappa1 - 3.0 * self.kappa3 * s**2


def worked_example_params(**overrides) -> ExampleParams:
    """Parameters of the worked example: a=1, l=pi, c=0.5, Phi(s) = -s^3."""
    kw = dict(
        a=1.0, c=0.5, l=PI,
        B_poly=Poly([0.0, 0.05 * PI, -0.05]),
        D_poly=Poly([0.0, 0.05]),
        alpha_poly=Poly([1.0]),
        beta_poly=Poly([0.0]),
        gamma_poly=Poly([0.05]),
        delta_jump=0.25,
        kappa1=0.0, kappa3=1.0,
    )
    kw.update(overrides)
    return ExampleParams(**kw)


@dataclass(frozen=True)
class Sym2:
    a11: float
    a12: float
    a22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def quad(self, u: float, v: float) -> float:
        return self.a11 * u * u + 2.0 * self.a12 * u * v + self.a22 * v * v

    def __add__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.a11 + other.a11, self.a12 + other.a12, self.a22 + other.a22)

    def scale(self, k: float) -> "Sym2":
        return Sym2(k * self.a11, k * self.a12, k * self.a22)

    def op_norm(self) -> float:
        lo, hi, _ = eig_sym2(self)
        return max(abs(lo), abs(hi))


def eig_sym2(m: Sym2) -> tuple[float, float, np.ndarray]:
    """Closed-form eigenvalues and the unit eigenvector of the largest one.

    The eigenvector sign is fixed so its first nonzero component is positive.
    """
    mean = 0.5 * (m.a11 + m.a22)
    half = 0.5 * (m.a11 - m.a22)
    rad = math.hypot(half, m.a12)
    lam_max = mean + rad
    lam_min = mean - rad
    if rad == 0.0:
        v = np.array([1.0, 0.0])
    else:
        ang = 0.5 * math.atan2(m.a12, half)
        v = np.array([math.cos(ang), math.sin(ang)])
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return lam_min, lam_max, v


def region_form(v: np.ndarray) -> float:
    """v^T diag(-1, 1) v."""
    return float(v[1] ** 2 - v[0] ** 2)


def coupling(p: ExampleParams) -> float:
    """|B|_{H0^1} + (l/pi) |D|_{L2}."""
    return h01_norm_poly(p.B_poly, p.l) + p.l / PI * l2_norm_poly(p.D_poly, p.l)


def build_A0(p: ExampleParams) -> Sym2:
    return Sym2(-2.0 * PI**2 * p.a**2 / p.l**2, coupling(p), 2.0 * p.c**2)


def build_Atilde0(p: ExampleParams) -> Sym2:
    """Energy matrix for U = |x|_{L2}^2 + y^2."""
    return Sym2(-2.0 * PI**2 * p.a**2 / p.l**2,
                l2_norm_poly(p.B_poly + p.D_poly, p.l), 2.0 * p.c**2)


def build_B0(p: ExampleParams) -> Sym2:
    l, al, be, ga, de = p.l, p.alpha_poly, p.beta_poly, p.gamma_poly, p.delta_jump
    r2 = l**2 / PI**2
    b11 = c_norm_poly(al * al, l) + r2 * c_norm_poly(al * al.deriv(2), l) + r2 * l2_norm_poly(ga, l) ** 2
    b12 = l / PI * l2_norm_poly(al.deriv() * be.deriv() + ga * de, l) + l2_norm_poly(al * be.deriv(), l)
    b22 = de**2 + h01_norm_poly(be, l) ** 2
    return Sym2(b11, b12, b22)


def build_B1(p: ExampleParams) -> Sym2:
    l, al = p.l, p.alpha_poly
    r2 = l**2 / PI**2
    b11 = r2 * c_norm_poly(al.deriv(), l) + c_norm_poly(al, l) + r2 * l2_norm_poly(p.gamma_poly, l)
    b22 = h01_norm_poly(p.beta_poly, l) + abs(p.delta_jump)
    return Sym2(b11, 0.0, b22)


def kappa_eps(p: ExampleParams, eps: float) -> float:
    l = p.l
    k1 = 1.0 + (c_norm_poly(p.alpha_poly.deriv(), l) + h01_norm_poly(p.beta_poly, l)
                + c_norm_poly(p.alpha_poly, l)) / eps
    k2 = 1.0 + (abs(p.delta_jump) + l2_norm_poly(p.gamma_poly, l)) / eps
    return max(k1, k2)


def build_sigma_vartheta(p: ExampleParams) -> tuple[float, float]:
    B0 = build_B0(p)
    sigma = B0.a11 + 2.0 * B0.a12 + B0.a22
    vartheta = PI**2 * p.a**2 / p.l**2 - coupling(p) - p.c**2
    return sigma, vartheta


def dwell_bounds(case_label: str, sigma: float, vartheta: float,
                 lam_max_A0: float, lam_max_B0: float) -> tuple[float, float]:
    """Open interval (lower, upper) for the dwell times; lower is clamped at 0."""
    if case_label == "a":
        lower = math.log(sigma / 2.0) / vartheta if sigma > 0 else -math.inf
        upper = -math.log(lam_max_B0) / lam_max_A0 if lam_max_B0 > 0 else math.inf
    elif case_label == "b":
        lower = math.log(lam_max_B0) / vartheta if lam_max_B0 > 0 else -math.inf
        upper = math.log(2.0 / sigma) / lam_max_A0 if sigma > 0 else math.inf
    else:
        raise ValueError(f"no dwell window for case {case_label!r}")
    lower = max(lower, 0.0)
    if not lower < upper:
        raise EmptyWindow(f"empty dwell window: lower {lower:.6g} >= upper {upper:.6g}")
    return lower, upper


def induced_rates(case_label: str, eps: float, vartheta: float, sigma: float,
                  lam_max_A0: float, lam_max_B0: float, norm_B1: float,
                  chi_slope: float = 1.0) -> RateSet:
    """Linear rates produced by the estimates at a given epsilon."""
    jump_pad = eps * (1.0 + norm_B1)
    gplus_gain = sigma / 2.0 + jump_pad
    gminus_gain = lam_max_B0 + jump_pad
    if case_label == "a":
        psi1, psi2 = gplus_gain, gminus_gain
    else:
        psi1, psi2 = gminus_gain, gplus_gain
    return RateSet(
        phi1=linear(vartheta - eps),
        phi2=linear(lam_max_A0 + 2.0 * eps),
        psi1=linear(psi1),
        psi2=linear(psi2),
        chi=linear(chi_slope),
    )


def linear_window_bounds(rates: RateSet) -> tuple[float, float]:
    """(ln k1 / c1, -ln k2 / c2) for linear rates; the lower value is clamped at 0."""
    c1, c2 = rates.phi1.linear_slope, rates.phi2.linear_slope
    k1, k2 = rates.psi1.linear_slope, rates.psi2.linear_slope
    return max(math.log(k1) / c1, 0.0), -math.log(k2) / c2


@dataclass(frozen=True)
class A3A4Result:
    passed: bool
    slack_A3: float
    slack_A4: float
    witness_a: Optional[float] = None

    @property
    def worst_slack(self) -> float:
        return min(self.slack_A3, self.slack_A4)


def check_A3_A4(rates: RateSet, window: DwellWindow, grid=None) -> A3A4Result:
    """Dwell-time conditions on the rates for the given window.

    Linear rates are checked in closed form. Otherwise the integrals are
    evaluated on a geometric grid of a-values (default 1e-6 .. 1e6).
    """
    th1, th2, dlt = window.theta1, window.theta2, window.margin
    linear_case = all(r.linear_slope is not None
                      for r in (rates.phi1, rates.phi2, rates.psi1, rates.psi2))
    if linear_case:
        c1, c2 = rates.phi1.linear_slope, rates.phi2.linear_slope
        k1, k2 = rates.psi1.linear_slope, rates.psi2.linear_slope
        s3 = (th1 - dlt) - math.log(k1) / c1
        s4 = -math.log(k2) / c2 - (th2 + dlt)
        return A3A4Result(s3 >= 0 and s4 >= 0, s3, s4)
    if grid is None:
        grid = np.geomspace(1e-6, 1e6, 121)
    worst3 = worst4 = math.inf
    wit3 = wit4 = None
    for a in grid:
        i3 = reciprocal_integral(rates.phi1, a, float(rates.psi1(a)))
        i4 = reciprocal_integral(rates.phi2, float(rates.psi2(a)), a)
        s3 = (th1 - dlt) - i3
        s4 = i4 - (th2 + dlt)
        if s3 < worst3:
            worst3, wit3 = s3, a
        if s4 < worst4:
            worst4, wit4 = s4, a
    witness = wit3 if worst3 <= worst4 else wit4
    return A3A4Result(worst3 >= 0 and worst4 >= 0, worst3, worst4, float(witness))


@dataclass(frozen=True)
class Assumption1Bounds:
    """Linear bounds |phi_c(t)| <= xi_tau |x| + eta_tau |d1| on [0, tau], |g| <= xi |x| + eta |d2|."""

    tau: float
    xi_tau: RateFunction
    eta_tau: RateFunction
    xi: RateFunction
    eta: RateFunction


def flow_bound_slopes(growth: float, eps: float, tau: float) -> tuple[float, float]:
    """Slopes e^{g tau/2} and sqrt((e^{g tau}-1)/(eps g)) with g = growth rate."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    xi = math.exp(0.5 * growth * tau)
    gt = growth * tau
    # (e^{g tau} - 1)/g, continuous through g = 0
    ratio = tau if gt == 0 else math.expm1(gt) / growth
    return xi, math.sqrt(ratio / eps)


def assumption1_bounds(p: ExampleParams, tau: float, eps: Optional[float] = None) -> Assumption1Bounds:
    eps = p.epsilon if eps is None else eps
    if eps is None:
        raise ValueError("epsilon must be given (either on the params or explicitly)")
    _, lam_A0, _ = eig_sym2(build_A0(p))
    xi_t, eta_t = flow_bound_slopes(lam_A0 + eps, eps, tau)
    _, lam_B0, _ = eig_sym2(build_B0(p))
    jump_sq = lam_B0 + eps * build_B1(p).op_norm()
    # a zero jump matrix still needs a class-K bound; any positive slope is valid
    xi_j = math.sqrt(jump_sq) if jump_sq > 0 else math.sqrt(eps)
    return Assumption1Bounds(tau, linear(xi_t), linear(eta_t), linear(xi_j),
                             linear(math.sqrt(kappa_eps(p, eps))))


def reach_bound_R(bounds: Assumption1Bounds, alpha1: RateFunction, alpha2: RateFunction,
                  s: float, q: float) -> float:
    """R(s, q) = max(R1, R4, R6, s): bound on the state after re-entering the ball."""
    if s < 0 or q < 0:
        raise ValueError("R is defined on nonnegative arguments")
    xt, et, xi, eta = bounds.xi_tau, bounds.eta_tau, bounds.xi, bounds.eta
    R1 = xt(s) + et(q)
    R2 = xi(s) + eta(q)
    R3 = max(xi(R1) + eta(q), R2)
    R4 = xt(R3) + et(q)
    R5 = alpha1.inverse(alpha2(R3))
    R6 = xt(R5) + et(q)
    return float(max(R1, R4, R6, s))


@dataclass
class CertificateReport:
    params: ExampleParams
    A0: Sym2
    B0: Sym2
    B1: Sym2
    Atilde0: Sym2
    sigma: float
    vartheta: float
    epsilon: float
    kappa_eps: float
    lam_max_A0: float
    lam_max_B0: float
    lam_min_A0: float
    lam_min_B0: float
    evec_A0: np.ndarray
    evec_B0: np.ndarray
    form_A0: float
    form_B0: float
    case_label: str
    gates: dict
    failed_gates: list
    lower: Optional[float] = None
    upper: Optional[float] = None
    lower_eps: Optional[float] = None
    upper_eps: Optional[float] = None
    window: Optional[DwellWindow] = None
    rates: Optional[RateSet] = None
    chi_slope: Optional[float] = None
    alpha1: RateFunction = SQUARE
    alpha2: RateFunction = SQUARE

    @property
    def feasible(self) -> bool:
        return self.case_label != "infeasible"

    def to_dict(self) -> dict:
        def sym(m: Sym2):
            return [[m.a11, m.a12], [m.a12, m.a22]]

        out = {
            "case": self.case_label,
            "feasible": self.feasible,
            "failed_gates": list(self.failed_gates),
            "gates": dict(self.gates),
            "A0": sym(self.A0), "B0": sym(self.B0), "B1": sym(self.B1), "Atilde0": sym(self.Atilde0),
            "sigma": self.sigma, "vartheta": self.vartheta,
            "epsilon": self.epsilon, "kappa_eps": self.kappa_eps,
            "lam_max_A0": self.lam_max_A0, "lam_min_A0": self.lam_min_A0,
            "lam_max_B0": self.lam_max_B0, "lam_min_B0": self.lam_min_B0,
            "evec_A0": [float(v) for v in self.evec_A0],
            "evec_B0": [float(v) for v in self.evec_B0],
            "form_A0": self.form_A0, "form_B0": self.form_B0,
            "dwell_bounds": None if self.lower is None else [self.lower, self.upper],
            "dwell_bounds_eps": None if self.lower_eps is None else [self.lower_eps, self.upper_eps],
            "window": None if self.window is None else {
                "theta1": self.window.theta1, "theta2": self.window.theta2, "margin": self.window.margin},
            "chi_slope": self.chi_slope,
        }
        if self.rates is not None:
            out["rates"] = {k: getattr(self.rates, k).linear_slope
                            for k in ("phi1", "phi2", "psi1", "psi2", "chi")}
        return out


def _default_epsilon(slacks: list[float]) -> float:
    positive = [s for s in slacks if s > 0 and math.isfinite(s)]
    return min(positive) / 100.0 if positive else 1e-3


def certify(p: ExampleParams, epsilon: Optional[float] = None,
            margin: Optional[float] = None) -> CertificateReport:
    """Full certificate pipeline; infeasible inputs give a report naming the failed gates."""
    A0, B0, B1, At0 = build_A0(p), build_B0(p), build_B1(p), build_Atilde0(p)
    sigma, vartheta = build_sigma_vartheta(p)
    lmin_a, lmax_a, va = eig_sym2(A0)
    lmin_b, lmax_b, vb = eig_sym2(B0)
    form_a, form_b = region_form(va), region_form(vb)
    wdot_slack = p.c**2 + PI**2 * p.a**2 / p.l**2 - coupling(p)
    gates = {"vartheta": vartheta, "wdot": wdot_slack, "evec_A0": form_a}
    failed = [k for k, v in gates.items() if not v > 0]
    case = "a" if form_b >= 0 else "b"

    lower = upper = None
    if not failed:
        try:
            lower, upper = dwell_bounds(case, sigma, vartheta, lmax_a, lmax_b)
        except EmptyWindow:
            failed.append("window")

    eps = epsilon if epsilon is not None else p.epsilon
    if eps is None:
        slacks = list(gates.values())
        if lower is not None:
            slacks.append(upper - lower)
        slacks.append(2.0 - sigma if case == "b" else 1.0 - lmax_b)
        eps = _default_epsilon(slacks)
    if not eps > 0:
        raise ValueError("epsilon must be positive")

    report = CertificateReport(
        params=p, A0=A0, B0=B0, B1=B1, Atilde0=At0, sigma=sigma, vartheta=vartheta,
        epsilon=eps, kappa_eps=kappa_eps(p, eps),
        lam_max_A0=lmax_a, lam_max_B0=lmax_b, lam_min_A0=lmin_a, lam_min_B0=lmin_b,
        evec_A0=va, evec_B0=vb, form_A0=form_a, form_B0=form_b,
        case_label=case, gates=gates, failed_gates=failed, lower=lower, upper=upper,
    )
    report.chi_slope = max(math.sqrt(2.0) / eps, math.sqrt(report.kappa_eps / eps))
    if failed:
        report.case_label = "infeasible"
        return report
    if not eps < vartheta:
        report.failed_gates.append("epsilon")
        report.case_label = "infeasible"
        return report

    rates = induced_rates(case, eps, vartheta, sigma, lmax_a, lmax_b, B1.op_norm(), report.chi_slope)
    report.rates = rates
    lo_e, hi_e = linear_window_bounds(rates)
    report.lower_eps, report.upper_eps = lo_e, hi_e
    width = hi_e - lo_e
    if not width > 0:
        report.failed_gates.append("epsilon_window")
        report.case_label = "infeasible"
        return report
    dlt = width / 100.0 if margin is None else float(margin)
    if not (dlt > 0 and 4.0 * dlt < width):
        report.failed_gates.append("margin")
        report.case_label = "infeasible"
        return report
    report.window = DwellWindow(lo_e + 2.0 * dlt, hi_e - 2.0 * dlt, dlt)
    return report
