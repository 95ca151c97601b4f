"""
Jump schedules, trajectory recording, and trajectory-level checks of the
dwell-time argument.

A :class:`TrajectoryRecord` is a flat table of rows. Regular rows are taken
every ``sample_dt``; each jump contributes a pair of rows at the same time
holding the left limit and the right limit (in that order), both tagged with
the jump index. The checkers below work on those rows:

- ``verify_lemma1``: across runs of jumps where the state norm stays above a
  threshold r, the Lyapunov value after each jump must lose at least
  ``margin`` of F per jump;
- ``verify_envelope``: the same values stay under the geometric envelope
  F^-1(v(tau_p+), (l-p) margin);
- ``verify_gplus_invariance``: within a flow segment, a state in G+ above the
  threshold never returns to G-;
- ``verify_iss_bound``: empirical long-run bounds over disturbance levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import comparison as cmp
from .certificate import ExampleParams
from .comparison import DwellWindow, RateFunction, RateSet
from .functionspace import h01_norm, l2_norm
from .pde_ode import (
    NO_DISTURBANCE,
    DisturbanceSignal,
    FlowParams,
    HybridState,
    apply_jump,
    flow_raw,
    jump_spectral_radius,
    _wrap,
)

DEFAULT_FLOOR = 1e-4


# --------------------------------------------------------------------------
# schedules

@dataclass(frozen=True)
class Schedule:
    taus: tuple
    horizon: float
    spec: str = "explicit"
    window: Optional[DwellWindow] = None
    admissible: bool = True
    empty: bool = False

    def __post_init__(self):
        t = np.asarray(self.taus, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("jump times must be strictly increasing")

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(np.asarray(self.taus, dtype=float))

    def jumps_before(self, t_end: float) -> list[float]:
        return [float(t) for t in self.taus if t < t_end]


def _admissible(taus, window):
    if window is None:
        return True
    gaps = np.diff(np.asarray(taus, dtype=float))
    tol = 1e-12 * max(1.0, window.theta2)
    return bool(np.all((gaps >= window.theta1 - tol) & (gaps <= window.theta2 + tol)))


def generate_schedule(spec, window: Optional[DwellWindow] = None, horizon: float = 20.0,
                      seed: int = 0, tau0: float = 0.0) -> Schedule:
    """Jump times from a spec: ``("uniform", T)``, ``"random"`` or ``("explicit", [...])``.

    Uniform and random schedules start at ``tau0`` and include every time up
    to and including ``horizon``; random gaps are drawn uniformly from
    [theta1, theta2] with ``numpy.random.default_rng(seed)``.
    """
    kind, arg = (spec, None) if isinstance(spec, str) else (spec[0], spec[1])
    if kind == "uniform":
        T = float(arg)
        if not T > 0:
            raise ValueError("uniform gap must be positive")
        if horizon - tau0 < T:
            return Schedule((), horizon, f"uniform({T})", window, True, True)
        k = np.arange(0, int(math.floor((horizon - tau0) / T + 1e-9)) + 1)
        taus = tuple(float(tau0 + i * T) for i in k)
        return Schedule(taus, horizon, f"uniform({T})", window, _admissible(taus, window))
    if kind == "random":
        if window is None:
            raise ValueError("random schedules need a dwell window")
        if horizon - tau0 < window.theta1:
            return Schedule((), horizon, f"random(seed={seed})", window, True, True)
        rng = np.random.default_rng(seed)
        taus = [float(tau0)]
        while True:
            nxt = taus[-1] + float(rng.uniform(window.theta1, window.theta2))
            if nxt > horizon:
                break
            taus.append(nxt)
        return Schedule(tuple(taus), horizon, f"random(seed={seed})", window, True)
    if kind == "explicit":
        taus = tuple(float(t) for t in arg)
        return Schedule(taus, horizon, "explicit", window, _admissible(taus, window), len(taus) == 0)
    raise ValueError(f"unknown schedule kind {kind!r}")


# --------------------------------------------------------------------------
# trajectory records

COLUMNS = ("t", "y", "l2_x", "h01_x", "V", "W", "U", "region", "jump_index")


@dataclass
class TrajectoryRecord:
    """Row table of a simulated trajectory; ``jump_index`` is -1 on regular rows."""

    t: np.ndarray
    y: np.ndarray
    l2_x: np.ndarray
    h01_x: np.ndarray
    jump_index: np.ndarray
    d: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def V(self) -> np.ndarray:
        return self.h01_x**2 + self.y**2

    @property
    def W(self) -> np.ndarray:
        return self.y**2 - self.h01_x**2

    @property
    def U(self) -> np.ndarray:
        return self.l2_x**2 + self.y**2

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(self.V)

    @property
    def gplus(self) -> np.ndarray:
        return self.W >= 0.0

    def __len__(self):
        return self.t.size

    def jump_rows(self) -> list[tuple[int, int, int]]:
        """(k, left row, right row) for each recorded jump."""
        idx = np.flatnonzero(self.jump_index >= 0)
        out = []
        for a, b in zip(idx[::2], idx[1::2]):
            out.append((int(self.jump_index[a]), int(a), int(b)))
        return out

    @property
    def jumps(self) -> list[dict]:
        V, W = self.V, self.W
        return [dict(k=k, tau=float(self.t[a]), V_left=float(V[a]), V_right=float(V[b]),
                     W_sign_left=int(np.sign(W[a])), W_sign_right=int(np.sign(W[b])))
                for k, a, b in self.jump_rows()]

    def v_after_jumps(self) -> np.ndarray:
        V = self.V
        return np.array([V[b] for _, _, b in self.jump_rows()])

    def segment_ids(self) -> np.ndarray:
        """Row -> index of the flow segment it belongs to (left limits close a segment)."""
        seg = np.zeros(self.t.size, dtype=int)
        cur = 0
        ji = self.jump_index
        for i in range(self.t.size):
            if ji[i] >= 0 and i > 0 and ji[i - 1] == ji[i]:
                cur += 1  # right limit opens a new segment
            seg[i] = cur
        return seg

    def equals(self, other: "TrajectoryRecord") -> bool:
        return (all(np.array_equal(getattr(self, c), getattr(other, c))
                    for c in ("t", "y", "l2_x", "h01_x", "jump_index"))
                and self.d == other.d)


class _Recorder:
    def __init__(self):
        self.rows = []

    def add(self, p: FlowParams, xi, y, t, k=-1):
        s = _wrap(p, xi, y, t)
        self.rows.append((t, float(y), l2_norm(s.x), h01_norm(s.x), k))

    def build(self, d, meta) -> TrajectoryRecord:
        if self.rows:
            cols = list(zip(*self.rows))
        else:
            cols = [()] * 5
        return TrajectoryRecord(
            t=np.array(cols[0], dtype=float), y=np.array(cols[1], dtype=float),
            l2_x=np.array(cols[2], dtype=float), h01_x=np.array(cols[3], dtype=float),
            jump_index=np.array(cols[4], dtype=int), d=d, meta=meta)


def _sample_times(t0, horizon, sample_dt, jump_set):
    n = int(math.floor((horizon - t0) / sample_dt + 1e-9))
    ts = [t0 + i * sample_dt for i in range(n + 1)]
    if ts[-1] < horizon - 1e-12 * max(1.0, horizon):
        ts.append(horizon)
    tol = 1e-9 * sample_dt
    return [t for t in ts if all(abs(t - j) > tol for j in jump_set)]


def run_trajectory(ex: ExampleParams, s0: HybridState, sched: Schedule,
                   d: DisturbanceSignal = NO_DISTURBANCE, sample_dt: float = 0.01,
                   flow_params: Optional[FlowParams] = None, n: Optional[int] = None,
                   dt: float = 2e-4, scheme: str = "imex_cn", return_state: bool = False):
    """Simulate flow segments and jumps over [s0.t, sched.horizon].

    Jumps at times < horizon are applied; a jump exactly at the horizon would
    only affect later times and is left out. With ``return_state`` the final
    :class:`HybridState` is returned as well.
    """
    p = flow_params or FlowParams(ex, n or s0.x.n, dt, scheme)
    if s0.x.n != p.n:
        raise ValueError("initial state grid does not match the flow parameters")
    d.check_domain(ex.l)
    horizon = sched.horizon
    t0 = s0.t
    jumps = [(k, tau) for k, tau in enumerate(sched.taus) if t0 <= tau < horizon]
    jump_times = [tau for _, tau in jumps]
    events = [(t, 1, None) for t in _sample_times(t0, horizon, sample_dt, jump_times)]
    events += [(tau, 0, k) for k, tau in jumps]
    events.sort(key=lambda e: (e[0], e[1]))

    rec = _Recorder()
    xi, y, t = s0.x.interior.copy(), float(s0.y), t0
    for te, kind, k in events:
        if te > t:
            xi, y = flow_raw(p, xi, y, t, te, d)
            t = te
        if kind == 1:
            rec.add(p, xi, y, t)
            continue
        rec.add(p, xi, y, t, k)
        mu1, mu2 = d.d2(k)
        s = apply_jump(_wrap(p, xi, y, t), ex, mu1, mu2)
        xi, y = s.x.interior.copy(), s.y
        rec.add(p, xi, y, t, k)
    meta = dict(n=p.n, dt=p.dt, scheme=p.scheme, l=ex.l, h=p.h, horizon=horizon,
                sample_dt=sample_dt, schedule=sched.spec, taus=list(sched.taus),
                admissible=sched.admissible, system=params_snapshot(ex))
    out = rec.build(d.sup_norm(ex.l), meta)
    if return_state:
        return out, _wrap(p, xi, y, t)
    return out


def params_snapshot(ex: ExampleParams) -> dict:
    return dict(a=ex.a, c=ex.c, l=ex.l, B=list(ex.B_poly.coeffs), D=list(ex.D_poly.coeffs),
                alpha=list(ex.alpha_poly.coeffs), beta=list(ex.beta_poly.coeffs),
                gamma=list(ex.gamma_poly.coeffs), delta_jump=ex.delta_jump,
                kappa1=ex.kappa1, kappa3=ex.kappa3)


# --------------------------------------------------------------------------
# verification

@dataclass
class CheckReport:
    name: str
    passed: bool
    vacuous: bool = False
    worst_slack: float = math.inf
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = " (vacuous)" if self.vacuous else ""
        return f"{status} {self.name}: worst slack {self.worst_slack:.6g}, tol {self.tolerance:.3g}{extra}"

    def to_dict(self) -> dict:
        return dict(name=self.name, passed=self.passed, vacuous=self.vacuous,
                    worst_slack=self.worst_slack, tolerance=self.tolerance, details=self.details)


def threshold(chi_slope: float, d: float, floor: float = DEFAULT_FLOOR) -> float:
    """Norm threshold r: 2 chi d for d > 0, else an absolute floor."""
    return 2.0 * chi_slope * d if d > 0 else floor


def discretization_tolerance(rec: TrajectoryRecord) -> float:
    """10 (dt + h^2) times the largest logarithmic rate of V between regular rows."""
    dt = rec.meta.get("dt", 0.0)
    h = rec.meta.get("h")
    if h is None:
        n = rec.meta.get("n")
        l = rec.meta.get("l", math.pi)
        h = l / (n + 1) if n else 0.0
    V = rec.V
    ji = rec.jump_index
    rate = 0.0
    for i in range(1, V.size):
        if ji[i] >= 0 and ji[i - 1] == ji[i]:
            continue  # across a jump
        dtt = rec.t[i] - rec.t[i - 1]
        if dtt > 0 and V[i] > 0 and V[i - 1] > 0:
            rate = max(rate, abs(math.log(V[i] / V[i - 1])) / dtt)
    return 10.0 * (dt + h * h) * rate


def _ranges_above(rec: TrajectoryRecord, r: float) -> list[list[int]]:
    """Maximal runs of consecutive jumps p..m with norm >= r on (tau_p, tau_m]."""
    norm = rec.norm
    jr = rec.jump_rows()
    if not jr:
        return []
    ranges = []
    cur = [0]
    for j in range(1, len(jr)):
        _, _, right_prev = jr[j - 1]
        _, left, _ = jr[j]
        ok = bool(np.all(norm[right_prev:left + 1] >= r))
        if ok:
            cur.append(j)
        else:
            ranges.append(cur)
            cur = [j]
    ranges.append(cur)
    return [c for c in ranges if len(c) >= 2]


def verify_lemma1(rec: TrajectoryRecord, rates: RateSet, margin: float, r: float,
                  tol: Optional[float] = None) -> CheckReport:
    """F(v(tau_l+), v(tau_p+)) >= margin (l - p) on every above-threshold jump range."""
    tol = discretization_tolerance(rec) if tol is None else tol
    vplus = rec.v_after_jumps()
    ranges = _ranges_above(rec, r)
    worst = math.inf
    where = None
    for rg in ranges:
        for i, p in enumerate(rg):
            for l in rg[i + 1:]:
                if vplus[l] <= 0 or vplus[p] <= 0:
                    continue
                slack = cmp.f_integral(rates, vplus[l], vplus[p]) - margin * (l - p)
                if slack < worst:
                    worst, where = slack, (p, l)
    vac = not ranges
    return CheckReport("lemma1", vac or worst >= -tol, vac, worst, tol,
                       dict(ranges=[(rg[0], rg[-1]) for rg in ranges], worst_pair=where, threshold=r))


def verify_envelope(rec: TrajectoryRecord, rates: RateSet, alpha2: RateFunction, margin: float,
                    r: float = DEFAULT_FLOOR, tol: Optional[float] = None) -> CheckReport:
    """v(tau_l+) <= F^-1(alpha2(|state(tau_p+)|), (l - p) margin) on above-threshold ranges."""
    tol = discretization_tolerance(rec) if tol is None else tol
    vplus = rec.v_after_jumps()
    ranges = _ranges_above(rec, r)
    worst = math.inf
    first_violation = None
    for rg in ranges:
        p = rg[0]
        s = math.sqrt(vplus[p])
        for l in rg[1:]:
            env = cmp.decay_envelope(rates, alpha2, s, margin, l - p)
            # relative slack, comparable with the log-scale tolerance
            slack = math.log(env / vplus[l]) if vplus[l] > 0 else math.inf
            if slack < worst:
                worst = slack
            if slack < -tol and first_violation is None:
                first_violation = l
    vac = not ranges
    return CheckReport("envelope", first_violation is None, vac, worst, tol,
                       dict(first_violation=first_violation, threshold=r))


def verify_gplus_invariance(rec: TrajectoryRecord, chi_slope: float,
                            floor: float = DEFAULT_FLOOR, r: Optional[float] = None) -> CheckReport:
    """Within each flow segment: once in G+ above the threshold, stay in G+."""
    r = threshold(chi_slope, rec.d, floor) if r is None else r
    seg = rec.segment_ids()
    gp = rec.gplus
    norm = rec.norm
    violations = []
    entered = {}
    checked = 0
    for i in range(rec.t.size):
        sid = seg[i]
        if norm[i] < r:
            continue
        checked += 1
        if gp[i]:
            entered[sid] = True
        elif entered.get(sid):
            violations.append(int(i))
    worst = -float(len(violations))
    return CheckReport("gplus_invariance", not violations, checked == 0, worst, 0.0,
                       dict(violations=violations[:20], n_violations=len(violations), threshold=r))


def all_gplus_above(rec: TrajectoryRecord, r: float) -> CheckReport:
    """Every row with norm >= r is in G+ (regular rows and both jump limits)."""
    mask = rec.norm >= r
    bad = np.flatnonzero(mask & ~rec.gplus)
    return CheckReport("all_gplus", bad.size == 0, not mask.any(), -float(bad.size), 0.0,
                       dict(first_bad=int(bad[0]) if bad.size else None, checked=int(mask.sum())))


def all_gplus_inter_jump(rec: TrajectoryRecord, r: float) -> CheckReport:
    """Every regular (inter-jump) row with norm >= r lies in G+."""
    mask = (rec.norm >= r) & (rec.jump_index < 0)
    bad = np.flatnonzero(mask & ~rec.gplus)
    return CheckReport("gplus_inter_jump", bad.size == 0, not mask.any(), -float(bad.size), 0.0,
                       dict(first_bad=int(bad[0]) if bad.size else None, checked=int(mask.sum())))


def verify_reach(rec: TrajectoryRecord, r: float) -> CheckReport:
    """Whether the trajectory enters the ball of radius r; there is no finite-time
    bound for this, so a miss is reported as not observed rather than failed."""
    inside = np.flatnonzero(rec.norm < r)
    seen = inside.size > 0
    return CheckReport("reach_ball", True, not seen, float(r - rec.norm.min()) if rec.t.size else 0.0, 0.0,
                       dict(status="entered" if seen else "not observed within horizon",
                            first_time=float(rec.t[inside[0]]) if seen else None, threshold=r))


def long_run_sup(rec: TrajectoryRecord, fraction: float = 0.25) -> float:
    """max state norm over the final ``fraction`` of the horizon."""
    t_end = rec.t[-1]
    t_start = rec.t[0] + (1.0 - fraction) * (t_end - rec.t[0])
    return float(np.max(rec.norm[rec.t >= t_start]))


def verify_iss_bound(recs: Sequence[TrajectoryRecord], gain_guess: Optional[Callable] = None,
                     fraction: float = 0.25, decay_ratio: float = 1e-3) -> CheckReport:
    """Empirical ISS checks over a family of runs with different disturbance levels.

    Always marked empirical: finitely many trajectories cannot certify ISS.
    """
    order = sorted(range(len(recs)), key=lambda i: recs[i].d)
    levels = [recs[i].d for i in order]
    sups = [long_run_sup(recs[i], fraction) for i in order]
    finite = all(math.isfinite(s) for s in sups)
    monotone = all(b >= a for a, b in zip(sups[:-1], sups[1:]))
    zero = [recs[i] for i in order if recs[i].d == 0]
    ratios = [float(r.norm[-1] / r.norm[0]) for r in zero if r.norm[0] > 0]
    decays = all(q < decay_ratio for q in ratios)
    gains_ok = True
    if gain_guess is not None:
        gains_ok = all(s <= gain_guess(dl) for dl, s in zip(levels, sups) if dl > 0)
    passed = finite and monotone and decays and gains_ok
    worst = min([decay_ratio - q for q in ratios] or [math.inf])
    return CheckReport("iss_bound", passed, len(recs) < 2, worst, 0.0,
                       dict(levels=levels, long_run_sup=sups, zero_ratio=ratios, finite=finite,
                            monotone=monotone, decays=decays, gains_ok=gains_ok,
                            empirical_only=True))


def instability_probe(ex: ExampleParams, n: int = 100, dt: float = 1e-3, horizon: float = 20.0,
                      factor: float = 10.0, scheme: str = "imex_cn") -> CheckReport:
    """Check that flow and jumps are each unstable on their own.

    (i) without jumps, the flow from (0, 1) exceeds ``factor`` times its initial norm
    before ``horizon``; (ii) the jump operator has spectral radius >= 1.
    """
    p = FlowParams(ex, n, dt, scheme)
    xi, y, t = np.zeros(n), 1.0, 0.0
    n0 = 1.0
    grew_at = None
    step = 0.05
    while t < horizon:
        t1 = min(t + step, horizon)
        xi, y = flow_raw(p, xi, y, t, t1, NO_DISTURBANCE)
        t = t1
        if _wrap(p, xi, y, t).norm() > factor * n0:
            grew_at = t
            break
    radius = jump_spectral_radius(ex, n)
    cont_unstable = grew_at is not None
    disc_unstable = radius >= 1.0 - 1e-8
    return CheckReport("instability_probe", cont_unstable and disc_unstable, False,
                       radius - 1.0, 1e-8,
                       dict(continuous="continuous dynamics unstable" if cont_unstable
                            else "continuous dynamics stable",
                            growth_time=grew_at,
                            discrete="discrete dynamics not asymptotically stable" if disc_unstable
                            else "discrete dynamics stable",
                            spectral_radius=radius))


def observed_order(hs: Sequence[float], values: Sequence[float]) -> float:
    """Convergence order from three refinement levels via successive differences.

    Solves (v1 - v2)/(v2 - v3) = (h1^p - h2^p)/(h2^p - h3^p) for p, which allows
    refinement ratios that are not exactly 2.
    """
    from scipy.optimize import brentq

    (h1, h2, h3), (v1, v2, v3) = hs, values
    q = (v1 - v2) / (v2 - v3)

    def g(p):
        return (h1**p - h2**p) / (h2**p - h3**p) - q

    return float(brentq(g, 0.05, 12.0))
