"""One test per acceptance criterion; each prints a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from impulsive_iss.certificate import (
    build_A0,
    build_B0,
    build_B1,
    certify,
    kappa_eps,
    worked_example_params,
)
from impulsive_iss.comparison import RateSet, f_integral, f_inverse, linear, power, tabulated
from impulsive_iss.config import default_disturbance, scale_to_level
from impulsive_iss.functionspace import (
    GridFunction,
    Poly,
    discrete_friedrichs_constant,
    friedrichs_check,
    h01_norm,
    h01_norm_poly,
)
from impulsive_iss.harness import (
    all_gplus_inter_jump,
    generate_schedule,
    instability_probe,
    observed_order,
    run_trajectory,
    verify_envelope,
    verify_gplus_invariance,
    verify_iss_bound,
    verify_lemma1,
)
from impulsive_iss.pde_ode import (
    NO_DISTURBANCE,
    DisturbanceSignal,
    FlowParams,
    HybridState,
    TimeProfile,
    apply_jump,
    flow,
    jump_bound,
    u_dot_residual,
    v_eval,
)

from .conftest import ACCEPTANCE_LINES

PI = math.pi
EX = worked_example_params()


def report(k, ok, msg):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {msg}"
    ACCEPTANCE_LINES.append((k, line))
    print(line)
    return ok


@pytest.fixture(scope="module")
def cert():
    return certify(EX)


def entries(m):
    return np.array([[m.a11, m.a12], [m.a12, m.a22]])


def test_criterion_1_certificate_reproduction():
    t0 = time.perf_counter()
    rep = certify(EX)
    A0, B0 = entries(build_A0(EX)), entries(build_B0(EX))
    elapsed = time.perf_counter() - t0
    checks = {
        "A0": np.max(np.abs(A0 - [[-2, 0.3214875], [0.3214875, 0.5]])) <= 1e-7,
        "B0": np.max(np.abs(B0 - [[1.007853982, 0.02215567314], [0.02215567314, 0.0625]])) <= 1e-7,
        "lam_max_A0": abs(rep.lam_max_A0 - 0.54067976) <= 1e-6,
        "lam_max_B0": abs(rep.lam_max_B0 - 1.0083729) <= 1e-6,
        "sigma": abs(rep.sigma - 1.1146653) <= 1e-6,
        "vartheta": abs(rep.vartheta - 0.42851243) <= 1e-6,
        "case": rep.case_label == "b",
        "lower": abs(rep.lower - 0.01945822) <= 1e-6,
        "upper": abs(rep.upper - 1.0812185) <= 1e-4,
        "runtime": elapsed < 1.0,
    }
    # The quoted vectors carry a negative second entry, but A0 and B0 have positive
    # off-diagonals, so their top eigenvectors have same-signed entries. Compare the
    # entries up to sign, and separately confirm each is an eigenvector.
    for name, v, ref, m, lam in (("evec_A0", rep.evec_A0, (0.12553504, -0.9920891862), A0, rep.lam_max_A0),
                                 ("evec_B0", rep.evec_B0, (0.99972578, -0.023417096), B0, rep.lam_max_B0)):
        checks[name] = (np.max(np.abs(np.abs(v) - np.abs(ref))) <= 1e-6
                        and np.max(np.abs(m @ v - lam * v)) <= 1e-12)
    failed = [k for k, v in checks.items() if not v]
    ok = report(1, not failed, f"{len(checks) - len(failed)}/{len(checks)} quantities match, "
                f"upper {rep.upper:.7f}, {elapsed * 1e3:.1f} ms" + (f", failed {failed}" if failed else ""))
    assert ok, failed


def test_criterion_2_lemma1_contraction(cert):
    t0 = time.perf_counter()
    s0 = HybridState.from_functions(lambda z: 2 * np.sin(z), 2.0, PI, 200)
    sched = generate_schedule(("uniform", 0.5), cert.window, 20.0)
    rec = run_trajectory(EX, s0, sched, n=200, dt=2e-4)
    l1 = verify_lemma1(rec, cert.rates, cert.window.margin, 1e-4)
    env = verify_envelope(rec, cert.rates, cert.alpha2, cert.window.margin, 1e-4)
    elapsed = time.perf_counter() - t0
    ok = (sched.admissible and l1.passed and not l1.vacuous and l1.worst_slack > 0
          and env.passed and not env.vacuous and elapsed < 60)
    report(2, ok, f"{len(rec.jump_rows())} jumps, lemma1 worst slack {l1.worst_slack:.4f}, "
           f"envelope worst log slack {env.worst_slack:.4f}, {elapsed:.1f} s")
    assert ok


def test_criterion_3_gplus_invariance(cert):
    t0 = time.perf_counter()
    s0 = HybridState.from_functions(lambda z: 0 * z, 1.0, PI, 200)
    sched = generate_schedule(("uniform", 0.5), cert.window, 20.0)
    rec = run_trajectory(EX, s0, sched, n=200, dt=2e-4)
    literal = all_gplus_inter_jump(rec, 1e-4)
    segwise = verify_gplus_invariance(rec, cert.chi_slope, floor=1e-4)
    elapsed = time.perf_counter() - t0
    ok = literal.passed and elapsed < 60
    first = literal.details["first_bad"]
    where = "" if first is None else f", first G- sample at t={rec.t[first]:.2f} (norm {rec.norm[first]:.3g})"
    report(3, ok, f"{-int(literal.worst_slack)} of {literal.details['checked']} inter-jump samples above 1e-4 "
           f"outside G+{where}; per-segment invariance {'holds' if segwise.passed else 'fails'}, "
           f"{elapsed:.1f} s")
    assert segwise.passed
    assert ok, "inter-jump samples leave G+ after jumps (see decisions ledger)"


def test_criterion_4_empirical_iss(cert):
    t0 = time.perf_counter()
    sched = generate_schedule("random", cert.window, 20.0, seed=7)
    shape = default_disturbance(EX.l)
    recs = []
    for level in (0.0, 0.01, 0.05):
        d = scale_to_level(shape, level, EX.l) if level > 0 else NO_DISTURBANCE
        s0 = HybridState.from_functions(lambda z: 2 * np.sin(z), 2.0, PI, 200)
        recs.append(run_trajectory(EX, s0, sched, d, n=200, dt=2e-4))
    rep = verify_iss_bound(recs)
    elapsed = time.perf_counter() - t0
    det = rep.details
    levels_ok = np.allclose(det["levels"], [0.0, 0.01, 0.05], atol=1e-12)
    ok = sched.admissible and levels_ok and rep.passed and det["zero_ratio"][0] < 1e-3 and elapsed < 300
    sups = ", ".join(f"{s:.3g}" for s in det["long_run_sup"])
    report(4, ok, f"{len(sched.taus)} random jumps, long-run sups [{sups}], "
           f"d=0 terminal ratio {det['zero_ratio'][0]:.2e}, {elapsed:.1f} s (empirical)")
    assert ok


def test_criterion_5_separate_instability():
    t0 = time.perf_counter()
    rep = instability_probe(EX, n=100, dt=1e-3, horizon=20.0, factor=10.0)
    elapsed = time.perf_counter() - t0
    radius = rep.details["spectral_radius"]
    ok = (rep.details["growth_time"] is not None and rep.details["growth_time"] < 20
          and abs(radius - 1.0) <= 1e-8 and elapsed < 60)
    report(5, ok, f"flow exceeds 10x at t={rep.details['growth_time']:.2f}, "
           f"jump spectral radius {radius:.12f}, {elapsed:.1f} s")
    assert ok


def test_criterion_6_discrete_friedrichs():
    ns = (49, 99, 199)
    worst = 0.0
    vals = []
    for n in ns:
        h = PI / (n + 1)
        lam = eigh_tridiagonal(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2), eigvals_only=True,
                               select="i", select_range=(0, 0))[0]
        ratio, bound = friedrichs_check(GridFunction.from_function(np.sin, PI, n))
        closed = (4 / h**2) * math.sin(PI * h / (2 * PI)) ** 2
        assert discrete_friedrichs_constant(PI, n) == pytest.approx(closed, rel=1e-14)
        worst = max(worst, abs(lam - closed), abs(ratio - closed))
        vals.append(closed)
    order = observed_order([PI / (n + 1) for n in ns], vals)
    # against the continuum constant pi^2 / l^2 = 1 directly
    errs = [abs(v - 1.0) for v in vals]
    order = min(order, *(math.log(errs[i] / errs[i + 1], (ns[i + 1] + 1) / (ns[i] + 1)) for i in range(2)))
    ok = worst <= 1e-9 and order >= 1.9
    report(6, ok, f"max deviation {worst:.2e}, observed order {order:.3f}")
    assert ok


def _err(a, b):
    return math.hypot(h01_norm(a.x.with_values(a.x.values - b.x.values)), a.y - b.y)


@pytest.mark.parametrize("scheme,nominal", [("imex_euler", 1), ("imex_cn", 2)])
def test_criterion_7_integrator_convergence(scheme, nominal):
    s0 = HybridState.from_functions(np.sin, 1.0, PI, 200)
    dts = (0.02, 0.01, 0.005)

    def run(dt):
        return flow(s0, FlowParams(EX, 200, dt, scheme), NO_DISTURBANCE, 1.0)

    ref = run(dts[-1] / 16)
    errs = [_err(run(dt), ref) for dt in dts]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = all(abs(p - nominal) <= 0.2 * nominal for p in orders)
    ratios = ", ".join(f"{errs[i] / errs[i + 1]:.3f}" for i in range(2))
    report(7, ok, f"{scheme} error ratios [{ratios}], observed orders "
           f"[{orders[0]:.3f}, {orders[1]:.3f}] vs nominal {nominal}")
    assert ok


def test_criterion_8_flow_and_jump_bounds():
    rng = np.random.default_rng(1)
    p = FlowParams(EX, 100, 1e-3)
    B0, B1 = build_B0(EX), build_B1(EX)
    bump = Poly([0, PI, -1])
    worst_u, worst_j, violations = -math.inf, -math.inf, 0
    for _ in range(1000):
        c = rng.normal(size=5) / np.arange(1, 6) ** 2 * rng.uniform(0, 3)
        s = HybridState.from_functions(lambda z: sum(c[k] * np.sin((k + 1) * z) for k in range(5)),
                                       2 * rng.normal(), PI, 100, t=rng.uniform(0, 10))
        d = DisturbanceSignal(bump, TimeProfile("sinusoid", rng.uniform(-1, 1), 2.0, 0.3),
                              TimeProfile("constant", rng.uniform(-1, 1)))
        worst_u = max(worst_u, u_dot_residual(s, p, d, eps=0.1))
        eps = float(rng.choice([0.01, 0.1, 1.0]))
        sh, m2 = bump * rng.uniform(-1, 1), rng.uniform(-1, 1)
        mu = math.hypot(h01_norm_poly(sh, PI), m2)
        res = v_eval(apply_jump(s, EX, sh, m2)) - jump_bound(s, EX, B0, B1, kappa_eps(EX, eps), eps, mu)
        worst_j = max(worst_j, res)
        violations += res > 0
    ok = worst_u <= 1e-3 and violations == 0
    report(8, ok, f"worst U-dot residual {worst_u:.4f}, worst jump residual {worst_j:.4f}, "
           f"{violations} jump violations over 1000 states")
    assert ok


def test_criterion_9_comparison_round_trips():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst_rt, worst_add = 0.0, 0.0
    sets = [RateSet(linear(a), linear(b), linear(1), linear(1))
            for a, b in rng.uniform(0.01, 5.0, size=(20, 2))]
    sets.append(RateSet(tabulated([(0.5, 0.3), (2.0, 1.5), (7.0, 9.0)]), power(0.7, 1.3),
                        linear(1), linear(1)))
    sets.append(RateSet(power(0.25, 2.0), linear(0.8), linear(1), linear(1)))
    for rs in sets:
        for _ in range(10):
            s, q = sorted(10.0 ** rng.uniform(-6, 6, size=2))
            if q / s < 1.001:
                continue
            F = f_integral(rs, s, q)
            worst_rt = max(worst_rt, abs(f_inverse(rs, q, F) - s) / s)
            z = s * (q / s) ** rng.uniform(0.05, 0.95)
            worst_add = max(worst_add, abs(f_integral(rs, s, z) + f_integral(rs, z, q) - F) / max(1.0, abs(F)))
    elapsed = time.perf_counter() - t0
    ok = worst_rt <= 1e-8 and worst_add <= 1e-10 and elapsed < 10
    report(9, ok, f"round-trip rel error {worst_rt:.2e}, additivity error {worst_add:.2e}, {elapsed:.1f} s")
    assert ok
