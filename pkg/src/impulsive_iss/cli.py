"""Command-line entry point: ``impulsive-iss {certify,simulate,verify,sweep,spectrum}``.

Exit status: 0 success / all checks pass, 1 infeasible or a failed check,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import harness as hn
from .certificate import CertificateReport, EmptyWindow, certify
from .config import (
    ConfigError,
    RunConfig,
    disturbance_at_level,
    load_config,
    parse_schedule_flag,
)
from .pde_ode import StepSizeError, jump_spectral_radius
from .recordio import format_trajectory

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
INJECT_MODES = ("flat", "upward", "gminus")


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        raise TypeError(f"not serializable: {type(o)}")

    return json.dumps(obj, indent=2, default=default, allow_nan=True)


def _emit(text: str, out: str | None):
    if out:
        try:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        except OSError as e:
            raise OSError(f"cannot write {out}: {e.strerror}") from None
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _certify(cfg: RunConfig) -> CertificateReport:
    return certify(cfg.system, cfg.epsilon, cfg.margin)


def _schedule(cfg: RunConfig, rep: CertificateReport) -> hn.Schedule:
    if cfg.schedule == "random" and rep.window is None:
        raise EmptyWindow("a random schedule needs a dwell window, but the certificate is infeasible")
    return hn.generate_schedule(cfg.schedule, rep.window, cfg.horizon, cfg.seed)


def _simulate(cfg: RunConfig, rep: CertificateReport, d=None) -> hn.TrajectoryRecord:
    sched = _schedule(cfg, rep)
    s0 = cfg.initial.state(cfg.system.l, cfg.n)
    rec = hn.run_trajectory(cfg.system, s0, sched, cfg.disturbance if d is None else d,
                            sample_dt=cfg.sample_dt, n=cfg.n, dt=cfg.dt, scheme=cfg.scheme)
    rec.meta["seed"] = cfg.seed
    return rec


# --------------------------------------------------------------------------
# subcommands

def cmd_certify(cfg: RunConfig, out=None) -> int:
    rep = _certify(cfg)
    _emit(_json(rep.to_dict()), out)
    if not rep.feasible:
        print(f"infeasible: failed gates {', '.join(rep.failed_gates)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out=None) -> int:
    rec = _simulate(cfg, _certify(cfg))
    _emit(format_trajectory(rec), out)
    return EXIT_OK


def inject(rec: hn.TrajectoryRecord, mode: str) -> hn.TrajectoryRecord:
    """Fabricated corruptions of a record, used to show that the checkers can fail."""
    y, hx, lx = rec.y.copy(), rec.h01_x.copy(), rec.l2_x.copy()
    jr = rec.jump_rows()
    if mode == "flat" and jr:
        # every row carries the state right after the first jump: V never decreases
        _, _, b = jr[0]
        y[:], hx[:], lx[:] = y[b], hx[b], lx[b]
    elif mode == "upward" and len(jr) > 2:
        # lift the segment after a mid-run jump to twice V(first jump+); the
        # envelope never exceeds that value, so this must be flagged
        V = rec.V
        k, _, b = jr[len(jr) // 2]
        end = jr[len(jr) // 2 + 1][1] + 1 if len(jr) // 2 + 1 < len(jr) else y.size
        f = math.sqrt(2.0 * V[jr[0][2]] / V[b]) if V[b] > 0 else 1.0
        y[b:end] *= f
        hx[b:end] *= f
        lx[b:end] *= f
    elif mode == "gminus":
        # a G+ row followed by a G- row in the same segment, both far above any threshold
        ji = rec.jump_index
        cand = [i for i in range(1, ji.size) if ji[i] < 0 and ji[i - 1] < 0]
        if not cand:
            raise ValueError("record has no two consecutive regular rows")
        i = cand[len(cand) // 2]
        y[i - 1], hx[i - 1] = 2.0, 1.0
        y[i], hx[i] = 1.0, 2.0
    else:
        raise ValueError(f"cannot inject {mode!r} into this record")
    return replace(rec, y=y, h01_x=hx, l2_x=lx)


def verify_record(cfg: RunConfig, rep: CertificateReport, rec: hn.TrajectoryRecord) -> list[hn.CheckReport]:
    admissible = bool(rec.meta.get("admissible", True))
    cert = hn.CheckReport("certificate", rep.feasible and admissible, False,
                          0.0 if rep.feasible else -1.0, 0.0,
                          dict(case=rep.case_label, failed_gates=list(rep.failed_gates),
                               schedule_admissible=admissible,
                               window=None if rep.window is None else
                               [rep.window.theta1, rep.window.theta2, rep.window.margin]))
    checks = [cert]
    r = hn.threshold(rep.chi_slope, rec.d, cfg.floor)
    if rep.rates is not None:
        checks.append(hn.verify_lemma1(rec, rep.rates, rep.window.margin, r))
        checks.append(hn.verify_envelope(rec, rep.rates, rep.alpha2, rep.window.margin, r))
    checks.append(hn.verify_gplus_invariance(rec, rep.chi_slope, cfg.floor, r))
    checks.append(hn.verify_reach(rec, r))
    return checks


def cmd_verify(cfg: RunConfig, out=None, inject_mode=None) -> int:
    rep = _certify(cfg)
    rec = _simulate(cfg, rep)
    if inject_mode:
        rec = inject(rec, inject_mode)
    checks = verify_record(cfg, rep, rec)
    ok = all(c.passed or c.vacuous for c in checks)
    doc = dict(passed=ok, injected=inject_mode, checks=[c.to_dict() for c in checks])
    _emit(_json(doc), out)
    for c in checks:
        print(c.line(), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


SWEEP_COLUMNS = ("index", "axis", "value", "admissible", "n_jumps", "terminal_norm", "max_norm",
                 "long_run_sup", "lemma1_worst_slack", "lemma1_passed", "wall_time")


def sweep_point(cfg: RunConfig, axis: str, value: float, index: int) -> dict:
    t0 = time.perf_counter()
    if axis == "T":
        cfg = replace(cfg, schedule=("uniform", float(value)))
    elif axis == "n":
        cfg = replace(cfg, n=int(value))
    rep = _certify(cfg)
    d = disturbance_at_level(cfg, float(value)) if axis == "amplitude" else None
    rec = _simulate(cfg, rep, d)
    slack, passed = math.nan, None
    if rep.rates is not None:
        lem = hn.verify_lemma1(rec, rep.rates, rep.window.margin, hn.threshold(rep.chi_slope, rec.d, cfg.floor))
        slack, passed = lem.worst_slack, lem.passed
    norm = rec.norm
    return dict(index=index, axis=axis, value=value, admissible=rec.meta["admissible"],
                n_jumps=len(rec.jump_rows()), terminal_norm=float(norm[-1]), max_norm=float(norm.max()),
                long_run_sup=hn.long_run_sup(rec), lemma1_worst_slack=slack, lemma1_passed=passed,
                wall_time=time.perf_counter() - t0)


def _sweep_task(args):
    return sweep_point(*args)


def run_sweep(cfg: RunConfig, workers=None) -> tuple[list[dict], dict]:
    sw = cfg.sweep
    tasks = [(cfg, sw.axis, v, i) for i, v in enumerate(sw.values)]
    workers = workers or sw.workers
    if workers == 1 or len(tasks) == 1:
        rows = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    rows.sort(key=lambda r: r["index"])
    summary = {"axis": sw.axis}
    if sw.axis == "n" and len(rows) >= 3:
        pts = sorted(rows, key=lambda r: r["value"])[-3:]
        hs = [cfg.system.l / (int(r["value"]) + 1) for r in pts]
        try:
            summary["observed_order"] = hn.observed_order(hs, [r["terminal_norm"] for r in pts])
        except ValueError:
            summary["observed_order"] = None
    if sw.axis == "amplitude":
        lr = [r["long_run_sup"] for r in sorted(rows, key=lambda r: r["value"])]
        summary["long_run_monotone"] = all(b >= a for a, b in zip(lr[:-1], lr[1:]))
    return rows, summary


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep: the config needs a sweep section (axis and values)")
    rows, summary = run_sweep(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])
    buf.write("# summary: " + json.dumps(summary) + "\n")
    _emit(buf.getvalue(), out)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out=None) -> int:
    rep = _certify(cfg)
    radius = jump_spectral_radius(cfg.system, cfg.n)
    _emit(_json(dict(n=cfg.n, spectral_radius=radius, lam_max_A0=rep.lam_max_A0,
                     lam_max_B0=rep.lam_max_B0)), out)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="impulsive-iss",
                                 description="Dwell-time ISS certificates and simulations for an impulsive heat/ODE system.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("certify", "compute the dwell-time certificate"),
                      ("simulate", "write a trajectory table"),
                      ("verify", "certify, simulate and run the trajectory checks"),
                      ("sweep", "run a parameter sweep"),
                      ("spectrum", "spectral radius of the discretized jump operator")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path (default: config output, else stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--grid-n", type=int, dest="grid_n")
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--schedule", help="uniform:T | random | explicit:t0,t1,...")
        p.add_argument("--epsilon", type=float)
        if name == "verify":
            p.add_argument("--inject", choices=INJECT_MODES, help=argparse.SUPPRESS)
        if name == "sweep":
            p.add_argument("--workers", type=int)
    return ap


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.grid_n is not None and args.grid_n < 3:
        raise ConfigError("--grid-n: need at least 3 interior nodes")
    for flag, v in (("--dt", args.dt), ("--epsilon", args.epsilon)):
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{flag}: must be positive")
    if args.horizon is not None and not args.horizon >= 0:
        raise ConfigError("--horizon: must be nonnegative")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed: must be nonnegative")
    sched = parse_schedule_flag(args.schedule) if args.schedule else None
    return cfg.with_overrides(seed=args.seed, n=args.grid_n, dt=args.dt, horizon=args.horizon,
                              schedule=sched, epsilon=args.epsilon)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        cfg = _apply_flags(load_config(args.config), args)
        out = args.out or cfg.output
        cmd = args.command
        if cmd == "certify":
            return cmd_certify(cfg, out)
        if cmd == "simulate":
            return cmd_simulate(cfg, out)
        if cmd == "verify":
            return cmd_verify(cfg, out, args.inject)
        if cmd == "sweep":
            return cmd_sweep(cfg if args.workers is None else
                             replace(cfg, sweep=replace(cfg.sweep, workers=args.workers)) if cfg.sweep else cfg, out)
        return cmd_spectrum(cfg, out)
    except (ConfigError, StepSizeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyWindow as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
