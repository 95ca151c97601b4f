"""Sweep the jump period T across and beyond the dwell window.

Run:  python3 demos/dwell_sweep.py [--workers 4]

Inside the window the terminal norm collapses. Slower jumps give the
unstable ODE part time to grow between resets, and the decay degrades
quickly past the upper end. Faster jumps still decay in this example: the
window is a sufficient condition, and its lower end only guards against the
jump map's gain being slightly above one.
"""
import argparse
from dataclasses import replace

from impulsive_iss.cli import run_sweep
from impulsive_iss.config import RunConfig, SweepSpec
from impulsive_iss import certify, worked_example_params

ap = argparse.ArgumentParser()
ap.add_argument("--workers", type=int, default=None)
args = ap.parse_args()

ex = worked_example_params()
w = certify(ex).window
values = (0.01, 0.03, round(w.theta1, 4), 0.25, 0.5, 0.75, round(w.theta2, 4), 1.5, 3.0)
cfg = replace(RunConfig(system=ex), n=60, dt=1e-3, horizon=20.0,
              sweep=SweepSpec("T", values, args.workers))
rows, _ = run_sweep(cfg)
print(f"dwell window [{w.theta1:.4f}, {w.theta2:.4f}]")
print(f"{'T':>8} {'in window':>10} {'jumps':>6} {'terminal norm':>14} {'max norm':>10}")
for r in rows:
    print(f"{r['value']:8.4f} {str(r['admissible']):>10} {r['n_jumps']:6d} "
          f"{r['terminal_norm']:14.3e} {r['max_norm']:10.3g}")
