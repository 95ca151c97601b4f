"""Neither the flow nor the jumps are stable on their own.

Run:  python3 demos/instability.py

Without jumps the ODE state grows from (0, 1). The discretized jump operator
has spectral radius one: the x-component is copied unchanged (alpha = 1), so
jumps alone never bring x to rest. Stability only comes from interleaving
them at the certified rate.
"""
from impulsive_iss import instability_probe, jump_spectral_radius, worked_example_params
from impulsive_iss.functionspace import Poly

ex = worked_example_params()
rep = instability_probe(ex, n=100)
print(rep.details["continuous"], f"(10x growth at t = {rep.details['growth_time']:.2f})")
print(rep.details["discrete"], f"(spectral radius {rep.details['spectral_radius']:.10f})")
for n in (25, 100, 400):
    print(f"  n = {n:4d}: radius {jump_spectral_radius(ex, n):.10f}")
print()
half = worked_example_params(alpha_poly=Poly([0.5]))
print("with alpha = 0.5 the jump map contracts alone:",
      f"radius {jump_spectral_radius(half, 100):.6f}")
