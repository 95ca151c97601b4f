"""Dwell-time input-to-state stability tools for an impulsive heat-equation / ODE system."""
from .certificate import CertificateReport, EmptyWindow, ExampleParams, certify, worked_example_params
from .comparison import DwellWindow, RateSet, f_integral, f_inverse, linear
from .functionspace import GridFunction, Poly
from .harness import (
    Schedule,
    TrajectoryRecord,
    generate_schedule,
    instability_probe,
    run_trajectory,
    verify_envelope,
    verify_gplus_invariance,
    verify_iss_bound,
    verify_lemma1,
)
from .pde_ode import (
    DisturbanceSignal,
    FlowParams,
    HybridState,
    TimeProfile,
    apply_jump,
    flow,
    jump_spectral_radius,
)

__all__ = [
    "CertificateReport", "EmptyWindow", "ExampleParams", "certify", "worked_example_params",
    "DwellWindow", "RateSet", "f_integral", "f_inverse", "linear",
    "GridFunction", "Poly",
    "Schedule", "TrajectoryRecord", "generate_schedule", "run_trajectory", "instability_probe",
    "verify_envelope", "verify_gplus_invariance", "verify_iss_bound", "verify_lemma1",
    "DisturbanceSignal", "FlowParams", "HybridState", "TimeProfile", "apply_jump", "flow",
    "jump_spectral_radius",
]
__version__ = "0.1.0"
