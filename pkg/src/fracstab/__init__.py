"""Stability analysis and output-feedback stabilization of multi-order
fractional-order systems through commensurate lifting."""
from ._backend import BACKEND
from .lmi import (
    FeasibilityResult,
    LmiFeasibilityProblem,
    UnsupportedOrderError,
    build_stability_lmi,
    lmi_stability_check,
    lmi_verdict,
    solve_feasibility,
)
from .model import (
    CommensurateRealization,
    LiftingError,
    MultiOrderSystem,
    OrderError,
    RationalOrder,
    commensurate_base,
    lift,
    parse_order,
)
from .sim import SimConfig, Trajectory, gl_weights, mittag_leffler, simulate, simulate_closed_loop, simulate_commensurate
from .spectral import ConvergenceError, StabilityVerdict, argument_stability_test, characteristic_polynomial, eigenvalues
from .synthesis import (
    ControllerRealization,
    RecoveryError,
    SynthesisInfeasible,
    SynthesisResult,
    VerificationError,
    assemble_closed_loop,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CommensurateRealization",
    "ControllerRealization",
    "ConvergenceError",
    "FeasibilityResult",
    "LiftingError",
    "LmiFeasibilityProblem",
    "MultiOrderSystem",
    "OrderError",
    "RationalOrder",
    "RecoveryError",
    "SimConfig",
    "StabilityVerdict",
    "SynthesisInfeasible",
    "SynthesisResult",
    "Trajectory",
    "UnsupportedOrderError",
    "VerificationError",
    "argument_stability_test",
    "assemble_closed_loop",
    "build_stability_lmi",
    "characteristic_polynomial",
    "commensurate_base",
    "eigenvalues",
    "gl_weights",
    "lift",
    "lmi_stability_check",
    "lmi_verdict",
    "mittag_leffler",
    "parse_order",
    "simulate",
    "simulate_closed_loop",
    "simulate_commensurate",
    "solve_feasibility",
    "synthesize",
]
