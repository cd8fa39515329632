"""Fixed-order dynamic output-feedback stabilization.

The controller ``D^{alpha_c} xc = Ac xc + Bc y``, ``u = Cc xc + Dc y`` is
searched through the linearized block LMI in ``(P_S, P_C, W1..W4)``, recovered
with the pseudo-inverse of the lifted output matrix, and always re-checked
with the spectral sector test on the lifted closed loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lmi import (
    DEFAULT_BOUND,
    DEFAULT_MARGIN,
    FeasibilityResult,
    HermitianVariable,
    LmiFeasibilityProblem,
    MatrixVariable,
    constraint_from_map,
    realify_hermitian_pd,
    rotation_angle,
    solve_feasibility,
)
from .model import (
    CommensurateRealization,
    LiftingError,
    MultiOrderSystem,
    RationalOrder,
    commensurate_base,
    expand_state_matrix,
    lift,
)
from .spectral import StabilityVerdict, argument_stability_test

__all__ = [
    "SynthesisError",
    "SynthesisInfeasible",
    "RecoveryError",
    "VerificationError",
    "ControllerRealization",
    "SynthesisResult",
    "build_synthesis_lmi",
    "build_certification_lmi",
    "recover_controller",
    "assemble_closed_loop",
    "expand_closed_loop",
    "closed_loop_block_formula",
    "synthesize",
    "RESIDUAL_RTOL",
    "COND_LIMIT",
]

RESIDUAL_RTOL = 1e-6
COND_LIMIT = 1e12


class SynthesisError(RuntimeError):
    pass


class SynthesisInfeasible(SynthesisError):
    """No controller found at this order; the LMI condition is only sufficient."""

    def __init__(self, n_c: int, status: str, detail: str = ""):
        self.n_c = n_c
        self.status = status
        msg = (
            f"no controller found at order n_c={n_c} (LMI {status}); the block-diagonal "
            "LMI condition is sufficient only, so a stabilizer of this order may still exist"
        )
        super().__init__(msg + (f": {detail}" if detail else ""))


class RecoveryError(SynthesisError):
    """Controller matrices could not be recovered from a feasible LMI point."""


class VerificationError(SynthesisError):
    """LMI feasible, yet the recovered closed loop fails the spectral test."""


@dataclass(frozen=True)
class ControllerRealization:
    Ac: np.ndarray
    Bc: np.ndarray
    Cc: np.ndarray
    Dc: np.ndarray
    alpha_c: RationalOrder | None = None

    def __post_init__(self):
        Dc = np.atleast_2d(np.asarray(self.Dc, dtype=float))
        n_c = np.asarray(self.Ac).shape[0] if np.size(self.Ac) else 0
        l, m = Dc.shape
        Ac = np.asarray(self.Ac, dtype=float).reshape(n_c, n_c)
        Bc = np.asarray(self.Bc, dtype=float).reshape(n_c, m)
        Cc = np.asarray(self.Cc, dtype=float).reshape(l, n_c)
        for name, val in (("Ac", Ac), ("Bc", Bc), ("Cc", Cc), ("Dc", Dc)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_c(self) -> int:
        return self.Ac.shape[0]

    @classmethod
    def static(cls, Dc, alpha_c=None) -> "ControllerRealization":
        Dc = np.atleast_2d(np.asarray(Dc, dtype=float))
        l, m = Dc.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((l, 0)), Dc, alpha_c)


@dataclass
class SynthesisResult:
    controller: ControllerRealization
    Ps: np.ndarray
    Pc: np.ndarray
    W: dict[str, np.ndarray]
    recovery_residual: float
    closed_loop_verdict: StabilityVerdict
    refined: bool = False
    lmi: FeasibilityResult | None = field(default=None, repr=False)


def _block_lmi(Abig, Bbig, W_of, QS_of, n_c):
    """The (N + n_c) square block matrix of the synthesis inequality."""

    def fn(values):
        QS = QS_of(values)
        W1, W2, W3, W4 = W_of(values)
        AQ = Abig @ QS
        E11 = AQ + AQ.T + Bbig @ W4 + (Bbig @ W4).T
        if n_c == 0:
            return E11
        E12 = Bbig @ W3 + W2.T
        E22 = W1 + W1.T
        return np.block([[E11, E12], [E12.T, E22]])

    return fn


def build_synthesis_lmi(
    Abig,
    Bbig,
    Cbig,
    n_c: int,
    alpha_c,
    margin: float = DEFAULT_MARGIN,
    variable_bound: float = DEFAULT_BOUND,
) -> LmiFeasibilityProblem:
    """Linearized synthesis LMI over ``P_S``, ``P_C`` (Hermitian) and real ``W1..W4``."""
    Abig = np.asarray(Abig, dtype=float)
    Bbig = np.asarray(Bbig, dtype=float)
    Cbig = np.asarray(Cbig, dtype=float)
    N = Abig.shape[0]
    l = Bbig.shape[1]
    if Bbig.shape[0] != N or Cbig.shape[1] != N:
        raise LiftingError("lifted B/C inconsistent with Abig")
    if n_c < 0:
        raise ValueError("controller order must be nonnegative")
    theta = rotation_angle(alpha_c)
    PS = HermitianVariable("PS", N)
    PC = HermitianVariable("PC", n_c)
    W = {
        "W1": MatrixVariable("W1", (n_c, n_c)),
        "W2": MatrixVariable("W2", (n_c, N)),
        "W3": MatrixVariable("W3", (l, n_c)),
        "W4": MatrixVariable("W4", (l, N)),
    }
    variables = list(PS.parts)
    if n_c:
        variables += list(PC.parts) + [W["W1"], W["W2"], W["W3"]]
    variables.append(W["W4"])

    def W_of(values):
        return tuple(values.get(k, np.zeros(W[k].shape)) for k in ("W1", "W2", "W3", "W4"))

    fn = _block_lmi(Abig, Bbig, W_of, lambda v: PS.rotated(v, theta), n_c)
    constraints = [realify_hermitian_pd(PS)]
    if n_c:
        constraints.append(realify_hermitian_pd(PC))
    constraints.append(constraint_from_map("synthesis", "neg", variables, fn))
    herm = {"PS": PS, "PC": PC}
    return LmiFeasibilityProblem(variables, constraints, margin, variable_bound, herm, theta)


def build_certification_lmi(
    real: CommensurateRealization,
    controller: ControllerRealization,
    margin: float = DEFAULT_MARGIN,
    variable_bound: float = DEFAULT_BOUND,
) -> LmiFeasibilityProblem:
    """The synthesis LMI with the controller fixed and ``W`` tied to it exactly.

    ``W1 = Ac Q_C``, ``W2 = Bc C Q_S``, ``W3 = Cc Q_C``, ``W4 = Dc C Q_S``;
    only ``P_S`` and ``P_C`` remain free, so a feasible point inverts the change
    of variables without any pseudo-inverse error.
    """
    theta = rotation_angle(real.alpha_c)
    N = real.N
    n_c = controller.n_c
    PS = HermitianVariable("PS", N)
    PC = HermitianVariable("PC", n_c)
    variables = list(PS.parts) + (list(PC.parts) if n_c else [])
    Ac, Bc, Cc, Dc = controller.Ac, controller.Bc, controller.Cc, controller.Dc
    Cbig = real.Cbig

    def W_of(values):
        QS = PS.rotated(values, theta)
        QC = PC.rotated(values, theta) if n_c else np.zeros((0, 0))
        return Ac @ QC, Bc @ Cbig @ QS, Cc @ QC, Dc @ Cbig @ QS

    fn = _block_lmi(real.Abig, real.Bbig, W_of, lambda v: PS.rotated(v, theta), n_c)
    constraints = [realify_hermitian_pd(PS)]
    if n_c:
        constraints.append(realify_hermitian_pd(PC))
    constraints.append(constraint_from_map("synthesis (fixed controller)", "neg", variables, fn))
    problem = LmiFeasibilityProblem(variables, constraints, margin, variable_bound, {"PS": PS, "PC": PC}, theta)
    problem.tied_W = W_of
    return problem


def _checked_inverse(Q: np.ndarray, label: str) -> np.ndarray:
    if Q.size == 0:
        return Q
    cond = np.linalg.cond(Q)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RecoveryError(f"{label} is numerically singular (condition number {cond:.3g})")
    return np.linalg.inv(Q)


def recover_controller(solution: dict, Cbig, n_c: int, alpha_c) -> tuple[ControllerRealization, float]:
    """Controller from a synthesis-LMI point, plus the change-of-variables residual.

    ``solution`` maps ``PS.re, PS.im, PC.re, PC.im, W1..W4`` to matrices.
    """
    theta = rotation_angle(alpha_c)
    Cbig = np.asarray(Cbig, dtype=float)
    N = Cbig.shape[1]
    PS = HermitianVariable("PS", N)
    QS = PS.rotated(solution, theta)
    W4 = np.asarray(solution["W4"], dtype=float)
    l = W4.shape[0]
    m = Cbig.shape[0]
    C_pinv = np.linalg.pinv(Cbig)
    QS_inv = _checked_inverse(QS, "Q_S")
    Dc = W4 @ QS_inv @ C_pinv
    residual = float(np.linalg.norm(Dc @ Cbig @ QS - W4, 2))
    if n_c == 0:
        return ControllerRealization.static(Dc, alpha_c), residual
    PC = HermitianVariable("PC", n_c)
    QC = PC.rotated(solution, theta)
    QC_inv = _checked_inverse(QC, "Q_C")
    W1, W2, W3 = (np.asarray(solution[k], dtype=float) for k in ("W1", "W2", "W3"))
    Ac = W1 @ QC_inv
    Cc = W3 @ QC_inv
    Bc = W2 @ QS_inv @ C_pinv
    residual = max(residual, float(np.linalg.norm(Bc @ Cbig @ QS - W2, 2)))
    return ControllerRealization(Ac, Bc.reshape(n_c, m), Cc.reshape(l, n_c), Dc, alpha_c), residual


def _mul(X, Y) -> np.ndarray:
    """Matrix product summed strictly in index order.

    BLAS picks different kernels (and FMA use) by shape, so the same entries
    could round differently between the augmented and the lifted assembly.
    """
    return (X[:, :, None] * Y[None, :, :]).sum(axis=1)


def assemble_closed_loop(system: MultiOrderSystem, controller: ControllerRealization, xc0=None) -> MultiOrderSystem:
    """Augmented autonomous system in ``(x, xc)`` with controller states of order ``alpha_c``."""
    A, B, C = system.A, system.B, system.C
    l, m = system.n_inputs, system.n_outputs
    if controller.Dc.shape != (l, m):
        raise LiftingError(f"controller is {controller.Dc.shape[0]}x{controller.Dc.shape[1]}, plant needs {l}x{m}")
    n_c = controller.n_c
    alpha_c = controller.alpha_c or commensurate_base(system.orders)[0]
    Acl = np.block(
        [
            [A + _mul(_mul(B, controller.Dc), C), _mul(B, controller.Cc)],
            [_mul(controller.Bc, C), controller.Ac],
        ]
    )
    orders = tuple(system.orders) + (alpha_c,) * n_c
    x0 = np.concatenate([system.x0, np.zeros(n_c) if xc0 is None else np.asarray(xc0, dtype=float)])
    xd = np.concatenate([system.x0_deriv, np.zeros(n_c)])
    Ccl = np.hstack([C, np.zeros((m, n_c))])
    return MultiOrderSystem(Acl, orders, None, Ccl, x0, xd)


def expand_closed_loop(closed: MultiOrderSystem) -> np.ndarray:
    """Lift the augmented closed-loop state matrix block by block."""
    return expand_state_matrix(closed.A, closed.orders)


def closed_loop_block_formula(real: CommensurateRealization, controller: ControllerRealization) -> np.ndarray:
    """Lifted closed loop assembled from the lifted plant matrices directly."""
    Ab, Bb, Cb = real.Abig, real.Bbig, real.Cbig
    return np.block(
        [
            [Ab + _mul(_mul(Bb, controller.Dc), Cb), _mul(Bb, controller.Cc)],
            [_mul(controller.Bc, Cb), controller.Ac],
        ]
    )


def _relative_residual_ok(residual: float, W: dict, rtol: float) -> bool:
    scale = max([1.0] + [float(np.linalg.norm(W[k], 2)) for k in ("W2", "W4") if k in W and W[k].size])
    return residual <= rtol * scale


def _full_solution(problem: LmiFeasibilityProblem, assignment: dict, n_c: int, l: int, N: int) -> dict:
    sol = dict(assignment)
    if getattr(problem, "tied_W", None) is not None:
        W1, W2, W3, W4 = problem.tied_W(assignment)
        sol.update(W1=W1, W2=W2, W3=W3, W4=W4)
    sol.setdefault("PC.re", np.zeros((n_c, n_c)))
    sol.setdefault("PC.im", np.zeros((n_c, n_c)))
    for k, shape in (("W1", (n_c, n_c)), ("W2", (n_c, N)), ("W3", (l, n_c))):
        sol.setdefault(k, np.zeros(shape))
    return sol


def synthesize(
    system: MultiOrderSystem,
    n_c: int,
    margin: float = DEFAULT_MARGIN,
    variable_bound: float = DEFAULT_BOUND,
    residual_rtol: float = RESIDUAL_RTOL,
) -> SynthesisResult:
    """Lift, solve the synthesis LMI, recover, and verify the closed loop spectrally.

    When the pseudo-inverse recovery leaves a residual above tolerance, the
    recovered controller is fed back into the LMI with ``W`` tied to it; a
    feasible point there satisfies the change of variables exactly.
    """
    real = lift(system)
    if system.n_inputs == 0 or system.n_outputs == 0:
        raise ValueError("synthesis needs nonempty B and C")
    alpha_c = real.alpha_c
    N, l = real.N, system.n_inputs
    problem = build_synthesis_lmi(real.Abig, real.Bbig, real.Cbig, n_c, alpha_c, margin, variable_bound)
    res = solve_feasibility(problem)
    if res.status != "feasible":
        raise SynthesisInfeasible(n_c, res.status, res.diagnostic)
    sol = _full_solution(problem, res.assignment, n_c, l, N)
    controller, residual = recover_controller(sol, real.Cbig, n_c, alpha_c)
    refined = False
    if not _relative_residual_ok(residual, sol, residual_rtol):
        cert = build_certification_lmi(real, controller, margin, variable_bound)
        cres = solve_feasibility(cert)
        if cres.status != "feasible":
            raise RecoveryError(
                f"pseudo-inverse recovery residual {residual:.3g} exceeds tolerance and the "
                f"recovered controller could not be certified exactly (LMI {cres.status})"
            )
        res = cres
        sol = _full_solution(cert, cres.assignment, n_c, l, N)
        controller, residual = recover_controller(sol, real.Cbig, n_c, alpha_c)
        refined = True
        if not _relative_residual_ok(residual, sol, residual_rtol):
            raise RecoveryError(f"recovery residual {residual:.3g} exceeds tolerance after refinement")
    closed = assemble_closed_loop(system, controller)
    verdict = argument_stability_test(expand_closed_loop(closed), alpha_c)
    if not verdict.stable:
        raise VerificationError(
            f"LMI feasible but the lifted closed loop fails the sector test (margin {verdict.margin:.3g} rad)"
        )
    PS = HermitianVariable("PS", N).value(sol)
    PC = HermitianVariable("PC", n_c).value(sol) if n_c else np.zeros((0, 0), dtype=complex)
    W = {k: sol[k] for k in ("W1", "W2", "W3", "W4")}
    return SynthesisResult(controller, PS, PC, W, residual, verdict, refined, res)
