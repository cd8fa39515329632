"""LMI feasibility problems for fractional-order stability and their solution.

Every constraint is a *linear* symmetric-matrix-valued map of real scalar
parameters, stored explicitly as one coefficient matrix per parameter:

    F(x) = sum_k x_k F_k,     sense "neg":  F(x) <= -margin I
                              sense "pos":  F(x) >= +margin I

The solver backend only searches.  Feasibility is re-verified with an
eigenvalue check of the returned assignment, and infeasibility is reported
only when a dual certificate survives an independent bound that accounts for
the variable box ``|x_k| <= variable_bound``.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .model import MultiOrderSystem, lift
from .spectral import StabilityVerdict

__all__ = [
    "UnsupportedOrderError",
    "MatrixVariable",
    "HermitianVariable",
    "LmiConstraint",
    "LmiFeasibilityProblem",
    "FeasibilityResult",
    "rotation_angle",
    "constraint_from_map",
    "realify_hermitian_pd",
    "build_stability_lmi",
    "solve_feasibility",
    "verify_assignment",
    "verify_infeasibility_certificate",
    "lmi_stability_check",
    "lmi_verdict",
    "dump_problem",
    "load_problem",
    "DEFAULT_MARGIN",
    "DEFAULT_BOUND",
]

DEFAULT_MARGIN = 1e-6
DEFAULT_BOUND = 1e4


class UnsupportedOrderError(ValueError):
    """The LMI criterion only covers base orders in (0, 1)."""


@dataclass(frozen=True)
class MatrixVariable:
    """Real matrix variable with a structure tag: symmetric, skew or full."""

    name: str
    shape: tuple[int, int]
    structure: str = "full"

    def __post_init__(self):
        if self.structure not in ("symmetric", "skew", "full"):
            raise ValueError(f"unknown structure {self.structure!r}")
        r, c = self.shape
        if self.structure != "full" and r != c:
            raise ValueError(f"{self.structure} variable {self.name} must be square")

    @property
    def size(self) -> int:
        r, c = self.shape
        if self.structure == "symmetric":
            return r * (r + 1) // 2
        if self.structure == "skew":
            return r * (r - 1) // 2
        return r * c

    def basis(self) -> np.ndarray:
        """Basis matrices, shape ``(size, rows, cols)``; parameters are entries."""
        r, c = self.shape
        out = np.zeros((self.size, r, c))
        k = 0
        if self.structure == "full":
            for i in range(r):
                for j in range(c):
                    out[k, i, j] = 1.0
                    k += 1
        elif self.structure == "symmetric":
            for i in range(r):
                for j in range(i, r):
                    out[k, i, j] = out[k, j, i] = 1.0
                    k += 1
        else:
            for i in range(r):
                for j in range(i + 1, r):
                    out[k, i, j] = -1.0
                    out[k, j, i] = 1.0
                    k += 1
        return out

    def to_matrix(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(self.size)
        return np.tensordot(params, self.basis(), axes=1) if self.size else np.zeros(self.shape)

    def to_params(self, matrix) -> np.ndarray:
        M = np.asarray(matrix, dtype=float)
        r, c = self.shape
        if self.structure == "full":
            return M.reshape(-1).copy()
        iu = np.triu_indices(r, 0 if self.structure == "symmetric" else 1)
        # entry (j, i) of the basis is +1 for skew, so read the lower triangle
        return M[iu].copy() if self.structure == "symmetric" else M.T[iu].copy()


@dataclass(frozen=True)
class HermitianVariable:
    """Complex Hermitian ``X = sym_part + i * skew_part`` as two real variables."""

    name: str
    dim: int

    @property
    def sym_part(self) -> MatrixVariable:
        return MatrixVariable(f"{self.name}.re", (self.dim, self.dim), "symmetric")

    @property
    def skew_part(self) -> MatrixVariable:
        return MatrixVariable(f"{self.name}.im", (self.dim, self.dim), "skew")

    @property
    def parts(self) -> tuple[MatrixVariable, MatrixVariable]:
        return self.sym_part, self.skew_part

    @property
    def n_params(self) -> int:
        return self.dim * self.dim

    def value(self, assignment: Mapping[str, np.ndarray]) -> np.ndarray:
        return assignment[self.sym_part.name] + 1j * assignment[self.skew_part.name]

    def rotated(self, values: Mapping[str, np.ndarray], theta: float) -> np.ndarray:
        """The real matrix ``r X + conj(r) conj(X)`` with ``r = exp(i theta)``."""
        return 2.0 * (math.cos(theta) * values[self.sym_part.name] - math.sin(theta) * values[self.skew_part.name])


@dataclass
class LmiConstraint:
    """``sum_k x_k F_k`` with sense ``neg`` (<= -margin I) or ``pos`` (>= margin I)."""

    name: str
    sense: str
    size: int
    terms: dict[str, np.ndarray]

    def evaluate(self, assignment: Mapping[str, np.ndarray], variables: Mapping[str, MatrixVariable]) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for vname, coeffs in self.terms.items():
            params = variables[vname].to_params(assignment[vname])
            out += np.tensordot(params, coeffs, axes=1)
        return 0.5 * (out + out.T)

    def slack(self, assignment, variables) -> float:
        """Smallest eigenvalue of ``-F`` (neg) or ``F`` (pos)."""
        F = self.evaluate(assignment, variables)
        sign = -1.0 if self.sense == "neg" else 1.0
        return float(np.linalg.eigvalsh(sign * F)[0]) if self.size else math.inf


@dataclass
class LmiFeasibilityProblem:
    variables: list[MatrixVariable]
    constraints: list[LmiConstraint]
    margin: float = DEFAULT_MARGIN
    variable_bound: float = DEFAULT_BOUND
    hermitian: dict[str, HermitianVariable] = field(default_factory=dict)
    theta: float | None = None

    def __post_init__(self):
        if self.margin <= 0 or self.variable_bound <= 0:
            raise ValueError("margin and variable_bound must be positive")

    @property
    def variable_map(self) -> dict[str, MatrixVariable]:
        return {v.name: v for v in self.variables}

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.variables)


@dataclass
class FeasibilityResult:
    status: str
    assignment: dict[str, np.ndarray] | None
    certificate_margin: float
    infeasibility_gap: float = math.nan
    solver_status: str = ""
    diagnostic: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def rotation_angle(alpha_c) -> float:
    alpha = float(alpha_c)
    if not 0 < alpha < 1:
        raise UnsupportedOrderError(
            f"the LMI test needs 0 < alpha_c < 1, got {alpha_c}; use the spectral test instead"
        )
    return (1.0 - alpha) * math.pi / 2


def constraint_from_map(
    name: str,
    sense: str,
    variables: list[MatrixVariable],
    fn: Callable[[dict[str, np.ndarray]], np.ndarray],
) -> LmiConstraint:
    """Tabulate a linear matrix map by evaluating it on each basis element."""
    if sense not in ("neg", "pos"):
        raise ValueError(f"sense must be 'neg' or 'pos', got {sense!r}")
    zeros = {v.name: np.zeros(v.shape) for v in variables}
    size = None
    terms = {}
    for var in variables:
        basis = var.basis()
        if not len(basis):
            continue
        coeffs = []
        for E in basis:
            values = dict(zeros)
            values[var.name] = E
            F = np.asarray(fn(values), dtype=float)
            if not np.allclose(F, F.T, atol=1e-12 * (1 + np.abs(F).max())):
                raise ValueError(f"constraint {name} is not symmetric-valued")
            coeffs.append(0.5 * (F + F.T))
        terms[var.name] = np.array(coeffs)
        size = terms[var.name].shape[1]
    if size is None:
        size = np.asarray(fn(zeros)).shape[0]
    if np.any(np.asarray(fn(zeros))):
        raise ValueError(f"constraint {name} has a constant term; only linear maps are supported")
    return LmiConstraint(name, sense, size, terms)


def realify_hermitian_pd(X: HermitianVariable, name: str | None = None) -> LmiConstraint:
    """``[[Re X, -Im X], [Im X, Re X]] >= margin I``, equivalent to ``X > 0``."""
    S, K = X.parts

    def fn(values):
        re, im = values[S.name], values[K.name]
        return np.block([[re, -im], [im, re]])

    return constraint_from_map(name or f"{X.name} > 0", "pos", [S, K], fn)


def build_stability_lmi(
    Abig,
    alpha_c,
    margin: float = DEFAULT_MARGIN,
    variable_bound: float = DEFAULT_BOUND,
) -> LmiFeasibilityProblem:
    """Stability LMI ``Q^T A^T + A Q < 0``, ``Q = r X + conj(r X)``, ``X > 0``."""
    A = np.asarray(Abig, dtype=float)
    theta = rotation_angle(alpha_c)
    X = HermitianVariable("X", A.shape[0])
    parts = list(X.parts)

    def lyap(values):
        AQ = A @ X.rotated(values, theta)
        return AQ + AQ.T

    constraints = [
        constraint_from_map("stability", "neg", parts, lyap),
        realify_hermitian_pd(X),
    ]
    return LmiFeasibilityProblem(parts, constraints, margin, variable_bound, {"X": X}, theta)


# --------------------------------------------------------------------------
# verification


def verify_assignment(problem: LmiFeasibilityProblem, assignment) -> float:
    """Smallest slack over all constraints and the variable box (box slack is scaled out)."""
    variables = problem.variable_map
    slack = math.inf
    for c in problem.constraints:
        slack = min(slack, c.slack(assignment, variables))
    return slack


def _within_bound(problem, assignment) -> bool:
    for v in problem.variables:
        params = v.to_params(assignment[v.name])
        if params.size and np.max(np.abs(params)) > problem.variable_bound * (1 + 1e-12):
            return False
    return True


def verify_infeasibility_certificate(problem: LmiFeasibilityProblem, duals: list[np.ndarray]) -> float:
    """Return the certified gap; positive means no ``|x| <= bound`` point has slack ``>= margin``.

    For any such point ``sum_c s_c tr(F_c(x) Z_c) = x . r`` is bounded below by
    ``-bound |r|_1`` and above by ``-margin tr(Z+) + bound sum_c g_c tr(Z_c-)``
    with ``g_c = sum_k |F_ck|_2``.  The gap is the normalized difference.
    """
    variables = problem.variables
    r = np.zeros(problem.n_params)
    pos_trace = 0.0
    neg_penalty = 0.0
    for c, Z in zip(problem.constraints, duals):
        Z = 0.5 * (Z + Z.T)
        w, V = np.linalg.eigh(Z)
        pos_trace += float(np.sum(w[w > 0]))
        neg_part = float(-np.sum(w[w < 0]))
        sign = 1.0 if c.sense == "neg" else -1.0
        gamma = 0.0
        offset = 0
        for v in variables:
            if v.name in c.terms:
                coeffs = c.terms[v.name]
                r[offset : offset + v.size] += sign * np.einsum("kij,ij->k", coeffs, Z)
                gamma += float(np.sum(np.linalg.norm(coeffs, ord=2, axis=(1, 2))))
            offset += v.size
        neg_penalty += gamma * neg_part
    if pos_trace <= 0:
        return -math.inf
    b = problem.variable_bound
    return problem.margin - b * (np.sum(np.abs(r)) + neg_penalty) / pos_trace


def _dual_map(problem) -> list[np.ndarray]:
    """Per-constraint tensors ``T_c[k] = s_c F_ck`` so that ``r = sum_c <T_c, Z_c>``."""
    maps = []
    for c in problem.constraints:
        sign = 1.0 if c.sense == "neg" else -1.0
        blocks = []
        for v in problem.variables:
            if v.name in c.terms:
                blocks.append(sign * c.terms[v.name])
            else:
                blocks.append(np.zeros((v.size, c.size, c.size)))
        maps.append(np.concatenate(blocks) if blocks else np.zeros((0, c.size, c.size)))
    return maps


def _factor_refine(problem, duals, rank_rtol, iters=60):
    """Levenberg-Marquardt on ``r(U) = sum_c <T_c, U_c U_c^T> = 0`` with ``sum |U_c|_F^2 = 1``.

    Starting from the dominant eigenvectors of the solver duals; the factored
    form keeps every ``Z_c = U_c U_c^T`` exactly PSD.  The Jacobian is rank
    deficient at a solution (scaling and rotations of ``U_c``), so steps are
    damped and only accepted when they reduce the residual.
    """
    maps = _dual_map(problem)
    sym_maps = [T + T.transpose(0, 2, 1) for T in maps]
    top = max(float(np.max(np.linalg.eigvalsh(0.5 * (Z + Z.T)))) for Z in duals)
    if top <= 0:
        return None
    Us = []
    for Z in duals:
        w, V = np.linalg.eigh(0.5 * (Z + Z.T))
        keep = w > rank_rtol * top
        Us.append(V[:, keep] * np.sqrt(w[keep]))
    size = sum(U.size for U in Us)
    if size == 0:
        return None

    def normalized(Us):
        scale = math.sqrt(sum(float(np.sum(U * U)) for U in Us))
        return [U / scale for U in Us]

    def residual(Us):
        return sum(np.einsum("kij,ij->k", T, U @ U.T) for T, U in zip(maps, Us))

    Us = normalized(Us)
    r = residual(Us)
    cost = float(np.sum(np.abs(r)))
    best = [U @ U.T for U in Us]
    best_gap = verify_infeasibility_certificate(problem, best)
    mu = 1e-12
    for _ in range(iters):
        if cost < 1e-16:
            break
        jac = np.hstack([np.einsum("kij,ja->kia", S, U).reshape(len(r), -1) for S, U in zip(sym_maps, Us)])
        # r is homogeneous in U; keep the step tangent to the unit sphere
        flat = np.concatenate([U.reshape(-1) for U in Us])
        lhs = np.vstack([jac, flat, math.sqrt(mu) * np.eye(size)])
        rhs = np.concatenate([-r, [0.0], np.zeros(size)])
        step = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        trial = []
        pos = 0
        for U in Us:
            trial.append(U + step[pos : pos + U.size].reshape(U.shape))
            pos += U.size
        trial = normalized(trial)
        r_trial = residual(trial)
        c_trial = float(np.sum(np.abs(r_trial)))
        if c_trial < cost:
            Us, r, cost = trial, r_trial, c_trial
            mu = max(mu / 10, 1e-16)
            Zs = [U @ U.T for U in Us]
            gap = verify_infeasibility_certificate(problem, Zs)
            if gap > best_gap:
                best, best_gap = Zs, gap
        else:
            mu *= 100
            if mu > 1e4:
                break
    return best, best_gap


def _project_refine(problem, duals, rounds=8):
    """Alternate projections onto ``r = 0`` and the PSD cone."""
    maps = _dual_map(problem)
    sizes = [c.size for c in problem.constraints]
    L = np.hstack([T.reshape(T.shape[0], -1) for T in maps])
    L_pinv = np.linalg.pinv(L)
    best = list(duals)
    best_gap = verify_infeasibility_certificate(problem, best)
    cur = [0.5 * (Z + Z.T) for Z in duals]
    for _ in range(rounds):
        flat = np.concatenate([Z.reshape(-1) for Z in cur])
        flat = flat - L_pinv @ (L @ flat)
        cur = []
        pos = 0
        for m in sizes:
            Z = flat[pos : pos + m * m].reshape(m, m)
            cur.append(0.5 * (Z + Z.T))
            pos += m * m
        gap = verify_infeasibility_certificate(problem, cur)
        if gap > best_gap:
            best, best_gap = list(cur), gap
        clipped = []
        for Z in cur:
            w, V = np.linalg.eigh(Z)
            clipped.append((V * np.maximum(w, 0)) @ V.T)
        cur = clipped
        gap = verify_infeasibility_certificate(problem, cur)
        if gap > best_gap:
            best, best_gap = list(cur), gap
    return best, best_gap


def _refine_certificate(problem, duals):
    best, best_gap = list(duals), verify_infeasibility_certificate(problem, duals)
    if best_gap > 0:
        return best, best_gap
    for rtol in (1e-6, 1e-4, 1e-8, 1e-3):
        out = _factor_refine(problem, duals, rtol)
        if out is not None and out[1] > best_gap:
            best, best_gap = out
        if best_gap > 0:
            return best, best_gap
    out = _project_refine(problem, duals)
    if out[1] > best_gap:
        best, best_gap = out
    return best, best_gap


def _dual_search(problem, solver: str):
    """Solve for a certificate directly: ``Z_c >= 0``, ``sum tr Z_c = 1``, minimize ``|r|_1``.

    By the theorem of alternatives for homogeneous LMIs such ``Z`` with
    ``r = 0`` exists exactly when no strictly feasible point does.  Used when
    the primal duals are a poor start, e.g. when the box optimum sits at a
    slack of zero (an unstable real eigenvalue makes the problem only weakly
    infeasible).
    """
    import cvxpy as cp

    maps = _dual_map(problem)
    Zs = [cp.Variable((c.size, c.size), PSD=True) for c in problem.constraints]
    r = 0
    for T, Z in zip(maps, Zs):
        if T.shape[0]:
            r = r + T.reshape(T.shape[0], -1) @ cp.vec(Z, order="C")
    prob = cp.Problem(cp.Minimize(cp.norm1(r)), [sum(cp.trace(Z) for Z in Zs) == 1])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob.solve(solver=solver)
    except Exception:  # noqa: BLE001
        return None
    if any(Z.value is None for Z in Zs):
        return None
    return [np.asarray(Z.value, dtype=float) for Z in Zs]


def _assignment_from_params(problem, x) -> dict[str, np.ndarray]:
    out = {}
    offset = 0
    for v in problem.variables:
        out[v.name] = v.to_matrix(x[offset : offset + v.size])
        offset += v.size
    return out


def solve_feasibility(problem: LmiFeasibilityProblem, solver: str = "CLARABEL") -> FeasibilityResult:
    """Search for a margin-feasible point; certify feasibility or infeasibility.

    The search maximizes a common slack ``t`` over the unit box (the
    constraints are homogeneous), then scales the point to ``variable_bound``.
    """
    import cvxpy as cp

    K = problem.n_params
    x = cp.Variable(K) if K else None
    t = cp.Variable()
    cons = []
    lmi_cons = []
    offsets = {}
    pos = 0
    for v in problem.variables:
        offsets[v.name] = pos
        pos += v.size
    for c in problem.constraints:
        expr = 0
        for vname, coeffs in c.terms.items():
            v = problem.variable_map[vname]
            o = offsets[vname]
            mat = coeffs.reshape(v.size, -1).T  # (m*m, k)
            expr = expr + cp.reshape(mat @ x[o : o + v.size], (c.size, c.size), order="C")
        if isinstance(expr, int):
            expr = np.zeros((c.size, c.size))
        expr = 0.5 * (expr + expr.T)
        eye = np.eye(c.size)
        con = (expr + t * eye << 0) if c.sense == "neg" else (expr - t * eye >> 0)
        lmi_cons.append(con)
    cons.extend(lmi_cons)
    if K:
        cons.append(cp.abs(x) <= 1)
    prob = cp.Problem(cp.Maximize(t), cons + [t <= 1e6])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob.solve(solver=solver)
    except Exception as exc:  # noqa: BLE001 - any backend failure is inconclusive
        return FeasibilityResult("inconclusive", None, math.nan, solver_status="error",
                                 diagnostic=f"solver failure: {exc}")
    status = prob.status or ""
    if x is None or x.value is None:
        return FeasibilityResult("inconclusive", None, math.nan, solver_status=status,
                                 diagnostic="solver returned no primal point")
    b = problem.variable_bound
    xv = np.asarray(x.value, dtype=float)
    # the interior-point box may overshoot by the solver tolerance
    xv = xv / max(1.0, float(np.max(np.abs(xv))) if xv.size else 1.0)
    assignment = _assignment_from_params(problem, b * xv)
    slack = verify_assignment(problem, assignment)
    if slack >= problem.margin and _within_bound(problem, assignment):
        return FeasibilityResult("feasible", assignment, slack, solver_status=status)
    duals = [con.dual_value for con in lmi_cons]
    if all(d is not None for d in duals):
        duals = [np.atleast_2d(np.asarray(d, dtype=float)) for d in duals]
        duals, gap = _refine_certificate(problem, duals)
        if not gap > 0:
            direct = _dual_search(problem, solver)
            if direct is not None:
                cand, cgap = _refine_certificate(problem, direct)
                if cgap > gap:
                    duals, gap = cand, cgap
        if gap > 0:
            return FeasibilityResult("infeasible", assignment, slack, infeasibility_gap=gap,
                                     solver_status=status)
        diag = f"verified slack {slack:.3g} below margin and dual certificate gap {gap:.3g} not positive"
    else:
        gap = math.nan
        diag = "verified slack below margin and no dual certificate available"
    return FeasibilityResult("inconclusive", assignment, slack, infeasibility_gap=gap,
                             solver_status=status, diagnostic=diag)


def lmi_stability_check(
    system: MultiOrderSystem,
    margin: float = DEFAULT_MARGIN,
    variable_bound: float = DEFAULT_BOUND,
) -> StabilityVerdict:
    real = lift(system)
    return lmi_verdict(real.Abig, real.alpha_c, margin, variable_bound)


def lmi_verdict(Abig, alpha_c, margin=DEFAULT_MARGIN, variable_bound=DEFAULT_BOUND) -> StabilityVerdict:
    """Stability verdict for ``D^{alpha_c} z = Abig z`` from the LMI route."""
    problem = build_stability_lmi(Abig, alpha_c, margin, variable_bound)
    res = solve_feasibility(problem)
    boundary = float(alpha_c) * math.pi / 2
    if res.status == "feasible":
        return StabilityVerdict("stable", "lmi", res.certificate_margin, boundary)
    if res.status == "infeasible":
        detail = f"certified: no solution with margin {margin:g} inside the box |x| <= {variable_bound:g}"
        return StabilityVerdict("unstable", "lmi", -res.infeasibility_gap, boundary, detail=detail)
    return StabilityVerdict("inconclusive", "lmi", 0.0, boundary, detail=res.diagnostic)


# --------------------------------------------------------------------------
# plain-text serialization


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dump_problem(problem: LmiFeasibilityProblem) -> str:
    """Plain-text dump: variables, then every coefficient matrix row-major."""
    out = io.StringIO()
    out.write("lmi-feasibility 1\n")
    out.write(f"margin {_fmt(problem.margin)}\n")
    out.write(f"variable_bound {_fmt(problem.variable_bound)}\n")
    for v in problem.variables:
        out.write(f"variable {v.name} {v.structure} {v.shape[0]} {v.shape[1]}\n")
    for c in problem.constraints:
        out.write(f"constraint {c.sense} {c.size} {c.name}\n")
        for vname, coeffs in c.terms.items():
            for k, F in enumerate(coeffs):
                out.write(f"term {vname} {k}\n")
                for row in F:
                    out.write(" ".join(_fmt(e) for e in row) + "\n")
    return out.getvalue()


def load_problem(text: str) -> LmiFeasibilityProblem:
    lines = iter(text.splitlines())
    header = next(lines).split()
    if header != ["lmi-feasibility", "1"]:
        raise ValueError("not an lmi-feasibility dump")
    margin = bound = None
    variables: list[MatrixVariable] = []
    constraints: list[LmiConstraint] = []
    current = None
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "margin":
            margin = float(parts[1])
        elif key == "variable_bound":
            bound = float(parts[1])
        elif key == "variable":
            variables.append(MatrixVariable(parts[1], (int(parts[3]), int(parts[4])), parts[2]))
        elif key == "constraint":
            current = LmiConstraint(" ".join(parts[3:]), parts[1], int(parts[2]), {})
            constraints.append(current)
        elif key == "term":
            vname, k = parts[1], int(parts[2])
            var = next(v for v in variables if v.name == vname)
            F = np.array([[float(e) for e in next(lines).split()] for _ in range(current.size)])
            if vname not in current.terms:
                current.terms[vname] = np.zeros((var.size, current.size, current.size))
            current.terms[vname][k] = F
        else:
            raise ValueError(f"unrecognized line {line!r}")
    return LmiFeasibilityProblem(variables, constraints, margin, bound)
