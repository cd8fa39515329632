"""``fracstab`` command line: expand, stability, synthesize, simulate.

Exit codes
----------
0  stable / success
1  unstable, infeasible synthesis, or simulation divergence
2  bad input (parse errors, unsupported order for the LMI route)
3  inconclusive LMI outcome
4  internal inconsistency (method disagreement, recovery or verification failure)
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .docio import DocumentError, atomic_write, controller_block, dump_document, dumps_report, load_document
from .lmi import DEFAULT_BOUND, DEFAULT_MARGIN, UnsupportedOrderError, lmi_verdict
from .model import LiftingError, OrderError, lift
from .sim import SimConfig, simulate, simulate_closed_loop, write_csv
from .spectral import ConvergenceError, argument_stability_test
from .svg import eigenvalue_plot, line_plot
from .synthesis import (
    RecoveryError,
    SynthesisInfeasible,
    VerificationError,
    assemble_closed_loop,
    synthesize,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INCONCLUSIVE, EXIT_INCONSISTENT = 0, 1, 2, 3, 4

# spectral margins closer to zero than this are treated as boundary cases
AGREE_TOL = 1e-6


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _rows(M) -> list:
    return [[float(v) for v in row] for row in np.asarray(M, dtype=float)]


def _lifting_block(real) -> dict:
    return {"alpha_c": real.alpha_c.decimal(), "p": list(real.p), "N": real.N}


def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def _echo(doc) -> dict:
    return json.loads(dump_document(doc))


def cmd_expand(args) -> int:
    doc = load_document(args.input)
    t0 = time.perf_counter()
    real = lift(doc.system)
    body = {
        "command": "expand",
        "input": _echo(doc),
        "lifting": _lifting_block(real),
        "Abig": _rows(real.Abig),
        "Bbig": _rows(real.Bbig),
        "Cbig": _rows(real.Cbig),
        "z0": [float(v) for v in real.z0],
        "exit_code": EXIT_OK,
    }
    _emit(dumps_report(body, {"expand_s": time.perf_counter() - t0}), args.output)
    return EXIT_OK


def _stability_exit(verdicts: dict) -> tuple[int, str]:
    spec, lmi = verdicts.get("spectral"), verdicts.get("lmi")
    if spec is not None and lmi is not None:
        if lmi.status == "inconclusive":
            return EXIT_INCONCLUSIVE, "LMI route inconclusive"
        if spec.status != lmi.status:
            if abs(spec.margin) < AGREE_TOL:
                return EXIT_INCONCLUSIVE, "methods disagree on a boundary case"
            return EXIT_INCONSISTENT, f"spectral says {spec.status}, LMI says {lmi.status}"
        return (EXIT_OK if spec.stable else EXIT_NEGATIVE), ""
    v = spec if spec is not None else lmi
    if v.status == "inconclusive":
        return EXIT_INCONCLUSIVE, v.detail
    return (EXIT_OK if v.stable else EXIT_NEGATIVE), ""


def cmd_stability(args) -> int:
    doc = load_document(args.input)
    real = lift(doc.system)
    alpha = real.alpha_c.fraction
    if args.method in ("lmi", "both") and not 0 < alpha < 1:
        raise UnsupportedOrderError(
            f"the LMI route needs 0 < alpha_c < 1 (got {real.alpha_c}); use --method spectral"
        )
    verdicts, timing = {}, {}
    if args.method in ("spectral", "both"):
        t0 = time.perf_counter()
        verdicts["spectral"] = argument_stability_test(real, alpha)
        timing["spectral_s"] = time.perf_counter() - t0
    if args.method in ("lmi", "both"):
        t0 = time.perf_counter()
        verdicts["lmi"] = lmi_verdict(real.Abig, alpha, args.margin, args.bound)
        timing["lmi_s"] = time.perf_counter() - t0
    code, note = _stability_exit(verdicts)
    body = {
        "command": "stability",
        "input": _echo(doc),
        "options": {"method": args.method, "margin": args.margin, "bound": args.bound},
        "lifting": _lifting_block(real),
        "verdicts": {k: v.as_dict() for k, v in verdicts.items()},
        "exit_code": code,
    }
    if note:
        body["note"] = note
    _emit(dumps_report(body, timing), args.output)
    if args.plot:
        eigs = verdicts["spectral"].eigenvalues if "spectral" in verdicts else argument_stability_test(real, alpha).eigenvalues
        atomic_write(args.plot, eigenvalue_plot(eigs, float(alpha), title=f"eigenvalues, alpha_c = {real.alpha_c}"))
    if note:
        print(f"fracstab: {note}", file=sys.stderr)
    return code


def cmd_synthesize(args) -> int:
    doc = load_document(args.input)
    s = doc.system
    if s.n_inputs == 0 or s.n_outputs == 0:
        raise DocumentError("synthesis needs both B and C", "B" if s.n_inputs == 0 else "C")
    if args.nc < 0:
        raise DocumentError("controller order must be nonnegative", "--nc")
    real = lift(s)
    if not 0 < real.alpha_c.fraction < 1:
        raise UnsupportedOrderError(f"synthesis needs 0 < alpha_c < 1 (got {real.alpha_c})")
    t0 = time.perf_counter()
    body = {
        "command": "synthesize",
        "input": _echo(doc),
        "options": {"nc": args.nc, "margin": args.margin, "bound": args.bound},
        "lifting": _lifting_block(real),
    }
    try:
        res = synthesize(s, args.nc, args.margin, args.bound)
    except SynthesisInfeasible as exc:
        code = EXIT_INCONCLUSIVE if exc.status == "inconclusive" else EXIT_NEGATIVE
        body["synthesis"] = {"status": exc.status, "message": str(exc)}
        body["exit_code"] = code
        _emit(dumps_report(body, {"synthesis_s": time.perf_counter() - t0}), args.output)
        raise _Fail(code, str(exc)) from None
    except (RecoveryError, VerificationError) as exc:
        body["synthesis"] = {"status": "failed", "message": str(exc)}
        body["exit_code"] = EXIT_INCONSISTENT
        _emit(dumps_report(body, {"synthesis_s": time.perf_counter() - t0}), args.output)
        raise _Fail(EXIT_INCONSISTENT, str(exc)) from None
    elapsed = time.perf_counter() - t0
    ctrl_path = args.controller_out or Path(args.input).with_suffix(f".nc{args.nc}.json")
    atomic_write(ctrl_path, dump_document(doc, res.controller))
    body["synthesis"] = {
        "status": "feasible",
        "controller": controller_block(res.controller),
        "controller_file": str(ctrl_path),
        "recovery_residual": res.recovery_residual,
        "refined": res.refined,
        "closed_loop": res.closed_loop_verdict.as_dict(),
    }
    body["exit_code"] = EXIT_OK
    _emit(dumps_report(body, {"synthesis_s": elapsed}), args.output)
    if args.plot:
        v = res.closed_loop_verdict
        atomic_write(args.plot, eigenvalue_plot(v.eigenvalues, float(real.alpha_c), title="closed-loop eigenvalues"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = load_document(args.input)
    memory = "full" if args.memory in (None, "full") else int(args.memory)
    config = SimConfig(step=args.step, t_final=args.t_final, memory_length=memory, scheme=args.scheme)
    if args.closed_loop:
        if doc.controller is None:
            raise DocumentError("--closed-loop needs a controller block", "controller")
        traj = simulate_closed_loop(doc.system, doc.controller, config)
        real = lift(assemble_closed_loop(doc.system, doc.controller))
    else:
        traj = simulate(doc.system, None, config)
        real = lift(doc.system)
    _emit(write_csv(traj), args.output)
    if args.plot:
        x = traj.pseudo_states
        labels = [f"x_{i + 1}" for i in range(doc.system.n)] + [f"xc_{i + 1}" for i in range(x.shape[1] - doc.system.n)]
        atomic_write(args.plot, line_plot(traj.times, x, labels, title="pseudo-states", ylabel="x"))
    if args.eig_plot:
        v = argument_stability_test(real, real.alpha_c.fraction)
        atomic_write(args.eig_plot, eigenvalue_plot(v.eigenvalues, float(real.alpha_c), title="eigenvalues of the lift"))
    if traj.diverged:
        raise _Fail(EXIT_NEGATIVE, traj.diagnostic)
    return EXIT_OK


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracstab", description="Stability analysis and stabilization of multi-order fractional systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, lmi=False):
        p.add_argument("input", help="system document (JSON)")
        p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
        p.add_argument("--plot", default=None, help="write an SVG plot to this path")
        if lmi:
            p.add_argument("--margin", type=_positive, default=DEFAULT_MARGIN, help="strictness margin of the LMIs")
            p.add_argument("--bound", type=_positive, default=DEFAULT_BOUND, help="entrywise bound on LMI variables")

    p = sub.add_parser("expand", help="lift to a commensurate realization")
    p.add_argument("input", help="system document (JSON)")
    p.add_argument("-o", "--output", default=None, help="report path (default stdout)")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("stability", help="sector test and/or LMI test")
    common(p, lmi=True)
    p.add_argument("--method", choices=("spectral", "lmi", "both"), default="both")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("synthesize", help="output-feedback controller of a given order")
    common(p, lmi=True)
    p.add_argument("--nc", type=int, required=True, help="controller order")
    p.add_argument("--controller-out", default=None, help="where to write the plant+controller document")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="Grunwald-Letnikov time response (CSV)")
    common(p)
    p.add_argument("--step", type=_positive, default=1e-2)
    p.add_argument("--t-final", type=_positive, default=10.0)
    p.add_argument("--memory", default="full", help="history length in steps, or 'full'")
    p.add_argument("--scheme", choices=("explicit", "implicit"), default="explicit")
    p.add_argument("--closed-loop", action="store_true", help="close the loop with the document's controller")
    p.add_argument("--eig-plot", default=None, help="write the lifted eigenvalue SVG to this path")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"fracstab: {exc}", file=sys.stderr)
        return exc.code
    except UnsupportedOrderError as exc:
        print(f"fracstab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DocumentError, OrderError, LiftingError) as exc:
        print(f"fracstab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"fracstab: eigenvalue iteration failed: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
