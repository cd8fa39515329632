"""JSON documents for plants, controllers and analysis reports.

One format covers all three so a synthesized controller can be fed straight
back into a closed-loop simulation::

    {"A": [[...]], "B": [[...]], "C": [[...]], "orders": ["0.93", "1.55"],
     "x0": [...], "x0_deriv": [...],
     "controller": {"nc": 1, "Ac": [[...]], "Bc": [[...]], "Cc": [[...]], "Dc": [[...]]}}
"""
from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import MultiOrderSystem, OrderError, parse_order
from .synthesis import ControllerRealization

__all__ = [
    "DocumentError",
    "SystemDocument",
    "parse_document",
    "load_document",
    "dump_document",
    "controller_block",
    "dumps_report",
    "atomic_write",
]

_KNOWN = {"A", "B", "C", "orders", "x0", "x0_deriv", "controller"}
_CONTROLLER_KNOWN = {"Ac", "Bc", "Cc", "Dc", "nc"}


class DocumentError(ValueError):
    """Malformed input document; ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class SystemDocument:
    system: MultiOrderSystem
    orders_text: tuple[str, ...]
    controller: ControllerRealization | None = None


def _matrix(value, name: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or any(not isinstance(r, list) for r in value):
        raise DocumentError("expected a nested array (list of rows)", name)
    widths = {len(r) for r in value}
    if len(widths) > 1:
        raise DocumentError(f"ragged rows with lengths {sorted(widths)}", name)
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"non-numeric entry ({exc})", name) from None
    if arr.size == 0:
        # [] and [[], []] both mean "no columns"; keep the row count if known
        arr = np.zeros((len(value) if value else (rows or 0), 0))
        if arr.shape[0] == 0 and cols is not None:
            arr = np.zeros((0, cols))
    if arr.ndim != 2:
        raise DocumentError("expected a 2-D matrix", name)
    if not np.all(np.isfinite(arr)):
        raise DocumentError("non-finite entry", name)
    if rows is not None and arr.shape[0] != rows:
        raise DocumentError(f"expected {rows} rows, got {arr.shape[0]}", name)
    if cols is not None and arr.shape[1] != cols:
        raise DocumentError(f"expected {cols} columns, got {arr.shape[1]}", name)
    return arr


def _vector(value, name: str, n: int) -> np.ndarray:
    if not isinstance(value, list):
        raise DocumentError("expected an array", name)
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"non-numeric entry ({exc})", name) from None
    if arr.shape != (n,):
        raise DocumentError(f"expected {n} entries, got shape {arr.shape}", name)
    return arr


def _controller(block, l: int, m: int) -> ControllerRealization:
    if not isinstance(block, dict):
        raise DocumentError("expected an object", "controller")
    extra = set(block) - _CONTROLLER_KNOWN
    if extra:
        raise DocumentError(f"unknown keys {sorted(extra)}", "controller")
    if "Dc" not in block:
        raise DocumentError("missing", "controller.Dc")
    nc = block.get("nc", 0)
    if not isinstance(nc, int) or isinstance(nc, bool) or nc < 0:
        raise DocumentError("expected a nonnegative integer", "controller.nc")
    Dc = _matrix(block["Dc"], "controller.Dc", l, m)
    Ac = _matrix(block.get("Ac", []), "controller.Ac", nc, nc)
    Bc = _matrix(block.get("Bc", []), "controller.Bc", nc, m)
    Cc = _matrix(block.get("Cc", [[] for _ in range(l)]), "controller.Cc", l, nc)
    return ControllerRealization(Ac, Bc, Cc, Dc)


def parse_document(text: str) -> SystemDocument:
    """Validate a JSON system document; errors carry line or field locations."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise DocumentError("top level must be an object")
    extra = set(raw) - _KNOWN
    if extra:
        raise DocumentError(f"unknown keys {sorted(extra)}")
    for key in ("A", "orders"):
        if key not in raw:
            raise DocumentError("missing", key)
    A = _matrix(raw["A"], "A")
    n = A.shape[0]
    if A.shape != (n, n) or n == 0:
        raise DocumentError(f"expected a nonempty square matrix, got {A.shape}", "A")
    orders_raw = raw["orders"]
    if not isinstance(orders_raw, list) or len(orders_raw) != n:
        raise DocumentError(f"expected an array of {n} decimal strings", "orders")
    orders = []
    for i, o in enumerate(orders_raw):
        try:
            orders.append(parse_order(o))
        except OrderError as exc:
            raise DocumentError(str(exc), f"orders[{i}]") from None
    B = _matrix(raw["B"], "B", n) if "B" in raw else np.zeros((n, 0))
    C = _matrix(raw["C"], "C", None, n) if "C" in raw else np.zeros((0, n))
    x0 = _vector(raw["x0"], "x0", n) if raw.get("x0") is not None else None
    xd = _vector(raw["x0_deriv"], "x0_deriv", n) if raw.get("x0_deriv") is not None else None
    try:
        system = MultiOrderSystem(A, orders, B, C, x0, xd)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None
    controller = None
    if raw.get("controller") is not None:
        controller = _controller(raw["controller"], system.n_inputs, system.n_outputs)
    return SystemDocument(system, tuple(o.decimal() for o in orders), controller)


def load_document(path) -> SystemDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    return parse_document(text)


def _rows(M) -> list:
    M = np.asarray(M, dtype=float)
    return [[float(v) for v in row] for row in M]


def controller_block(controller: ControllerRealization) -> dict:
    return {
        "nc": controller.n_c,
        "Ac": _rows(controller.Ac),
        "Bc": _rows(controller.Bc),
        "Cc": _rows(controller.Cc),
        "Dc": _rows(controller.Dc),
    }


def dump_document(doc: SystemDocument, controller: ControllerRealization | None = None) -> str:
    """Serialize a document, optionally replacing its controller block."""
    s = doc.system
    out = {"A": _rows(s.A), "orders": list(doc.orders_text)}
    if s.n_inputs:
        out["B"] = _rows(s.B)
    if s.n_outputs:
        out["C"] = _rows(s.C)
    if s.x0 is not None:
        out["x0"] = [float(v) for v in s.x0]
    if s.x0_deriv is not None:
        out["x0_deriv"] = [float(v) for v in s.x0_deriv]
    ctrl = controller if controller is not None else doc.controller
    if ctrl is not None:
        out["controller"] = controller_block(ctrl)
    return _dumps(out)


_FLAT_ARRAY = re.compile(r"\[[^\[\]{}]*\]")


def _dumps(obj) -> str:
    # innermost arrays (matrix rows, vectors) on one line each
    text = json.dumps(obj, indent=2, allow_nan=True)
    text = _FLAT_ARRAY.sub(lambda m: "[" + ", ".join(v.strip() for v in m.group(0)[1:-1].split(",") if v.strip()) + "]", text)
    return text + "\n"


def dumps_report(body: dict, timing: dict | None = None) -> str:
    """Report text; wall-clock numbers live only under ``"timing"``."""
    out = dict(body)
    if timing is not None:
        out["timing"] = {k: round(v, 6) for k, v in timing.items()}
    return _dumps(out)


def atomic_write(path, text: str) -> None:
    """Write to a sibling temp file, then rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
