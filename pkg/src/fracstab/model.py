"""Multi-order fractional LTI systems and their commensurate lifting.

A system ``D^{alpha_i} x_i = (A x + B u)_i`` whose orders are rational
multiples of a common base order ``alpha_c`` is rewritten as a single-order
system ``D^{alpha_c} z = Abig z + Bbig u`` by chaining ``p_i = alpha_i /
alpha_c`` pseudo-states per original state.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from numbers import Integral
from typing import Sequence

import numpy as np

__all__ = [
    "OrderError",
    "LiftingError",
    "RationalOrder",
    "MultiOrderSystem",
    "CommensurateRealization",
    "parse_order",
    "commensurate_base",
    "expand_state_matrix",
    "expand_input_output",
    "lift_initial_conditions",
    "lift",
    "DEFAULT_MAX_DIM",
]

DEFAULT_MAX_DIM = 512

_DECIMAL_RE = re.compile(r"^\s*(\d+)(?:\.(\d{1,6}))?\s*$")


class OrderError(ValueError):
    """Raised for malformed or out-of-range derivative orders."""


class LiftingError(ValueError):
    """Raised when a system cannot be lifted (dimension mismatch, size cap)."""


@dataclass(frozen=True, order=False)
class RationalOrder:
    """Exact derivative order ``numerator / denominator`` in (0, 2)."""

    numerator: int
    denominator: int = 1

    def __post_init__(self):
        num, den = self.numerator, self.denominator
        if isinstance(num, bool) or not isinstance(num, Integral) or not isinstance(den, Integral):
            raise OrderError("order numerator and denominator must be integers")
        num, den = int(num), int(den)
        if num <= 0 or den <= 0:
            raise OrderError(f"order must be positive, got {num}/{den}")
        g = gcd(num, den)
        object.__setattr__(self, "numerator", num // g)
        object.__setattr__(self, "denominator", den // g)
        if self.numerator >= 2 * self.denominator:
            raise OrderError(f"order must be < 2, got {self}")

    @classmethod
    def from_fraction(cls, value: Fraction) -> "RationalOrder":
        return cls(value.numerator, value.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator

    def decimal(self) -> str:
        """Exact decimal text when the denominator allows it, else ``n/d``."""
        den = self.denominator
        twos = fives = 0
        while den % 2 == 0:
            den //= 2
            twos += 1
        while den % 5 == 0:
            den //= 5
            fives += 1
        if den != 1:
            return f"{self.numerator}/{self.denominator}"
        digits = max(twos, fives)
        scaled = self.numerator * 10**digits // self.denominator
        if digits == 0:
            return str(scaled)
        whole, frac = divmod(scaled, 10**digits)
        return f"{whole}.{frac:0{digits}d}"

    def __str__(self) -> str:
        return self.decimal()


def parse_order(text: str) -> RationalOrder:
    """Parse a decimal string such as ``"0.93"`` into an exact order.

    Floats are rejected on purpose; the gcd of binary floats is meaningless.
    """
    if not isinstance(text, str):
        raise OrderError(f"orders must be given as decimal strings, got {type(text).__name__}")
    m = _DECIMAL_RE.match(text)
    if m is None:
        raise OrderError(f"malformed order {text!r} (expected a decimal with at most 6 fractional digits)")
    value = Fraction(text.strip())
    if not 0 < value < 2:
        raise OrderError(f"order {text!r} outside the admissible range (0, 2)")
    return RationalOrder.from_fraction(value)


def _as_order(value) -> RationalOrder:
    if isinstance(value, RationalOrder):
        return value
    if isinstance(value, Fraction):
        return RationalOrder.from_fraction(value)
    if isinstance(value, str):
        return parse_order(value)
    raise OrderError(f"cannot interpret {value!r} as an exact order")


def commensurate_base(orders: Sequence[RationalOrder]) -> tuple[RationalOrder, tuple[int, ...]]:
    """Greatest common divisor of rational orders and the integer multiples.

    Returns ``(alpha_c, p)`` with ``p[i] * alpha_c == orders[i]`` exactly.
    """
    orders = [_as_order(o) for o in orders]
    if not orders:
        raise OrderError("at least one order is required")
    common = reduce(lcm, (o.denominator for o in orders))
    scaled = [o.numerator * (common // o.denominator) for o in orders]
    g = reduce(gcd, scaled)
    alpha_c = RationalOrder(g, common)
    p = tuple(s // g for s in scaled)
    return alpha_c, p


def _offsets(p: Sequence[int]) -> np.ndarray:
    return np.concatenate(([0], np.cumsum(p))).astype(int)


def _frozen(a, ndim=2) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise LiftingError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def expand_state_matrix(A, orders: Sequence[RationalOrder], max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Block matrix of the lifted state equation.

    Diagonal block ``i`` is a ``p_i x p_i`` shift (ones on the superdiagonal)
    with ``a_ii`` in its bottom-left corner; off-diagonal block ``(i, j)`` holds
    ``a_ij`` in its bottom-left corner and zeros elsewhere.
    """
    A = np.asarray(A, dtype=float)
    n = len(orders)
    if A.shape != (n, n):
        raise LiftingError(f"A has shape {A.shape}, expected ({n}, {n}) for {n} orders")
    _, p = commensurate_base(orders)
    N = sum(p)
    if N > max_dim:
        raise LiftingError(f"lifted dimension N={N} exceeds the cap of {max_dim}")
    off = _offsets(p)
    big = np.zeros((N, N))
    for i in range(n):
        lo, last = off[i], off[i + 1] - 1
        for k in range(lo, last):
            big[k, k + 1] = 1.0
        big[last, off[:-1]] = A[i, :]
    return big


def expand_input_output(B, C, orders: Sequence[RationalOrder]) -> tuple[np.ndarray, np.ndarray]:
    """Lifted input and output matrices.

    Row ``i`` of ``B`` lands on the last row of block ``i``; column ``j`` of
    ``C`` lands on the first column of block ``j``.
    """
    n = len(orders)
    B = np.atleast_2d(np.asarray(B, dtype=float)) if np.size(B) else np.zeros((n, 0))
    C = np.atleast_2d(np.asarray(C, dtype=float)) if np.size(C) else np.zeros((0, n))
    if B.ndim != 2 or C.ndim != 2 or B.shape[0] != n or C.shape[1] != n:
        raise LiftingError(f"B {B.shape} / C {C.shape} inconsistent with {n} states")
    _, p = commensurate_base(orders)
    off = _offsets(p)
    N = int(off[-1])
    Bbig = np.zeros((N, B.shape[1]))
    Cbig = np.zeros((C.shape[0], N))
    Bbig[off[1:] - 1, :] = B
    Cbig[:, off[:-1]] = C
    return Bbig, Cbig


def lift_initial_conditions(x0, x0_deriv, orders: Sequence[RationalOrder]) -> np.ndarray:
    """Initial pseudo-state of the lifted system.

    ``z_{i,1}(0) = x0_i``; the entry whose Caputo order ``(k-1) alpha_c`` is
    exactly 1 takes ``x0_deriv_i``; every other entry is zero.
    """
    orders = [_as_order(o) for o in orders]
    n = len(orders)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    xd = np.zeros(n) if x0_deriv is None else np.asarray(x0_deriv, dtype=float).reshape(-1)
    if x0.shape != (n,) or xd.shape != (n,):
        raise LiftingError("initial condition vectors must have one entry per state")
    for i, o in enumerate(orders):
        if o.fraction < 1 and xd[i] != 0:
            raise LiftingError(
                f"x0_deriv[{i}] = {xd[i]} given for order {o} < 1 (must be zero)"
            )
    alpha_c, p = commensurate_base(orders)
    off = _offsets(p)
    z0 = np.zeros(int(off[-1]))
    for i in range(n):
        z0[off[i]] = x0[i]
        # (k - 1) * alpha_c == 1  <=>  k - 1 == 1 / alpha_c, an integer
        inv = 1 / alpha_c.fraction
        if inv.denominator == 1 and 1 <= inv.numerator < p[i]:
            z0[off[i] + inv.numerator] = xd[i]
    return z0


@dataclass(frozen=True)
class MultiOrderSystem:
    """``D^{alpha_i} x_i = (A x + B u)_i``, ``y = C x``."""

    A: np.ndarray
    orders: tuple[RationalOrder, ...]
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    x0: np.ndarray | None = None
    x0_deriv: np.ndarray | None = None

    def __post_init__(self):
        orders = tuple(_as_order(o) for o in self.orders)
        n = len(orders)
        if n == 0:
            raise LiftingError("a system needs at least one state")
        A = _frozen(self.A)
        if A.shape != (n, n):
            raise LiftingError(f"A has shape {A.shape}, expected ({n}, {n})")
        B = _frozen(np.zeros((n, 0)) if self.B is None or np.size(self.B) == 0 else self.B)
        C = _frozen(np.zeros((0, n)) if self.C is None or np.size(self.C) == 0 else self.C)
        if B.shape[0] != n:
            raise LiftingError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise LiftingError(f"C has {C.shape[1]} columns, expected {n}")
        x0 = _frozen(np.zeros(n) if self.x0 is None else self.x0, ndim=1)
        xd = _frozen(np.zeros(n) if self.x0_deriv is None else self.x0_deriv, ndim=1)
        if x0.shape != (n,) or xd.shape != (n,):
            raise LiftingError("x0 and x0_deriv must have one entry per state")
        for name, val in (("orders", orders), ("A", A), ("B", B), ("C", C), ("x0", x0), ("x0_deriv", xd)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return len(self.orders)

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class CommensurateRealization:
    """Single-order system ``D^{alpha_c} z = Abig z + Bbig u``, ``y = Cbig z``."""

    Abig: np.ndarray
    Bbig: np.ndarray
    Cbig: np.ndarray
    alpha_c: RationalOrder
    p: tuple[int, ...]
    z0: np.ndarray
    offsets: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("Abig", "Bbig", "Cbig"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "z0", _frozen(self.z0, ndim=1))
        object.__setattr__(self, "offsets", _offsets(self.p))
        if self.Abig.shape != (self.N, self.N):
            raise LiftingError("Abig does not match sum(p)")

    @property
    def N(self) -> int:
        return int(sum(self.p))

    def first_components(self) -> np.ndarray:
        """Indices of ``z_{i,1}``, the entries that coincide with ``x_i``."""
        return self.offsets[:-1].copy()


def lift(system: MultiOrderSystem, max_dim: int = DEFAULT_MAX_DIM) -> CommensurateRealization:
    alpha_c, p = commensurate_base(system.orders)
    Abig = expand_state_matrix(system.A, system.orders, max_dim=max_dim)
    Bbig, Cbig = expand_input_output(system.B, system.C, system.orders)
    z0 = lift_initial_conditions(system.x0, system.x0_deriv, system.orders)
    return CommensurateRealization(Abig, Bbig, Cbig, alpha_c, p, z0)
