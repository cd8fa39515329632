"""Eigenvalue-sector stability test and characteristic polynomials."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .model import DEFAULT_MAX_DIM, CommensurateRealization

__all__ = [
    "StabilityVerdict",
    "eigenvalues",
    "argument_stability_test",
    "characteristic_polynomial",
    "companion",
    "ZERO_EIG_RTOL",
    "CHARPOLY_MAX_DIM",
]

ZERO_EIG_RTOL = 1e-10
CHARPOLY_MAX_DIM = 64

ConvergenceError = _backend.ConvergenceError


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of a stability test.

    ``status`` is ``"stable"``, ``"unstable"`` or ``"inconclusive"`` (the last
    only for the LMI route).  ``margin`` is in radians for the spectral test
    and the certified LMI slack for the LMI test.
    """

    status: str
    method: str
    margin: float
    boundary: float
    eigenvalues: tuple[complex, ...] = field(default=(), repr=False)
    detail: str = ""

    @property
    def stable(self) -> bool:
        return self.status == "stable"

    def as_dict(self) -> dict:
        out = {
            "status": self.status,
            "method": self.method,
            "margin": self.margin,
            "boundary": self.boundary,
        }
        if self.eigenvalues:
            out["eigenvalues"] = [[z.real, z.imag] for z in self.eigenvalues]
        if self.detail:
            out["detail"] = self.detail
        return out


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def eigenvalues(M, max_dim: int = DEFAULT_MAX_DIM) -> list[complex]:
    """All eigenvalues of a real matrix, with multiplicity.

    Balancing, Householder Hessenberg reduction and Francis double-shift QR
    (compiled when available).  Raises ``ConvergenceError`` after
    ``100 * N`` sweeps.
    """
    M = _square(M)
    if M.shape[0] > max_dim:
        raise ValueError(f"dimension {M.shape[0]} exceeds the cap of {max_dim}")
    wr, wi = _backend.eigvals(M)
    return [complex(r, i) for r, i in zip(wr, wi)]


def argument_stability_test(M, alpha_c) -> StabilityVerdict:
    """Sector test: stable iff every eigenvalue has ``|arg| > alpha_c*pi/2``.

    ``M`` may be a matrix or a :class:`CommensurateRealization`.
    """
    if isinstance(M, CommensurateRealization):
        M = M.Abig
    alpha = float(alpha_c)
    if not 0 < alpha < 2:
        raise ValueError(f"alpha_c must lie in (0, 2), got {alpha}")
    M = _square(M)
    boundary = alpha * math.pi / 2
    eigs = eigenvalues(M)
    scale = np.linalg.norm(M)
    margin = math.inf
    for lam in eigs:
        if abs(lam) < ZERO_EIG_RTOL * scale or scale == 0.0:
            angle = 0.0
        else:
            angle = abs(math.atan2(lam.imag, lam.real))
        margin = min(margin, angle - boundary)
    if not eigs:
        margin = math.inf
    status = "stable" if margin > 0 else "unstable"
    return StabilityVerdict(status, "spectral", margin, boundary, tuple(eigs))


def characteristic_polynomial(M, max_dim: int = CHARPOLY_MAX_DIM) -> np.ndarray:
    """Coefficients of ``det(sI - M)``, highest power first, by Faddeev-LeVerrier."""
    M = _square(M)
    n = M.shape[0]
    if n > max_dim:
        raise ValueError(f"dimension {n} exceeds the characteristic polynomial cap of {max_dim}")
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    Mk = np.zeros_like(M)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(M @ Mk) / k
    return coeffs


def companion(coeffs) -> np.ndarray:
    """Companion matrix of a monic polynomial given highest power first."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2 or c[0] != 1.0:
        raise ValueError("expected monic coefficients, highest power first")
    n = c.size - 1
    C = np.zeros((n, n))
    C[:-1, 1:] = np.eye(n - 1)
    C[-1, :] = -c[:0:-1]
    return C
