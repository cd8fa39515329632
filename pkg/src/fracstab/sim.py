"""Grünwald-Letnikov time stepping for lifted commensurate systems."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .model import CommensurateRealization, MultiOrderSystem, lift

__all__ = [
    "SimConfig",
    "Trajectory",
    "gl_weights",
    "simulate_commensurate",
    "simulate",
    "simulate_closed_loop",
    "mittag_leffler",
    "write_csv",
    "DIVERGENCE_THRESHOLD",
]

DIVERGENCE_THRESHOLD = 1e12


@dataclass(frozen=True)
class SimConfig:
    step: float = 1e-2
    t_final: float = 10.0
    memory_length: int | str = "full"
    scheme: str = "explicit"
    threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if not (self.step > 0 and self.t_final > 0):
            raise ValueError("step and t_final must be positive")
        if self.scheme not in ("explicit", "implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        m = self.memory_length
        if m != "full" and not (isinstance(m, int) and m >= 1):
            raise ValueError(f"memory_length must be a positive integer or 'full', got {m!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.step)))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    diverged: bool = False
    diagnostic: str = ""
    first_components: np.ndarray | None = None

    @property
    def pseudo_states(self) -> np.ndarray:
        """Original pseudo-states ``x_i = z_{i,1}`` (all states if not lifted)."""
        if self.first_components is None:
            return self.states
        return self.states[:, self.first_components]


def gl_weights(alpha: float, count: int) -> np.ndarray:
    """First ``count`` coefficients of ``(1 - xi)^alpha``: ``w_0 = 1``, ``w_j = (1 - (alpha+1)/j) w_{j-1}``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    j = np.arange(1, count)
    w = np.empty(count)
    w[0] = 1.0
    if count > 1:
        w[1:] = np.cumprod(1.0 - (alpha + 1.0) / j)
    return w


def _input_samples(u, times, n_inputs) -> np.ndarray:
    if u is None or n_inputs == 0:
        return np.zeros((len(times), n_inputs))
    if callable(u):
        return np.array([np.asarray(u(t), dtype=float).reshape(n_inputs) for t in times])
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 1 and n_inputs == 1 and arr.shape[0] == len(times):
        arr = arr[:, None]
    if arr.shape != (len(times), n_inputs):
        raise ValueError(f"input samples have shape {arr.shape}, expected {(len(times), n_inputs)}")
    return arr


def simulate_commensurate(
    realization: CommensurateRealization,
    u: Callable[[float], np.ndarray] | np.ndarray | None = None,
    config: SimConfig = SimConfig(),
) -> Trajectory:
    """Step ``D^{alpha_c} Z = A Z + B u`` from ``z0``.

    The explicit scheme is
    ``Z_k = z0 - sum_{j=1}^{k} w_j (Z_{k-j} - z0) + h^a (A Z_{k-1} + B u_{k-1})``;
    the implicit one evaluates the right-hand side at step ``k`` instead.
    """
    alpha = float(realization.alpha_c)
    if not 0 < alpha <= 1:
        raise ValueError(f"simulation needs 0 < alpha_c <= 1, got {realization.alpha_c}")
    h = config.step
    steps = config.n_steps
    times = np.arange(steps + 1) * h
    A, B, C = realization.Abig, realization.Bbig, realization.Cbig
    N = A.shape[0]
    us = _input_samples(u, times, B.shape[1])
    ha = h**alpha
    memory = steps if config.memory_length == "full" else min(config.memory_length, steps)
    weights = gl_weights(alpha, memory + 1)
    Bu = ha * (us @ B.T)
    forcing = np.zeros((steps + 1, N))
    if config.scheme == "explicit":
        forcing[1:] = Bu[:-1]
        left = np.eye(N)
        right = ha * A
    else:
        forcing[1:] = Bu[1:]
        left = np.linalg.inv(np.eye(N) - ha * A)
        right = np.zeros((N, N))
    Z, done = _backend.gl_march(left, right, forcing, weights, realization.z0, memory, config.threshold)
    diverged = done < steps
    diag = ""
    if diverged:
        Z = Z[: done + 1]
        diag = f"divergence guard tripped at t={times[done]:.6g} (|Z| > {config.threshold:g})"
    times = times[: Z.shape[0]]
    return Trajectory(
        times=times,
        states=Z,
        outputs=Z @ C.T,
        inputs=us[: Z.shape[0]],
        diverged=diverged,
        diagnostic=diag,
        first_components=realization.first_components(),
    )


def simulate(system: MultiOrderSystem, u=None, config: SimConfig = SimConfig()) -> Trajectory:
    """Open-loop simulation of a multi-order system through its lift."""
    return simulate_commensurate(lift(system), u, config)


def simulate_closed_loop(system: MultiOrderSystem, controller, config: SimConfig = SimConfig()) -> Trajectory:
    """Simulate plant plus controller; ``inputs`` holds ``u = Cc xc + Dc y``."""
    from .synthesis import assemble_closed_loop

    closed = assemble_closed_loop(system, controller)
    real = lift(closed)
    traj = simulate_commensurate(real, None, config)
    x = traj.pseudo_states
    n = system.n
    y = x[:, :n] @ system.C.T
    traj.outputs = y
    traj.inputs = y @ controller.Dc.T + x[:, n:] @ controller.Cc.T
    return traj


def mittag_leffler(alpha: float, z: float) -> float:
    """``E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)`` by direct summation.

    Summed in extended precision (the alternating series cancels badly for
    negative ``z``); terms are added until the geometric tail bound drops
    below 1e-12 relative.
    """
    import mpmath

    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if not abs(z) <= 10:
        raise ValueError("series evaluation is guarded to |z| <= 10")
    # size of the largest term decides how many digits cancel
    peak = 0.0
    k = 0
    while True:
        lg = k * math.log(abs(z)) - math.lgamma(alpha * k + 1) if z else (0.0 if k == 0 else -math.inf)
        peak = max(peak, lg)
        if lg < peak - 60 and k > 2:
            break
        k += 1
    dps = 30 + int(peak / math.log(10))
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        k = 0
        while True:
            term = zz**k / mpmath.gamma(alpha * k + 1)
            total += term
            ratio = abs(zz) * mpmath.gamma(alpha * k + 1) / mpmath.gamma(alpha * (k + 1) + 1)
            if k > 0 and ratio < 0.5 and abs(term) * ratio / (1 - ratio) < 1e-15 * max(1, abs(total)):
                break
            k += 1
        return float(total)


def write_csv(traj: Trajectory, fh=None) -> str:
    """CSV with columns ``t, z_1..z_N, y_1..y_m, u_1..u_l`` at 10 significant digits."""
    buf = io.StringIO() if fh is None else fh
    writer = csv.writer(buf, lineterminator="\n")
    N = traj.states.shape[1]
    m = traj.outputs.shape[1]
    l = traj.inputs.shape[1]
    header = ["t"] + [f"z_{i}" for i in range(1, N + 1)] + [f"y_{i}" for i in range(1, m + 1)] + [f"u_{i}" for i in range(1, l + 1)]
    writer.writerow(header)
    for row in np.hstack([traj.times[:, None], traj.states, traj.outputs, traj.inputs]):
        writer.writerow([format(v, ".10g") for v in row])
    if traj.diverged:
        buf.write(f"# diverged: {traj.diagnostic}\n")
    return buf.getvalue() if fh is None else ""
