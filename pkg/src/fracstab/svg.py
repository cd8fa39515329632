"""Minimal static SVG plots: time traces and eigenvalue sector diagrams."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_plot", "eigenvalue_plot"]

_W, _H = 640, 400
_PAD = 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _range(lo: float, hi: float) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return -1.0, 1.0
    if hi - lo < 1e-12:
        pad = max(abs(lo), 1.0) * 0.5
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xlim, ylim, title: str):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
            f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" fill="none" stroke="black"/>',
        ]

    def px(self, x: float) -> float:
        return _PAD + (x - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)

    def py(self, y: float) -> float:
        return _H - _PAD - (y - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)

    def axis_labels(self, xlabel: str, ylabel: str) -> None:
        p = self.parts
        for x in np.linspace(self.x0, self.x1, 5):
            p.append(
                f'<text x="{_fmt(self.px(x))}" y="{_H - _PAD + 16}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{x:.3g}</text>'
            )
        for y in np.linspace(self.y0, self.y1, 5):
            p.append(
                f'<text x="{_PAD - 4}" y="{_fmt(self.py(y) + 3)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{y:.3g}</text>'
            )
        p.append(
            f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>'
        )
        p.append(
            f'<text x="14" y="{_H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 14 {_H / 2})">{escape(ylabel)}</text>'
        )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(times, series, labels=None, title: str = "", xlabel: str = "t", ylabel: str = "") -> str:
    """One polyline per column of ``series`` against ``times``."""
    t = np.asarray(times, dtype=float)
    Y = np.asarray(series, dtype=float).reshape(len(t), -1)
    finite = Y[np.isfinite(Y)]
    ylim = _range(finite.min(), finite.max()) if finite.size else (-1.0, 1.0)
    xlim = (float(t[0]), float(t[-1])) if len(t) > 1 and t[-1] > t[0] else (0.0, 1.0)
    cv = _Canvas(xlim, ylim, title)
    cv.axis_labels(xlabel, ylabel)
    # thin long traces so files stay small
    stride = max(1, len(t) // 2000)
    idx = np.r_[np.arange(0, len(t), stride), len(t) - 1] if len(t) else np.arange(0)
    for j in range(Y.shape[1]):
        pts = " ".join(f"{_fmt(cv.px(t[i]))},{_fmt(cv.py(Y[i, j]))}" for i in idx if np.isfinite(Y[i, j]))
        color = _COLORS[j % len(_COLORS)]
        cv.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        label = labels[j] if labels is not None else f"x_{j + 1}"
        cv.parts.append(
            f'<text x="{_W - _PAD + 4}" y="{_PAD + 14 * (j + 1)}" font-family="sans-serif" font-size="11" '
            f'fill="{color}">{escape(label)}</text>'
        )
    return cv.finish()


def eigenvalue_plot(eigs, alpha_c: float, title: str = "") -> str:
    """Eigenvalues in the complex plane with the two rays at ``+-alpha_c*pi/2``."""
    z = np.asarray(list(eigs), dtype=complex)
    r = float(np.max(np.abs(z))) if z.size else 1.0
    r = r if r > 0 else 1.0
    lim = (-1.1 * r, 1.1 * r)
    cv = _Canvas(lim, lim, title)
    cv.axis_labels("Re", "Im")
    cv.parts.append(
        f'<line x1="{_fmt(cv.px(lim[0]))}" y1="{_fmt(cv.py(0))}" x2="{_fmt(cv.px(lim[1]))}" y2="{_fmt(cv.py(0))}" stroke="#bbbbbb"/>'
    )
    cv.parts.append(
        f'<line x1="{_fmt(cv.px(0))}" y1="{_fmt(cv.py(lim[0]))}" x2="{_fmt(cv.px(0))}" y2="{_fmt(cv.py(lim[1]))}" stroke="#bbbbbb"/>'
    )
    phi = float(alpha_c) * math.pi / 2
    for sign in (1, -1):
        x, y = 1.1 * r * math.cos(phi), sign * 1.1 * r * math.sin(phi)
        cv.parts.append(
            f'<line x1="{_fmt(cv.px(0))}" y1="{_fmt(cv.py(0))}" x2="{_fmt(cv.px(x))}" y2="{_fmt(cv.py(y))}" '
            f'stroke="#d62728" stroke-dasharray="6 3"/>'
        )
    for lam in z:
        cv.parts.append(
            f'<circle cx="{_fmt(cv.px(lam.real))}" cy="{_fmt(cv.py(lam.imag))}" r="3" fill="#1f77b4"/>'
        )
    return cv.finish()
