"""Minimal static SVG rendering for curves.

CSV files are the authoritative data; these plots are a convenience view and
are written directly as text so no plotting dependency is involved.
"""

from __future__ import annotations

import numpy as np

_W, _H = 640, 400
_MARGIN = 56


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_curve_svg(alphas, values, title: str,
                     x_label: str = "alpha", y_label: str = "D(alpha)",
                     stamp: str = "") -> str:
    alphas = np.asarray(alphas, dtype=float)
    values = np.asarray(values, dtype=float)
    x_lo, x_hi = float(alphas.min()), float(alphas.max())
    y_lo, y_hi = 0.0, float(max(values.max(), 1e-12))
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(x):
        return _MARGIN + (x - x_lo) / x_span * (_W - 2 * _MARGIN)

    def sy(y):
        return _H - _MARGIN - (y - y_lo) / y_span * (_H - 2 * _MARGIN)

    pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(v))}" for a, v in zip(alphas, values))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
    ]
    if stamp:
        parts.append(f"<!-- {stamp} -->")
    parts += [
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="24" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
        # axes
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * x_span
        yv = y_lo + frac * y_span
        parts.append(f'<text x="{_fmt(sx(xv))}" y="{_H - _MARGIN + 18}" '
                     f'text-anchor="middle" font-family="monospace" '
                     f'font-size="10">{_fmt(xv)}</text>')
        parts.append(f'<text x="{_MARGIN - 6}" y="{_fmt(sy(yv) + 3)}" '
                     f'text-anchor="end" font-family="monospace" '
                     f'font-size="10">{_fmt(yv)}</text>')
    parts.append(f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" '
                 f'font-family="monospace" font-size="12">{x_label}</text>')
    parts.append(f'<text x="16" y="{_H // 2}" text-anchor="middle" '
                 f'font-family="monospace" font-size="12" '
                 f'transform="rotate(-90 16 {_H // 2})">{y_label}</text>')
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" '
                 f'stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
