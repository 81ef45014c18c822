"""Static SVG figures: a heatmap with optional contour, geodesics and markers."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .gridscan import ScalarGrid

__all__ = ["render_svg", "diverging_color"]

_NEG = np.array([59, 76, 192])
_MID = np.array([247, 247, 247])
_POS = np.array([180, 4, 38])

WIDTH, HEIGHT = 640, 520
LEFT, RIGHT, TOP, BOTTOM = 80, 110, 40, 60


def diverging_color(value, vmax):
    """Blue-white-red colour for ``value`` on the symmetric range ``[-vmax, vmax]``."""
    if not math.isfinite(value):
        return "#999999"
    t = 0.0 if vmax <= 0 else max(-1.0, min(1.0, value / vmax))
    end = _POS if t > 0 else _NEG
    rgb = np.rint(_MID + abs(t) * (end - _MID)).astype(int)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _fmt(x):
    return f"{x:.2f}"


def _tick_label(x):
    return f"{x:.4g}"


def render_svg(
    grid: ScalarGrid,
    *,
    region=None,
    region_closed=False,
    geodesics=(),
    mle=None,
    truth=None,
    title=None,
    version="0.1.0",
) -> str:
    """Render ``grid`` as an SVG document.

    Parameters
    ----------
    grid : ScalarGrid
        Heatmap; cells are centred on grid nodes and coloured on a diverging
        scale symmetric about zero. Failed cells are grey.
    region : array_like, shape (n, 2), optional
        Confidence contour, drawn in magenta.
    geodesics : sequence of array_like
        Curves of shape ``(n, 2)``, drawn in black.
    mle, truth : array_like, optional
        Points drawn as red and green discs.
    """
    a1, a2 = grid.axis1, grid.axis2
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    dx1 = (a1.hi - a1.lo) / (a1.n - 1)
    dx2 = (a2.hi - a2.lo) / (a2.n - 1)
    lo1, hi1 = a1.lo - dx1 / 2, a1.hi + dx1 / 2
    lo2, hi2 = a2.lo - dx2 / 2, a2.hi + dx2 / 2

    def px(x):
        return LEFT + (x - lo1) / (hi1 - lo1) * pw

    def py(y):
        return TOP + (hi2 - y) / (hi2 - lo2) * ph

    finite = grid.values[np.isfinite(grid.values)]
    vmax = float(np.max(np.abs(finite))) if finite.size else 0.0

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- infogeo {escape(version)} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        '<g id="heatmap" shape-rendering="crispEdges">',
    ]
    x1, x2 = a1.values, a2.values
    for i2 in range(a2.n):
        for i1 in range(a1.n):
            xl, xr = px(x1[i1] - dx1 / 2), px(x1[i1] + dx1 / 2)
            yt, yb = py(x2[i2] + dx2 / 2), py(x2[i2] - dx2 / 2)
            color = diverging_color(grid.values[i2, i1], vmax)
            out.append(
                f'<rect x="{_fmt(xl)}" y="{_fmt(yt)}" width="{_fmt(xr - xl)}" '
                f'height="{_fmt(yb - yt)}" fill="{color}"/>'
            )
    out.append("</g>")

    out.append(f'<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>')
    out.append('<g clip-path="url(#plot)" fill="none" stroke-linejoin="round">')
    for k, curve in enumerate(geodesics):
        pts = np.asarray(curve, dtype=float).reshape(-1, 2)
        if pts.shape[0] >= 2:
            coords = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in pts)
            out.append(f'<polyline id="geodesic-{k}" points="{coords}" stroke="black" stroke-width="1"/>')
    if region is not None:
        pts = np.asarray(region, dtype=float).reshape(-1, 2)
        if pts.shape[0] >= 2:
            coords = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in pts)
            tag = "polygon" if region_closed else "polyline"
            out.append(f'<{tag} id="region" points="{coords}" stroke="magenta" stroke-width="2"/>')
    for name, point, color in (("truth", truth, "green"), ("mle", mle, "red")):
        if point is not None:
            a, b = (float(v) for v in point)
            out.append(
                f'<circle id="{name}" cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="5" '
                f'fill="{color}" stroke="white" stroke-width="1"/>'
            )
    out.append("</g>")

    # frame, ticks and labels
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for v in np.linspace(a1.lo, a1.hi, 5):
        x = px(v)
        out.append(f'<line x1="{_fmt(x)}" y1="{TOP + ph}" x2="{_fmt(x)}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in np.linspace(a2.lo, a2.hi, 5):
        y = py(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    out.append(
        f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(a1.name)}</text>'
    )
    out.append(
        f'<text x="20" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {TOP + ph / 2:.2f})">{escape(a2.name)}</text>'
    )
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')

    # colour bar
    cx, cw, steps = WIDTH - RIGHT + 25, 16, 64
    for k in range(steps):
        v = vmax * (1 - 2 * (k + 0.5) / steps)
        y = TOP + ph * k / steps
        out.append(
            f'<rect x="{cx}" y="{_fmt(y)}" width="{cw}" height="{_fmt(ph / steps + 0.5)}" '
            f'fill="{diverging_color(v, vmax)}"/>'
        )
    out.append(f'<rect x="{cx}" y="{TOP}" width="{cw}" height="{ph}" fill="none" stroke="black"/>')
    for v, y in ((vmax, TOP + 4), (0.0, TOP + ph / 2 + 4), (-vmax, TOP + ph + 4)):
        out.append(f'<text x="{cx + cw + 4}" y="{_fmt(y)}">{_tick_label(v)}</text>')
    if grid.quantity:
        out.append(
            f'<text x="{cx + cw / 2}" y="{TOP - 10}" text-anchor="middle">{escape(grid.quantity)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
