"""Hand-written SVG line plots and heatmaps.

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
# viridis sampled at five stops; intermediate colors are linear blends
_STOPS = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]],
                  dtype=np.float64)

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.3g}"


def colormap(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(t), len(_STOPS) - 2)
    rgb = _STOPS[i] + (t - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _header(title: str) -> list[str]:
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']


def line_plot(series: Sequence[tuple[str, np.ndarray, np.ndarray]], title: str = "",
              xlabel: str = "x", ylabel: str = "", log_y: bool = False) -> str:
    """Overlay of (label, xs, ys) curves on shared axes."""
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    clean = []
    for label, xs, ys in series:
        xs, ys = np.asarray(xs, np.float64), np.asarray(ys, np.float64)
        if log_y:
            ys = np.log10(np.maximum(ys, 1e-300))
        clean.append((label, xs, ys))
    out = _header(title)
    finite = [(xs[np.isfinite(ys)], ys[np.isfinite(ys)]) for _, xs, ys in clean]
    allx = np.concatenate([f[0] for f in finite]) if finite else np.zeros(0)
    ally = np.concatenate([f[1] for f in finite]) if finite else np.zeros(0)
    if allx.size == 0:
        out.append("</svg>")
        return "\n".join(out) + "\n"
    xmin, xmax = float(allx.min()), float(allx.max())
    ymin, ymax = float(ally.min()), float(ally.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def sx(v):
        return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0)

    def sy(v):
        return y0 + (v - ymin) / (ymax - ymin) * (y1 - y0)

    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               'fill="none" stroke="black"/>')
    for k in range(5):
        xv = xmin + k * (xmax - xmin) / 4
        yv = ymin + k * (ymax - ymin) / 4
        ylab = _tick(10 ** yv) if log_y else _tick(yv)
        out.append(f'<text x="{_fmt(sx(xv))}" y="{y0 + 16}" text-anchor="middle">{_tick(xv)}</text>')
        out.append(f'<text x="{x0 - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end">{ylab}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2})">{escape(ylabel)}</text>')
    for j, (label, xs, ys) in enumerate(clean):
        color = PALETTE[j % len(PALETTE)]
        ok = np.isfinite(ys)
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs[ok], ys[ok]))
        dash = ' stroke-dasharray="6,3"' if j % 2 else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = y1 + 14 + 18 * j
        out.append(f'<line x1="{x1 + 10}" y1="{ly}" x2="{x1 + 34}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{x1 + 40}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(values: np.ndarray, title: str = "", vmin: float | None = None,
            vmax: float | None = None) -> str:
    """Color-mapped rectangles, row 0 at the bottom (y increasing upwards).

    ``values[i, j]`` is the value at x index i and y index j.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"heatmap needs a 2D array, got shape {values.shape}")
    vmin = float(np.nanmin(values)) if vmin is None else vmin
    vmax = float(np.nanmax(values)) if vmax is None else vmax
    span = vmax - vmin if vmax > vmin else 1.0
    nx, ny = values.shape
    side = min(WIDTH - MARGIN["left"] - MARGIN["right"], HEIGHT - MARGIN["top"] - MARGIN["bottom"])
    cw, ch = side / nx, side / ny
    x0, ytop = MARGIN["left"], MARGIN["top"]
    out = _header(title)
    for i in range(nx):
        for j in range(ny):
            color = colormap((values[i, j] - vmin) / span)
            out.append(f'<rect x="{_fmt(x0 + i * cw)}" y="{_fmt(ytop + (ny - 1 - j) * ch)}" '
                       f'width="{_fmt(cw + 0.05)}" height="{_fmt(ch + 0.05)}" fill="{color}"/>')
    bx = x0 + side + 30
    for k in range(21):
        t = 1.0 - k / 20
        out.append(f'<rect x="{bx}" y="{_fmt(ytop + k * side / 21)}" width="16" '
                   f'height="{_fmt(side / 21 + 0.05)}" fill="{colormap(t)}"/>')
    out.append(f'<text x="{bx + 22}" y="{ytop + 10}">{_tick(vmax)}</text>')
    out.append(f'<text x="{bx + 22}" y="{_fmt(ytop + side)}">{_tick(vmin)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
