"""Minimal standalone SVG plots (line charts and heat maps).

Output depends only on the data, so repeated runs produce identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "Panel", "line_plot", "heatmap", "nice_ticks"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_W, _H = 640, 300
_ML, _MR, _MT, _MB = 70, 150, 30, 45


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    dashed: bool = False


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == v else "0"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.6g}"


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo] if math.isfinite(lo) else [0.0]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t / step) * step)
        t += step
    return ticks


def _range(values: list[np.ndarray]) -> tuple[float, float]:
    finite = [v[np.isfinite(v)] for v in values if v.size]
    finite = [v for v in finite if v.size]
    if not finite:
        return 0.0, 1.0
    lo = min(float(v.min()) for v in finite)
    hi = max(float(v.max()) for v in finite)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _panel(p: Panel, top: float) -> list[str]:
    x0, x1 = _ML, _W - _MR
    y0, y1 = top + _MT, top + _H - _MB
    xs = [np.asarray(s.x, dtype=float) for s in p.series]
    ys = [np.asarray(s.y, dtype=float) for s in p.series]
    xlo, xhi = _range(xs)
    ylo, yhi = _range(ys)
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def sx(v):
        return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

    def sy(v):
        return y1 - (v - ylo) / (yhi - ylo) * (y1 - y0)

    out = [f'<text x="{(x0 + x1) / 2:g}" y="{top + 18:g}" text-anchor="middle" '
           f'font-size="14">{escape(p.title)}</text>',
           f'<rect x="{x0}" y="{_num(y0)}" width="{x1 - x0}" height="{_num(y1 - y0)}" '
           f'fill="none" stroke="#000"/>']
    for t in nice_ticks(xlo, xhi):
        X = _num(sx(t))
        out.append(f'<line x1="{X}" y1="{_num(y1)}" x2="{X}" y2="{_num(y1 + 5)}" stroke="#000"/>')
        out.append(f'<text x="{X}" y="{_num(y1 + 18)}" text-anchor="middle" '
                   f'font-size="11">{_tick_label(t)}</text>')
    for t in nice_ticks(ylo, yhi):
        Y = _num(sy(t))
        out.append(f'<line x1="{x0 - 5}" y1="{Y}" x2="{x0}" y2="{Y}" stroke="#000"/>')
        out.append(f'<text x="{x0 - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle" '
                   f'font-size="11">{_tick_label(t)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:g}" y="{_num(y1 + 36)}" text-anchor="middle" '
               f'font-size="12">{escape(p.xlabel)}</text>')
    out.append(f'<text x="16" y="{_num((y0 + y1) / 2)}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {_num((y0 + y1) / 2)})">{escape(p.ylabel)}</text>')

    for i, (s, x, y) in enumerate(zip(p.series, xs, ys)):
        color = _COLORS[i % len(_COLORS)]
        dash = ' stroke-dasharray="6 3"' if s.dashed else ""
        ok = np.isfinite(x) & np.isfinite(y)
        if np.any(ok):
            pts = " ".join(f"{_num(sx(a))},{_num(sy(b))}" for a, b in zip(x[ok], y[ok]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                       f'stroke-width="1.3"{dash}/>')
        ly = y0 + 12 + 18 * i
        out.append(f'<line x1="{x1 + 10}" y1="{_num(ly)}" x2="{x1 + 35}" y2="{_num(ly)}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x1 + 40}" y="{_num(ly)}" dominant-baseline="middle" '
                   f'font-size="11">{escape(s.label)}</text>')
    return out


def _document(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
            f'viewBox="0 0 {width:g} {height:g}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{width:g}" height="{height:g}" fill="#fff"/>',
                      *body, "</svg>"]) + "\n"


def line_plot(panels: list[Panel]) -> str:
    """Stack of line-chart panels sharing one SVG document."""
    body = []
    for i, p in enumerate(panels):
        body.extend(_panel(p, i * _H))
    return _document(_W, _H * max(len(panels), 1), body)


def _shade(v: float) -> str:
    # white -> dark blue
    v = min(max(v, 0.0), 1.0) if v == v else 0.0
    r = round(255 - v * (255 - 8))
    g = round(255 - v * (255 - 48))
    b = round(255 - v * (255 - 107))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(values, x_labels, y_labels, title: str, xlabel: str, ylabel: str) -> str:
    """Heat map of ``values[i, j]`` (row ``i`` = y_labels[i]) on a [0, 1] scale."""
    values = np.asarray(values, dtype=float).reshape(len(y_labels), len(x_labels))
    nx, ny = len(x_labels), len(y_labels)
    cell = 48
    x0, y0 = 80, 40
    width = x0 + cell * max(nx, 1) + 110
    height = y0 + cell * max(ny, 1) + 60
    body = [f'<text x="{width / 2:g}" y="22" text-anchor="middle" font-size="14">'
            f'{escape(title)}</text>']
    for i in range(ny):
        # largest y at the top
        row = ny - 1 - i
        for j in range(nx):
            v = values[i, j]
            body.append(f'<rect x="{x0 + j * cell}" y="{y0 + row * cell}" width="{cell}" '
                        f'height="{cell}" fill="{_shade(v)}" stroke="#888"/>')
            color = "#fff" if v > 0.6 else "#000"
            body.append(f'<text x="{x0 + j * cell + cell / 2:g}" y="{y0 + row * cell + cell / 2:g}" '
                        f'text-anchor="middle" dominant-baseline="middle" font-size="10" '
                        f'fill="{color}">{v:.2f}</text>')
        body.append(f'<text x="{x0 - 8}" y="{y0 + row * cell + cell / 2:g}" text-anchor="end" '
                    f'dominant-baseline="middle" font-size="11">{escape(str(y_labels[i]))}</text>')
    for j in range(nx):
        body.append(f'<text x="{x0 + j * cell + cell / 2:g}" y="{y0 + ny * cell + 16}" '
                    f'text-anchor="middle" font-size="11">{escape(str(x_labels[j]))}</text>')
    body.append(f'<text x="{x0 + nx * cell / 2:g}" y="{y0 + ny * cell + 40}" '
                f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    body.append(f'<text x="20" y="{y0 + ny * cell / 2:g}" text-anchor="middle" font-size="12" '
                f'transform="rotate(-90 20 {y0 + ny * cell / 2:g})">{escape(ylabel)}</text>')
    lx = x0 + nx * cell + 30
    for k in range(11):
        v = 1 - k / 10
        body.append(f'<rect x="{lx}" y="{y0 + k * 12}" width="16" height="12" '
                    f'fill="{_shade(v)}"/>')
    body.append(f'<text x="{lx + 22}" y="{y0 + 10}" font-size="10">1.0</text>')
    body.append(f'<text x="{lx + 22}" y="{y0 + 130}" font-size="10">0.0</text>')
    return _document(width, height, body)
