"""Minimal self-contained SVG line charts for benchmark output."""

from __future__ import annotations

import math
from html import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0 ** e for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]
    step = 10 ** math.floor(math.log10(max(hi - lo, 1e-12)))
    start = math.floor(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 2)]


def line_chart(series: dict, title: str = "", xlabel: str = "n", ylabel: str = "cost",
               log: bool = True, width: int = 640, height: int = 420) -> str:
    """``series`` maps a label to ``(xs, ys)``. Axes are log-log by default."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if (not log or (x > 0 and y > 0))]
    if not pts:
        raise ValueError("nothing to plot")
    f = math.log10 if log else (lambda v: v)
    xs = [f(x) for x, _ in pts]
    ys = [f(y) for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    m = 60
    W, H = width - 2 * m, height - 2 * m

    def px(v):
        return m + (f(v) - x0) / (x1 - x0) * W

    def py(v):
        return m + H - (f(v) - y0) / (y1 - y0) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{m}" y1="{m + H}" x2="{m + W}" y2="{m + H}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{m + H}" stroke="black"/>',
           f'<text x="{m + W / 2}" y="{height - 15}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="15" y="{m + H / 2}" text-anchor="middle" transform="rotate(-90 15 {m + H / 2})">'
           f'{escape(ylabel)}</text>']
    lo_x, hi_x = (10 ** x0, 10 ** x1) if log else (x0, x1)
    lo_y, hi_y = (10 ** y0, 10 ** y1) if log else (y0, y1)
    for t in _ticks(lo_x, hi_x, log):
        if lo_x <= t <= hi_x:
            out.append(f'<text x="{px(t):.1f}" y="{m + H + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(lo_y, hi_y, log):
        if lo_y <= t <= hi_y:
            out.append(f'<text x="{m - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    for i, (label, (sx, sy)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        good = [(x, y) for x, y in zip(sx, sy) if not log or (x > 0 and y > 0)]
        path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in good)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for x, y in good:
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{m + 10}" y="{m + 16 * (i + 1)}" fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
