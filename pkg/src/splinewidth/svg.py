"""A minimal SVG line/marker plot writer with an optional log10 y-axis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple
    color: str = "black"
    line: bool = True
    marker: str | None = None  # "circle", "star" or None


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / count))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= count:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(hi):
        out.append(round(v, 12))
        v += step
    return out


def line_plot(series: list[Series], title: str = "", xlabel: str = "", ylabel: str = "",
              log_y: bool = False) -> str:
    """Render ``series`` into an SVG document string. Non-finite or (for log axes) non-positive points are dropped."""
    pts = []
    for s in series:
        keep = [(x, y) for x, y in zip(s.x, s.y)
                if math.isfinite(x) and math.isfinite(y) and (y > 0 or not log_y)]
        pts.append([(x, math.log10(y) if log_y else y) for x, y in keep])
    allx = [p[0] for ps in pts for p in ps] or [0.0, 1.0]
    ally = [p[1] for ps in pts for p in ps] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{MARGIN_T + ph}" x2="{_fmt(sx(t))}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{MARGIN_T + ph + 18}" font-size="11" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:g}" if log_y else f"{t:g}"
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(sy(t))}" x2="{MARGIN_L}" y2="{_fmt(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_fmt(sy(t) + 4)}" font-size="11" text-anchor="end">{label}</text>')
    for s, ps in zip(series, pts):
        if s.line and len(ps) > 1:
            path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in ps)
            out.append(f'<polyline points="{path}" fill="none" stroke="{s.color}" stroke-width="1.2"/>')
        for x, y in ps if s.marker else []:
            cx, cy = sx(x), sy(y)
            if s.marker == "circle":
                out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" fill="none" stroke="{s.color}"/>')
            else:
                out.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy + 4)}" font-size="12" fill="{s.color}" '
                           f'text-anchor="middle">*</text>')
    for i, s in enumerate(series):
        y = MARGIN_T + 14 + 14 * i
        out.append(f'<text x="{MARGIN_L + pw - 6}" y="{y}" font-size="11" fill="{s.color}" '
                   f'text-anchor="end">{escape(s.label)}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 10}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN_T + ph / 2:.1f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
