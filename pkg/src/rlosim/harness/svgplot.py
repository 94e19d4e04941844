"""Minimal static SVG line/scatter plots (no display or plotting library needed)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    style: str = "line"  # "line", "marker" or "both"
    color: str | None = None


@dataclass
class Axes:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    series: list = field(default_factory=list)

    def add(self, x, y, label="", style="line", color=None):
        self.series.append(Series(list(map(float, x)), list(map(float, y)), label, style, color))
        return self


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.3g}"
    return f"{v:.4g}"


def render(ax: Axes, width: int = 640, height: int = 420) -> str:
    """SVG document for one set of axes."""
    ml, mr, mt, mb = 70, 20, 36, 52
    pw, ph = width - ml - mr, height - mt - mb
    tx = (lambda v: math.log10(v)) if ax.logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if ax.logy else (lambda v: v)
    pts = [(tx(x), ty(y)) for s in ax.series for x, y in zip(s.x, s.y)
           if math.isfinite(x) and math.isfinite(y) and (x > 0 or not ax.logx) and (y > 0 or not ax.logy)]
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        X = px(v)
        label = _fmt(10 ** v) if ax.logx else _fmt(v)
        out.append(f'<line x1="{X:.1f}" y1="{mt + ph}" x2="{X:.1f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{mt + ph + 18}" text-anchor="middle">{label}</text>')
    for v in _ticks(y0, y1):
        Y = py(v)
        label = _fmt(10 ** v) if ax.logy else _fmt(v)
        out.append(f'<line x1="{ml - 5}" y1="{Y:.1f}" x2="{ml}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<line x1="{ml}" y1="{Y:.1f}" x2="{ml + pw}" y2="{Y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(ax.xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ax.ylabel)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(ax.title)}</text>')
    for k, s in enumerate(ax.series):
        color = s.color or PALETTE[k % len(PALETTE)]
        xy = [(px(tx(x)), py(ty(y))) for x, y in zip(s.x, s.y)
              if math.isfinite(x) and math.isfinite(y) and (x > 0 or not ax.logx) and (y > 0 or not ax.logy)]
        if s.style in ("line", "both") and len(xy) > 1:
            path = " ".join(f"{X:.2f},{Y:.2f}" for X, Y in xy)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.style in ("marker", "both"):
            for X, Y in xy:
                out.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="3.5" fill="{color}"/>')
        if s.label:
            ly = mt + 16 + 16 * k
            out.append(f'<line x1="{ml + pw - 150}" y1="{ly - 4}" x2="{ml + pw - 130}" y2="{ly - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{ml + pw - 124}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
