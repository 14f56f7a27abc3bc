"""Tiny SVG line-plot writer for CDF figures (no plotting stack needed)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 30, 55
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def cdf_plot(series: dict[str, tuple[list[float], list[float]]], title: str, xlabel: str, logx: bool = True) -> str:
    """Step-free polyline plot of each ``name -> (x, cdf)`` series on shared axes."""
    xs = [x for x, _ in series.values() for x in x]
    if not xs:
        raise ValueError("nothing to plot")
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    lo, hi = tx(min(xs)), tx(max(xs))
    if logx:
        lo, hi = math.floor(lo), math.ceil(hi)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pw, ph = W - ML - MR, H - MT - MB

    def px(v):
        return ML + (tx(v) - lo) / (hi - lo) * pw

    def py(c):
        return MT + (1 - c) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for c in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _fmt(py(c))
        out.append(f'<line x1="{ML - 4}" y1="{y}" x2="{ML}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{ML - 7}" y="{y}" text-anchor="end" dominant-baseline="middle">{c:g}</text>')
    if logx:
        ticks = [(10 ** e, f"1e{e}") for e in range(int(lo), int(hi) + 1)]
    else:
        ticks = [(lo + k * (hi - lo) / 4, f"{lo + k * (hi - lo) / 4:.3g}") for k in range(5)]
    for v, label in ticks:
        x = _fmt(px(v))
        out.append(f'<line x1="{x}" y1="{MT + ph}" x2="{x}" y2="{MT + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{MT + ph + 18}" text-anchor="middle">{label}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {MT + ph / 2})">CDF</text>')
    for k, (name, (x, c)) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, c))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MT + 16 + 16 * k
        out.append(f'<line x1="{ML + 10}" y1="{ly}" x2="{ML + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ML + 35}" y="{ly}" dominant-baseline="middle">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
