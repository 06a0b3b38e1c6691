"""Minimal deterministic SVG line plots.

Output depends only on the data: no timestamps, no random ids, fixed number
formatting.  Long series are reduced to per-pixel min/max pairs so files stay
small without hiding peaks.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 800, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 20, 36, 48
AREA_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
BAND_COLORS = {"load": "#f2c1c1", "pv": "#f7e7a1", "wind": "#c7dcef"}


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks, v = [], start
    while v <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _reduce(t: np.ndarray, y: np.ndarray, buckets: int) -> tuple[np.ndarray, np.ndarray]:
    """Keep the first, min and max sample of each bucket in time order."""
    if len(t) <= 2 * buckets:
        return t, y
    edges = np.linspace(0, len(t), buckets + 1).astype(int)
    keep = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        seg = y[a:b]
        keep.extend(sorted({a, a + int(np.argmin(seg)), a + int(np.argmax(seg))}))
    keep.append(len(t) - 1)
    idx = np.unique(np.array(keep))
    return t[idx], y[idx]


def line_plot(t, series: Sequence[tuple[str, np.ndarray]], title: str, ylabel: str,
              bands: Sequence[tuple[float, float, str]] = (),
              colors: Sequence[str] | None = None) -> str:
    """SVG document with one polyline per ``(label, values)`` series.

    ``bands`` are ``(start, end, kind)`` shaded time intervals; kind picks the
    fill from :data:`BAND_COLORS`.
    """
    t = np.asarray(t, dtype=float)
    colors = colors or AREA_COLORS
    ys = [np.asarray(v, dtype=float) for _, v in series]
    lo = min((float(v.min()) for v in ys), default=0.0)
    hi = max((float(v.max()) for v in ys), default=0.0)
    if hi - lo < 1e-15:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    t0, t1 = float(t[0]), float(t[-1]) if len(t) > 1 else float(t[0]) + 1.0
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - t0) / (t1 - t0) * pw

    def sy(v):
        return MARGIN_T + (hi - v) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    for start, end, kind in bands:
        a, b = max(start, t0), min(end, t1)
        if b > a:
            out.append(f'<rect x="{sx(a):.2f}" y="{MARGIN_T}" width="{sx(b) - sx(a):.2f}" '
                       f'height="{ph}" fill="{BAND_COLORS.get(kind, "#dddddd")}" '
                       f'fill-opacity="0.45"/>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
               'fill="none" stroke="black"/>')
    for v in _nice_ticks(lo, hi):
        y = sy(v)
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    for v in _nice_ticks(t0, t1):
        x = sx(v)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + ph}" x2="{x:.2f}" y2="{MARGIN_T + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + ph + 16}" text-anchor="middle">{v:g}</text>')
    if lo < 0 < hi:
        out.append(f'<line x1="{MARGIN_L}" y1="{sy(0):.2f}" x2="{MARGIN_L + pw}" y2="{sy(0):.2f}" '
                   'stroke="#888888" stroke-dasharray="3,3"/>')
    for k, ((label, _), y) in enumerate(zip(series, ys)):
        tr, yr = _reduce(t, y, pw)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(tr, yr))
        color = colors[k % len(colors)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{MARGIN_L + 8 + 110 * k}" y="{MARGIN_T - 8}" fill="{color}">'
                   f'{_esc(label)}</text>')
    out.append(f'<text x="{WIDTH / 2:.0f}" y="16" text-anchor="middle" font-size="13">{_esc(title)}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.0f}" y="{HEIGHT - 8}" text-anchor="middle">time (s)</text>')
    out.append(f'<text x="14" y="{MARGIN_T + ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {MARGIN_T + ph / 2:.0f})">{_esc(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
