"""Dependency-free SVG line chart for one region's series."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#222222", "#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def line_chart(title: str, months, series: dict[str, np.ndarray], split: int | None = None,
               width: int = 720, height: int = 320) -> str:
    """Render ``series`` (name -> values over ``months``, NaN for gaps) as an SVG document.

    A dashed vertical line is drawn before index ``split`` (start of the test period).
    """
    months = list(months)
    n = len(months)
    pad_l, pad_r, pad_t, pad_b = 50, 110, 30, 30
    vals = np.concatenate([np.asarray(v, dtype=float)[np.isfinite(v)] for v in series.values()] or [np.zeros(1)])
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        hi = lo + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def xy(i, v):
        x = pad_l + (pw * i / max(n - 1, 1))
        y = pad_t + ph * (1.0 - (v - lo) / (hi - lo))
        return f"{x:.1f},{y:.1f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad_l}" y="18" font-family="sans-serif" font-size="13">{escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="#888"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="#888"/>',
        f'<text x="4" y="{pad_t + 4}" font-family="sans-serif" font-size="10">{hi:.0f}</text>',
        f'<text x="4" y="{pad_t + ph}" font-family="sans-serif" font-size="10">{lo:.0f}</text>',
    ]
    if n:
        parts.append(f'<text x="{pad_l}" y="{height - 8}" font-family="sans-serif" font-size="10">{escape(months[0])}</text>')
        parts.append(f'<text x="{pad_l + pw - 40}" y="{height - 8}" font-family="sans-serif" font-size="10">{escape(months[-1])}</text>')
    if split is not None and 0 < split < n:
        x = pad_l + pw * (split - 0.5) / max(n - 1, 1)
        parts.append(f'<line x1="{x:.1f}" y1="{pad_t}" x2="{x:.1f}" y2="{pad_t + ph}" stroke="#666" stroke-dasharray="5,4"/>')
    for k, (name, v) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        v = np.asarray(v, dtype=float)
        runs, cur = [], []
        for i in range(n):
            if np.isfinite(v[i]):
                cur.append(xy(i, v[i]))
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
        ly = pad_t + 14 * k + 8
        parts.append(f'<line x1="{width - pad_r + 10}" y1="{ly}" x2="{width - pad_r + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad_r + 35}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
