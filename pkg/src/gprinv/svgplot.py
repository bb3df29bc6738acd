"""Minimal SVG emitter for run artifacts: line charts and histograms.

Deliberately tiny — the CSV exports are the real data products and feed
external tooling; these plots exist so a run directory is inspectable
without any plotting stack installed.
"""

from __future__ import annotations

import numpy as np

_W, _H = 720, 420
_ML, _MR, _MT, _MB = 64, 16, 36, 46
_COLORS = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((s for s in (1, 2, 5, 10) if s * mag >= raw), default=10) * mag
    first = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(first, hi + step / 2, step)]


class _Canvas:
    def __init__(self, title, xlabel, ylabel, x_range, y_range):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        ]
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        if self.x_hi <= self.x_lo:
            self.x_hi = self.x_lo + 1.0
        if self.y_hi <= self.y_lo:
            self.y_hi = self.y_lo + 1.0
        self._axes(xlabel, ylabel)

    def sx(self, x):
        return _ML + (x - self.x_lo) / (self.x_hi - self.x_lo) * (_W - _ML - _MR)

    def sy(self, y):
        return _H - _MB - (y - self.y_lo) / (self.y_hi - self.y_lo) * (_H - _MT - _MB)

    def _axes(self, xlabel, ylabel):
        p = self.parts
        p.append(
            f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
            f'height="{_H - _MT - _MB}" fill="none" stroke="#333"/>'
        )
        for t in _ticks(self.x_lo, self.x_hi):
            x = self.sx(t)
            p.append(f'<line x1="{x:.1f}" y1="{_H - _MB}" x2="{x:.1f}" y2="{_H - _MB + 4}" stroke="#333"/>')
            p.append(f'<text x="{x:.1f}" y="{_H - _MB + 17}" text-anchor="middle">{t:.4g}</text>')
        for t in _ticks(self.y_lo, self.y_hi):
            y = self.sy(t)
            p.append(f'<line x1="{_ML - 4}" y1="{y:.1f}" x2="{_ML}" y2="{y:.1f}" stroke="#333"/>')
            p.append(f'<text x="{_ML - 7}" y="{y + 4:.1f}" text-anchor="end">{t:.4g}</text>')
        p.append(f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle">{xlabel}</text>')
        p.append(
            f'<text x="16" y="{_H / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>'
        )

    def polyline(self, x, y, color, width=1.0, opacity=1.0):
        pts = " ".join(f"{self.sx(a):.2f},{self.sy(b):.2f}" for a, b in zip(x, y))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"/>'
        )

    def bar(self, x0, x1, y, color):
        top = self.sy(y)
        self.parts.append(
            f'<rect x="{self.sx(x0):.2f}" y="{top:.2f}" '
            f'width="{self.sx(x1) - self.sx(x0):.2f}" '
            f'height="{self.sy(self.y_lo) - top:.2f}" fill="{color}" '
            f'fill-opacity="0.75" stroke="#333" stroke-width="0.5"/>'
        )

    def legend(self, labels):
        for i, label in enumerate(labels):
            y = _MT + 14 + 16 * i
            color = _COLORS[i % len(_COLORS)]
            self.parts.append(f'<line x1="{_ML + 8}" y1="{y}" x2="{_ML + 30}" y2="{y}" stroke="{color}" stroke-width="2"/>')
            self.parts.append(f'<text x="{_ML + 36}" y="{y + 4}">{label}</text>')

    def write(self, path):
        self.parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(self.parts) + "\n")


def line_chart(path, series, title="", xlabel="", ylabel="", legend=True):
    """Plot (x, y[, label]) tuples as polylines on shared axes."""
    xs = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    canvas = _Canvas(title, xlabel, ylabel,
                     (float(xs.min()), float(xs.max())),
                     (float(ys.min()), float(ys.max())))
    labels = []
    for i, s in enumerate(series):
        canvas.polyline(s[0], s[1], _COLORS[i % len(_COLORS)],
                        opacity=0.9 if len(series) <= 4 else 0.6)
        if len(s) > 2:
            labels.append(s[2])
    if legend and labels:
        canvas.legend(labels)
    canvas.write(path)


def histogram_chart(path, edges, counts, title="", xlabel="", marker=None):
    """Plot one histogram; ``marker`` draws a vertical reference line."""
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    canvas = _Canvas(title, xlabel, "count",
                     (float(edges[0]), float(edges[-1])),
                     (0.0, float(counts.max()) if counts.size else 1.0))
    if edges.size == counts.size + 1:
        for i, c in enumerate(counts):
            canvas.bar(edges[i], edges[i + 1], c, _COLORS[0])
    if marker is not None:
        x = canvas.sx(marker)
        canvas.parts.append(
            f'<line x1="{x:.1f}" y1="{_MT}" x2="{x:.1f}" y2="{_H - _MB}" '
            f'stroke="#d62728" stroke-dasharray="4,3" stroke-width="1.5"/>'
        )
    canvas.write(path)
