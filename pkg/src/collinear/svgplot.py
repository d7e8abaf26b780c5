"""Minimal SVG scatter/line charts with no plotting dependency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 400
MARGIN = dict(left=60, right=20, top=36, bottom=50)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9:
        ticks.append(round(v, 10))
        v += step
    return ticks


@dataclass
class Chart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    layers: list = field(default_factory=list)

    def scatter(self, xs: Sequence[float], ys: Sequence[float], color: str = "#1f77b4",
                radius: float = 2.5, label: str = "") -> "Chart":
        self.layers.append(("scatter", list(xs), list(ys), color, radius, label))
        return self

    def line(self, xs: Sequence[float], ys: Sequence[float], color: str = "#d62728",
             dashed: bool = False, label: str = "") -> "Chart":
        self.layers.append(("line", list(xs), list(ys), color, dashed, label))
        return self

    def _limits(self):
        xs = [x for layer in self.layers for x in layer[1] if math.isfinite(x)]
        ys = [y for layer in self.layers for y in layer[2] if math.isfinite(y)]
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        padx = (x1 - x0) * 0.05 or 0.05
        pady = (y1 - y0) * 0.05 or 0.05
        return x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def render(self) -> str:
        x0, x1, y0, y1 = self._limits()
        pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

        def sx(x):
            return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

        def sy(y):
            return MARGIN["top"] + ph - (y - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
            'fill="none" stroke="#444"/>',
        ]
        for t in _nice_ticks(x0, x1):
            out.append(f'<line x1="{sx(t):.2f}" y1="{MARGIN["top"] + ph}" x2="{sx(t):.2f}" '
                       f'y2="{MARGIN["top"] + ph + 4}" stroke="#444"/>')
            out.append(f'<text x="{sx(t):.2f}" y="{MARGIN["top"] + ph + 16}" '
                       f'text-anchor="middle">{t:g}</text>')
        for t in _nice_ticks(y0, y1):
            out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{sy(t):.2f}" x2="{MARGIN["left"]}" '
                       f'y2="{sy(t):.2f}" stroke="#444"/>')
            out.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(t) + 4:.2f}" '
                       f'text-anchor="end">{t:g}</text>')
        out.append(f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">'
                   f'{escape(self.title)}</text>')
        out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate(16,{MARGIN["top"] + ph / 2}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')
        out.append(f'<clipPath id="plot"><rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" '
                   f'width="{pw}" height="{ph}"/></clipPath><g clip-path="url(#plot)">')
        legend = []
        for kind, xs, ys, color, style, label in self.layers:
            pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
            if kind == "scatter":
                for x, y in pts:
                    out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="{style}" '
                               f'fill="{color}" fill-opacity="0.7"/>')
            elif pts:
                path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
                dash = ' stroke-dasharray="5,4"' if style else ""
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                           f'stroke-width="1.5"{dash}/>')
            if label:
                legend.append((label, color))
        out.append("</g>")
        for n, (label, color) in enumerate(legend):
            y = MARGIN["top"] + 12 + 14 * n
            out.append(f'<rect x="{MARGIN["left"] + 8}" y="{y - 8}" width="10" height="8" fill="{color}"/>')
            out.append(f'<text x="{MARGIN["left"] + 22}" y="{y}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
