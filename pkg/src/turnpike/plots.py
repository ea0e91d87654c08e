"""Minimal self-contained SVG log-log line plots.

Each data point is a ``<circle>`` carrying its raw ``data-x`` / ``data-y``
values, so the numbers can be read back from the file without a renderer.
"""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

Series = Tuple[str, Sequence[float], Sequence[float]]

COLORS = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e')
W, H = 560, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _decades(lo: float, hi: float) -> List[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_svg(series: Sequence[Series], title: str = '', xlabel: str = '', ylabel: str = '') -> str:
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if x > 0 and y > 0]
    if pts:
        lx = [math.log10(x) for x, _ in pts]
        ly = [math.log10(y) for _, y in pts]
        x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
        y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    else:
        x0, x1, y0, y1 = 0, 1, 0, 1
    x1 = max(x1, x0 + 1)
    y1 = max(y1, y0 + 1)

    def sx(x):
        return LEFT + (math.log10(x) - x0) / (x1 - x0) * (W - LEFT - RIGHT)

    def sy(y):
        return H - BOTTOM - (math.log10(y) - y0) / (y1 - y0) * (H - TOP - BOTTOM)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
           'fill="none" stroke="black"/>']
    for d in _decades(x0, x1):
        px = sx(10.0 ** d)
        out.append(f'<line x1="{px:.2f}" y1="{TOP}" x2="{px:.2f}" y2="{H - BOTTOM}" stroke="#ddd"/>')
        out.append(f'<text x="{px:.2f}" y="{H - BOTTOM + 16}" text-anchor="middle" font-size="11">1e{d}</text>')
    for d in _decades(y0, y1):
        py = sy(10.0 ** d)
        out.append(f'<line x1="{LEFT}" y1="{py:.2f}" x2="{W - RIGHT}" y2="{py:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{py + 4:.2f}" text-anchor="end" font-size="11">1e{d}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>')

    for k, (label, xs, ys) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        good = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
        out.append(f'<g class="series" data-label="{escape(label)}">')
        if len(good) > 1:
            path = ' '.join(f'{sx(x):.2f},{sy(y):.2f}' for x, y in good)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in good:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}" '
                       f'data-x="{x!r}" data-y="{y!r}"/>')
        out.append(f'<text x="{W - RIGHT - 8}" y="{TOP + 16 + 15 * k}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{escape(label)}</text>')
        out.append('</g>')
    out.append('</svg>')
    return '\n'.join(out) + '\n'
