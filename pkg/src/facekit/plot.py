"""Minimal SVG line and scatter charts for the experiment commands."""
from __future__ import annotations

from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
WIDTH, HEIGHT, PAD = 480, 320, 48


def _scale(values, lo_px, hi_px):
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lambda v: lo_px + (v - lo) * (hi_px - lo_px) / (hi - lo), lo, hi


def svg_chart(series: dict, title: str, xlabel: str, ylabel: str, lines: bool = True) -> str:
    """``series`` maps a legend label to a list of ``(x, y)`` points."""
    xs = [x for pts in series.values() for x, _ in pts] or [0.0]
    ys = [y for pts in series.values() for _, y in pts] or [0.0]
    sx, x0, x1 = _scale(xs, PAD, WIDTH - PAD)
    sy, y0, y1 = _scale(ys, HEIGHT - PAD, PAD)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
           f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{HEIGHT / 2}" font-size="12" transform="rotate(-90 14 {HEIGHT / 2})" '
           f'text-anchor="middle">{escape(ylabel)}</text>',
           f'<text x="{PAD}" y="{HEIGHT - PAD + 14}" font-size="10">{x0:g}</text>',
           f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 14}" font-size="10" text-anchor="end">{x1:g}</text>',
           f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" font-size="10" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{PAD - 4}" y="{PAD + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>']
    for i, (label, pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = [(sx(x), sy(y)) for x, y in pts]
        if lines and len(coords) > 1:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in coords:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - PAD + 4}" y="{PAD + 14 * i}" font-size="10" fill="{color}">'
                   f'{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
