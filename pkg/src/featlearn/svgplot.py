"""Dependency-free SVG scatter of embedded neuron weights.

Neurons are dots coloured by the nearer of the two target directions
``+t`` (red) and ``-t`` (orange); the targets themselves are drawn as stars.
Output bytes depend only on the inputs: coordinates are printed with a fixed
number of decimals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import Embedding2D, classical_mds, row_cosines, target_direction

RED = "#d62728"
ORANGE = "#ff7f0e"
INK = "#333333"
PAPER_BG = "#ffffff"
PALETTE = (RED, ORANGE, INK, PAPER_BG)

SIZE = 480
MARGIN = 30


@dataclass
class ScatterColoring:
    """Per-point colours plus the planar positions of the ``+t`` and ``-t`` stars."""

    colors: list
    stars: tuple  # ((x+, y+), (x-, y-))

    def __post_init__(self):
        bad = set(self.colors) - {RED, ORANGE}
        if bad:
            raise ValueError(f"colours outside the palette: {sorted(bad)}")
        if len(self.stars) != 2:
            raise ValueError("need exactly two stars (+t and -t)")


def weights_scatter(W, A, dictionary):
    """Embed the rows of ``W`` together with ``+t`` and ``-t``.

    The two target rows are appended before MDS so they share the neurons'
    coordinates.  Returns ``(Embedding2D of the neurons, ScatterColoring)``.
    """
    t = target_direction(A, dictionary)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    emb = classical_mds(np.vstack([W, t, -t]))
    cos = row_cosines(W, t)
    colors = [RED if c >= 0 else ORANGE for c in cos]
    pts = emb.points
    neurons = Embedding2D(pts[:-2].copy(), emb.stress)
    stars = (tuple(map(float, pts[-2])), tuple(map(float, pts[-1])))
    return neurons, ScatterColoring(colors, stars)


def _star_path(cx, cy, r):
    pts = []
    for i in range(10):
        rad = r if i % 2 == 0 else 0.45 * r
        ang = -math.pi / 2 + i * math.pi / 5
        pts.append(f"{cx + rad * math.cos(ang):.3f},{cy + rad * math.sin(ang):.3f}")
    return "M" + " L".join(pts) + " Z"


def _mapper(points):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = float(np.max(hi - lo))
    span = span if span > 0 else 1.0
    inner = SIZE - 2 * MARGIN
    mid = (lo + hi) / 2

    def to_px(p):
        x = SIZE / 2 + (p[0] - mid[0]) / span * inner
        y = SIZE / 2 - (p[1] - mid[1]) / span * inner
        return x, y

    return to_px


def render_svg(embedding, coloring, title=""):
    pts = np.asarray(embedding.points, dtype=float)
    if len(coloring.colors) != len(pts):
        raise ValueError("one colour per point is required")
    to_px = _mapper(np.vstack([pts, np.asarray(coloring.stars, dtype=float)]))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="{PAPER_BG}" stroke="{INK}"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN}" y="20" font-size="12" fill="{INK}">{title}</text>')
    for p, col in zip(pts, coloring.colors):
        x, y = to_px(p)
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3" fill="{col}" fill-opacity="0.7"/>')
    for (sx, sy), col in zip(coloring.stars, (RED, ORANGE)):
        x, y = to_px((sx, sy))
        out.append(f'<path d="{_star_path(x, y, 10)}" fill="{col}" stroke="{INK}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_scatter(embedding, coloring, path, title=""):
    text = render_svg(embedding, coloring, title)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
