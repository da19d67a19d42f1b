"""Deterministic SVG snapshots of a map.

The emitter writes every coordinate with fixed precision and orders
elements by feature id, so the same map always produces the same bytes.
"""

from __future__ import annotations

from pathlib import Path

from .core import FeatureKind, PriorMap
from .new_features import NewFeatureMap
from .simulator import WorldTimeline

_POLE_COLOR = "#1f77b4"
_CORNER_COLOR = "#d62728"
_CANDIDATE_COLOR = "#2ca02c"
_ROUTE_COLOR = "#999999"
_OCCLUDER_COLOR = "#cccccc"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _bounds(points, margin=10.0):
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return (min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)


def render_map(
    prior: PriorMap,
    path: str | Path,
    world: WorldTimeline | None = None,
    new_map: NewFeatureMap | None = None,
    scale: float = 4.0,
) -> None:
    """Write an SVG of the map; y is flipped so north is up."""
    points = [f.position for f in prior.features.values()]
    if world is not None:
        points.extend(world.route)
    if new_map is not None:
        points.extend(c.position for c in new_map.candidates.values())
    if not points:
        points = [(0.0, 0.0)]
    x0, y0, x1, y1 = _bounds(points)
    width = (x1 - x0) * scale
    height = (y1 - y0) * scale

    def tx(x: float) -> str:
        return _fmt((x - x0) * scale)

    def ty(y: float) -> str:
        return _fmt((y1 - y) * scale)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>',
    ]

    if world is not None:
        pts = " ".join(f"{tx(x)},{ty(y)}" for x, y in world.route)
        lines.append(
            f'<polygon points="{pts}" fill="none" stroke="{_ROUTE_COLOR}" '
            f'stroke-width="2" stroke-dasharray="6,4"/>'
        )
        for occ in world.occluders:
            cx, cy = occ.center
            lines.append(
                f'<rect x="{tx(cx - occ.width / 2)}" y="{ty(cy + occ.depth / 2)}" '
                f'width="{_fmt(occ.width * scale)}" height="{_fmt(occ.depth * scale)}" '
                f'fill="{_OCCLUDER_COLOR}" stroke="none"/>'
            )

    for feat in sorted(prior.features.values(), key=lambda f: f.id):
        x, y = feat.position
        if feat.kind is FeatureKind.POLE:
            lines.append(
                f'<circle cx="{tx(x)}" cy="{ty(y)}" r="{_fmt(1.2 * scale / 2)}" '
                f'fill="{_POLE_COLOR}"/>'
            )
        else:
            half = 1.2 * scale / 2
            lines.append(
                f'<rect x="{_fmt(float(tx(x)) - half)}" y="{_fmt(float(ty(y)) - half)}" '
                f'width="{_fmt(2 * half)}" height="{_fmt(2 * half)}" '
                f'fill="{_CORNER_COLOR}"/>'
            )

    if new_map is not None:
        arm = 1.0 * scale
        for cid in sorted(new_map.candidates):
            x, y = new_map.candidates[cid].position
            cx, cy = float(tx(x)), float(ty(y))
            lines.append(
                f'<path d="M {_fmt(cx - arm)} {_fmt(cy)} L {_fmt(cx + arm)} {_fmt(cy)} '
                f'M {_fmt(cx)} {_fmt(cy - arm)} L {_fmt(cx)} {_fmt(cy + arm)}" '
                f'stroke="{_CANDIDATE_COLOR}" stroke-width="2" fill="none"/>'
            )

    lines.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
