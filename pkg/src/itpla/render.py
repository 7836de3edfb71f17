"""Deterministic SVG drawings of placements.

Element order: polygon outline, modules by id, connector marks by module
and side, pairwise overlap regions by id pair, protrusions by id.
Overlap regions carry ``class="overlap"``; parts outside the polygon carry
``class="protrusion"``.
"""

from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np
import shapely

from .io import atomic_write
from .model import Placement

_MIN_AREA = 1e-12


def _num(v: float) -> str:
    s = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _points(coords) -> str:
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in coords)


def _ring_path(coords) -> str:
    pts = list(coords)[:-1]
    head = f"M{_num(pts[0][0])},{_num(pts[0][1])}"
    return head + "".join(f"L{_num(x)},{_num(y)}" for x, y in pts[1:]) + "Z"


def _geometry_path(geom) -> str:
    parts = []
    polys = getattr(geom, "geoms", [geom])
    for poly in polys:
        if poly.geom_type != "Polygon" or poly.is_empty:
            continue
        parts.append(_ring_path(poly.exterior.coords))
        parts.extend(_ring_path(r.coords) for r in poly.interiors)
    return "".join(parts)


def _shapes(placement: Placement) -> list:
    if placement.shape.is_triangle:
        return [shapely.Polygon(v) for v in placement.footprint_vertices()]
    return [shapely.Point(c).buffer(placement.shape.size, quad_segs=32) for c in placement.centers]


def overlap_regions(placement: Placement) -> list[tuple[int, int, object]]:
    """Pairwise intersection regions (inside the polygon) as
    ``(id_a, id_b, geometry)``, ordered by id pair."""
    shapes = _shapes(placement)
    poly = shapely.Polygon(placement.polygon.vertices)
    out = []
    for a in range(len(shapes)):
        for b in range(a + 1, len(shapes)):
            if not shapes[a].intersects(shapes[b]):
                continue
            region = shapes[a].intersection(shapes[b]).intersection(poly)
            if region.area > _MIN_AREA:
                out.append((int(placement.ids[a]), int(placement.ids[b]), region))
    return out


def protrusions(placement: Placement) -> list[tuple[int, object]]:
    poly = shapely.Polygon(placement.polygon.vertices)
    out = []
    for i, s in zip(placement.ids, _shapes(placement)):
        outside = s.difference(poly)
        if outside.area > _MIN_AREA:
            out.append((int(i), outside))
    return out


def render_svg(placement: Placement, title: str | None = None, width: int = 640) -> str:
    """SVG text for ``placement`` over its polygon."""
    poly = placement.polygon
    x0, y0, x1, y1 = poly.bounds
    if len(placement):
        reach = placement.shape.circumradius
        x0 = min(x0, float(placement.centers[:, 0].min()) - reach)
        x1 = max(x1, float(placement.centers[:, 0].max()) + reach)
        y0 = min(y0, float(placement.centers[:, 1].min()) - reach)
        y1 = max(y1, float(placement.centers[:, 1].max()) + reach)
    span = max(x1 - x0, y1 - y0)
    pad = 0.05 * span
    vb_w, vb_h = (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad
    height = max(1, int(round(width * vb_h / vb_w)))
    stroke = _num(span / 400)
    mark = span / 150

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{_num(x0 - pad)} {_num(-(y1 + pad))} {_num(vb_w)} {_num(vb_h)}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    # world y points up; flip once for the whole drawing
    lines.append(f'<g transform="scale(1,-1)" stroke-width="{stroke}">')
    lines.append(f'<polygon class="boundary" fill="none" stroke="#000" points="{_points(poly.vertices)}"/>')
    for i, c, t in zip(placement.ids, placement.centers, placement.thetas):
        if placement.shape.is_triangle:
            verts = placement.shape.local_vertices(t) + c
            lines.append(f'<polygon class="module" data-id="{int(i)}" fill="#8fb8de" fill-opacity="0.7" '
                         f'stroke="#1f4e79" points="{_points(verts)}"/>')
        else:
            lines.append(f'<circle class="module" data-id="{int(i)}" cx="{_num(c[0])}" cy="{_num(c[1])}" '
                         f'r="{_num(placement.shape.size)}" fill="#8fb8de" fill-opacity="0.7" stroke="#1f4e79"/>')
    if placement.shape.is_triangle:
        for i, c, t in zip(placement.ids, placement.centers, placement.thetas):
            verts = placement.shape.local_vertices(t) + c
            mids = 0.5 * (np.roll(verts, 1, axis=0) + verts)
            for k, m in enumerate(mids):
                lines.append(f'<circle class="connector" data-id="{int(i)}" data-side="{k}" '
                             f'cx="{_num(m[0])}" cy="{_num(m[1])}" r="{_num(mark)}" fill="#c00000"/>')
    for a, b, region in overlap_regions(placement):
        lines.append(f'<path class="overlap" data-ids="{a} {b}" fill="#ff0000" fill-opacity="0.6" '
                     f'stroke="none" d="{_geometry_path(region)}"/>')
    for i, region in protrusions(placement):
        lines.append(f'<path class="protrusion" data-id="{i}" fill="#ff9900" fill-opacity="0.6" '
                     f'stroke="none" d="{_geometry_path(region)}"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(placement: Placement, path, title: str | None = None) -> None:
    atomic_write(Path(path), render_svg(placement, title))


__all__ = ["render_svg", "save_svg", "overlap_regions", "protrusions"]
