"""Rigid isometric-grid baseline.

A triangular lattice of side ``side`` is laid over the polygon and the
number of lattice triangles lying entirely inside is maximized over grid
offset (within one lattice period) and rotation (within [0, pi/3), the
lattice's rotational period).  It is a transparent lower-bound comparator,
not a reimplementation of any published heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Point2, SimplePolygon, convex_inside_polygon, point_in_polygon

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class GridPose:
    offset: Point2
    rotation: float

    def __post_init__(self):
        object.__setattr__(self, "offset", Point2(float(self.offset[0]), float(self.offset[1])))
        if not (math.isfinite(self.offset.x) and math.isfinite(self.offset.y)
                and math.isfinite(self.rotation)):
            raise ValueError("grid pose must be finite")


def _basis(side: float, rotation: float) -> tuple[np.ndarray, np.ndarray]:
    a1 = side * np.array([math.cos(rotation), math.sin(rotation)])
    a2 = side * np.array([math.cos(rotation + math.pi / 3), math.sin(rotation + math.pi / 3)])
    return a1, a2


def _cell_range(polygon: SimplePolygon, origin: np.ndarray, a1, a2) -> tuple[np.ndarray, np.ndarray]:
    """Lattice indices of every cell that can touch the polygon's box."""
    x0, y0, x1, y1 = polygon.bounds
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]) - origin
    inv = np.linalg.inv(np.column_stack([a1, a2]))
    uv = corners @ inv.T
    lo = np.floor(uv.min(axis=0)).astype(int) - 2
    hi = np.ceil(uv.max(axis=0)).astype(int) + 1
    ii, jj = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    return ii.ravel(), jj.ravel()


def _lattice_triangles(origins: np.ndarray, ii, jj, a1, a2) -> np.ndarray:
    """``(len(origins), 2 * cells, 3, 2)`` up and down triangles."""
    p = origins[:, None, :] + ii[None, :, None] * a1 + jj[None, :, None] * a2
    up = np.stack([p, p + a1, p + a2], axis=2)
    down = np.stack([p + a1, p + a1 + a2, p + a2], axis=2)
    return np.concatenate([up, down], axis=1)


def _boundary_distance(points: np.ndarray, polygon: SimplePolygon) -> np.ndarray:
    pa, pb = polygon.edges
    e = pb - pa
    rel = points[:, None, :] - pa[None]
    t = np.clip(np.einsum("mnd,nd->mn", rel, e) / np.einsum("nd,nd->n", e, e)[None], 0.0, 1.0)
    diff = rel - t[..., None] * e[None]
    return np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)


def _inside_mask(tris: np.ndarray, polygon: SimplePolygon, side: float, tol: float) -> np.ndarray:
    """Containment for a flat ``(m, 3, 2)`` batch; the centroid clearance
    settles most triangles and the exact test handles the rest."""
    r_in = side / (2 * SQRT3)
    r_out = side / SQRT3
    cent = (tris[:, 0] + tris[:, 1] + tris[:, 2]) / 3.0
    x0, y0, x1, y1 = polygon.bounds
    m = r_in - tol
    near = np.flatnonzero((cent[:, 0] >= x0 + m) & (cent[:, 0] <= x1 - m) &
                          (cent[:, 1] >= y0 + m) & (cent[:, 1] <= y1 - m))
    result = np.zeros(len(tris), dtype=bool)
    if len(near) == 0:
        return result
    c = cent[near]
    keep = point_in_polygon(c, polygon.vertices)
    near, c = near[keep], c[keep]
    dist = _boundary_distance(c, polygon)
    result[near[dist >= r_out + tol]] = True
    unsure = near[(dist < r_out + tol) & (dist >= r_in - tol)]
    if len(unsure):
        result[unsure] = convex_inside_polygon(tris[unsure], polygon, tol)
    return result


def grid_triangles(polygon: SimplePolygon, side: float, pose: GridPose,
                   tol: float | None = None) -> np.ndarray:
    """Vertices ``(k, 3, 2)`` of the lattice triangles inside the polygon."""
    if tol is None:
        tol = 1e-9 * side
    a1, a2 = _basis(side, pose.rotation)
    origin = np.asarray(pose.offset, dtype=float)
    ii, jj = _cell_range(polygon, origin, a1, a2)
    tris = _lattice_triangles(origin[None], ii, jj, a1, a2)[0]
    return tris[_inside_mask(tris, polygon, side, tol)]


def grid_sweep(polygon: SimplePolygon, side: float, offsets: int = 32,
               rotations: int = 60) -> tuple[int, GridPose]:
    """Best count of whole lattice triangles over ``offsets x offsets x
    rotations`` grid poses.

    The lattice is anchored at the polygon's first vertex; offsets step
    through one lattice period along each basis vector and rotations step
    through [0, pi/3).  Ties keep the first pose in sweep order (rotation,
    then first offset axis, then second).
    """
    if not side > 0:
        raise ValueError("side must be positive")
    if offsets < 1 or rotations < 1:
        raise ValueError("offsets and rotations must be at least 1")
    tol = 1e-9 * side
    anchor = polygon.vertices[0]
    frac = np.arange(offsets) / offsets
    fu, fv = np.meshgrid(frac, frac, indexing="ij")
    fu, fv = fu.ravel(), fv.ravel()
    best_count, best_pose = -1, None
    for r in range(rotations):
        phi = r * (math.pi / 3) / rotations
        a1, a2 = _basis(side, phi)
        origins = anchor[None] + fu[:, None] * a1 + fv[:, None] * a2
        ii, jj = _cell_range(polygon, anchor, a1, a2)
        tris = _lattice_triangles(origins, ii, jj, a1, a2)
        n_pose, per_pose = tris.shape[:2]
        inside = _inside_mask(tris.reshape(-1, 3, 2), polygon, side, tol)
        counts = inside.reshape(n_pose, per_pose).sum(axis=1)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count = int(counts[k])
            best_pose = GridPose(Point2(*origins[k]), phi)
    return best_count, best_pose


__all__ = ["GridPose", "grid_sweep", "grid_triangles"]
