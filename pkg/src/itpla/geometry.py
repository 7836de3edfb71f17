"""Planar geometry kernel.

Areas, convex clipping, union area inside a clip polygon, directional
contact distances and containment tests.  Shapes are world-frame values:
:class:`Disk` for circular footprints and :class:`ConvexPolygon` for
polygonal ones.  Circles are never polygonalized; every circle computation
here is analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence, Union

import numpy as np
import shapely

EPS = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


def _as_vertices(vertices) -> np.ndarray:
    arr = np.asarray(vertices, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) vertex array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vertex coordinates must be finite")
    return arr


def signed_area(vertices) -> float:
    """Shoelace signed area; positive for counter-clockwise order."""
    v = _as_vertices(vertices)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _segments_cross(p1, p2, q1, q2, tol: float = 1e-12) -> bool:
    """True if closed segments p1p2 and q1q2 share any point."""
    d1 = _cross(p2 - p1, q1 - p1)
    d2 = _cross(p2 - p1, q2 - p1)
    d3 = _cross(q2 - q1, p1 - q1)
    d4 = _cross(q2 - q1, p2 - q1)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True

    def on_seg(a, b, p, d):
        if abs(d) > tol:
            return False
        return (min(a[0], b[0]) - tol <= p[0] <= max(a[0], b[0]) + tol and
                min(a[1], b[1]) - tol <= p[1] <= max(a[1], b[1]) + tol)

    return (on_seg(p1, p2, q1, d1) or on_seg(p1, p2, q2, d2) or
            on_seg(q1, q2, p1, d3) or on_seg(q1, q2, p2, d4))


class SimplePolygon:
    """A simple polygon with counter-clockwise vertices.

    Clockwise input is reversed.  Self-intersecting or degenerate input
    raises ``ValueError``.
    """

    def __init__(self, vertices, name: str | None = None):
        v = _as_vertices(vertices)
        if len(v) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        area = signed_area(v)
        if abs(area) <= EPS:
            raise ValueError("degenerate polygon (zero area)")
        if area < 0:
            v = v[::-1].copy()
        self._check_simple(v)
        v.setflags(write=False)
        self.vertices = v
        self.name = name
        self._area = abs(area)
        self._segments: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._shapely = None

    @staticmethod
    def _check_simple(v: np.ndarray) -> None:
        n = len(v)
        for i in range(n):
            if np.allclose(v[i], v[(i + 1) % n], atol=EPS, rtol=0):
                raise ValueError(f"repeated vertex at index {i}")
        for i in range(n):
            a1, a2 = v[i], v[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                if _segments_cross(a1, a2, v[j], v[(j + 1) % n]):
                    raise ValueError(f"edges {i} and {j} intersect; polygon is not simple")

    @property
    def area(self) -> float:
        return self._area

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge start and end points, each ``(n, 2)``."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def segments(self, max_length: float | None = None):
        """Boundary split into pieces no longer than ``max_length``.

        Returns ``(starts, ends, parent_edge)``; cached per length.
        """
        key = float(max_length) if max_length else 0.0
        if key not in self._segments:
            a, b = self.edges
            starts, ends, parent = [], [], []
            for j in range(len(a)):
                length = float(np.hypot(*(b[j] - a[j])))
                pieces = 1 if not max_length else max(1, math.ceil(length / max_length - 1e-9))
                t = np.linspace(0.0, 1.0, pieces + 1)
                pts = a[j] + t[:, None] * (b[j] - a[j])
                starts.append(pts[:-1])
                ends.append(pts[1:])
                parent.extend([j] * pieces)
            self._segments[key] = (np.vstack(starts), np.vstack(ends), np.array(parent))
        return self._segments[key]

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def contains(self, points) -> np.ndarray:
        return point_in_polygon(points, self.vertices)

    def as_shapely(self):
        if self._shapely is None:
            self._shapely = shapely.Polygon(self.vertices)
            shapely.prepare(self._shapely)
        return self._shapely

    def __repr__(self) -> str:
        return f"SimplePolygon({len(self.vertices)} vertices, area={self.area:.6g})"


@dataclass(frozen=True)
class Disk:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon in world coordinates, CCW, with a reference center."""

    vertices: np.ndarray
    center: np.ndarray = field(default=None)

    def __post_init__(self):
        v = _as_vertices(self.vertices)
        if signed_area(v) < 0:
            v = v[::-1].copy()
        object.__setattr__(self, "vertices", v)
        c = v.mean(axis=0) if self.center is None else np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)

    @property
    def area(self) -> float:
        return abs(signed_area(self.vertices))


Shape = Union[Disk, ConvexPolygon]


def polygon_area(poly) -> float:
    """Area of a polygon (``SimplePolygon`` or vertex array)."""
    if isinstance(poly, SimplePolygon):
        return poly.area
    a = abs(signed_area(poly))
    if a <= EPS:
        raise ValueError("degenerate polygon (zero area)")
    return a


def point_in_polygon(points, vertices) -> np.ndarray:
    """Even-odd containment for an ``(m, 2)`` array of points.

    Points on the boundary may land either way.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crossings = np.sum(straddle & (x < xint), axis=1)
    return crossings % 2 == 1


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman: clip ``subject`` by the convex CCW polygon ``clip``.

    ``subject`` may be non-convex; the result then has degenerate bridging
    edges but its shoelace area is still the intersection area.
    """
    out = [tuple(p) for p in subject]
    n = len(clip)
    for k in range(n):
        if not out:
            break
        ax, ay = clip[k]
        bx, by = clip[(k + 1) % n]
        ex, ey = bx - ax, by - ay
        inp, out = out, []
        sx, sy = inp[-1]
        s_side = ex * (sy - ay) - ey * (sx - ax)
        for px, py in inp:
            p_side = ex * (py - ay) - ey * (px - ax)
            if p_side >= 0:
                if s_side < 0:
                    t = s_side / (s_side - p_side)
                    out.append((sx + t * (px - sx), sy + t * (py - sy)))
                out.append((px, py))
            elif s_side >= 0:
                t = s_side / (s_side - p_side)
                out.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy, s_side = px, py, p_side
    return np.array(out, dtype=float).reshape(-1, 2)


def _lens_area(d: float, r1: float, r2: float) -> float:
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = math.acos(max(-1.0, min(1.0, (d * d + r1 * r1 - r2 * r2) / (2 * d * r1))))
    a2 = math.acos(max(-1.0, min(1.0, (d * d + r2 * r2 - r1 * r1) / (2 * d * r2))))
    k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    return r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * math.sqrt(max(k, 0.0))


def intersection_area(a, b) -> float:
    """Area of ``a`` intersected with ``b``.

    ``a`` is a placed convex shape; ``b`` is another placed shape or a
    :class:`SimplePolygon` (which may be non-convex).
    """
    if isinstance(a, SimplePolygon) and not isinstance(b, SimplePolygon):
        a, b = b, a
    if isinstance(a, Disk):
        if isinstance(b, Disk):
            d = float(np.hypot(*(a.center - b.center)))
            return _lens_area(d, a.radius, b.radius)
        verts = b.vertices
        return _disks_union_clipped(a.center[None, :], np.array([a.radius]), verts)
    if isinstance(a, ConvexPolygon):
        if isinstance(b, Disk):
            return intersection_area(b, a)
        verts = b.vertices
        clipped = clip_convex(verts, a.vertices)
        if len(clipped) < 3:
            return 0.0
        return abs(signed_area(clipped))
    raise TypeError(f"unsupported shape pair {type(a).__name__}, {type(b).__name__}")


def union_area_clipped(shapes: Sequence[Shape], clip: SimplePolygon) -> float:
    """Area of the union of ``shape & clip`` over all shapes.

    Disks are handled analytically (boundary integration over arcs and
    clip-edge pieces); polygons go through an exact overlay.
    """
    if not shapes:
        return 0.0
    if all(isinstance(s, Disk) for s in shapes):
        centers = np.array([s.center for s in shapes])
        radii = np.array([s.radius for s in shapes])
        return _disks_union_clipped(centers, radii, clip.vertices)
    if all(isinstance(s, ConvexPolygon) for s in shapes):
        return polygons_union_clipped([s.vertices for s in shapes], clip)
    raise TypeError("mixed disk/polygon unions are not supported")


def polygons_union_clipped(polys, clip: SimplePolygon) -> float:
    if len(polys) == 0:
        return 0.0
    geoms = shapely.polygons(np.asarray(polys, dtype=float))
    union = shapely.union_all(geoms)
    return float(shapely.area(shapely.intersection(union, clip.as_shapely())))


def _arc_integral(cx, cy, r, a, b):
    # 1/2 * integral of (x dy - y dx) along the CCW arc from angle a to b
    return 0.5 * (r * r * (b - a) + r * cx * (math.sin(b) - math.sin(a))
                  - r * cy * (math.cos(b) - math.cos(a)))


def _disks_union_clipped(centers: np.ndarray, radii: np.ndarray, poly: np.ndarray) -> float:
    """Exact area of (union of disks) & polygon via Green's theorem."""
    n = len(radii)
    pa = np.asarray(poly, dtype=float)
    pb = np.roll(pa, -1, axis=0)
    total = 0.0

    # identical disks: keep only the first copy
    alive = np.ones(n, dtype=bool)
    for i in range(n):
        for j in range(i):
            if alive[j] and abs(radii[i] - radii[j]) <= EPS and \
                    np.hypot(*(centers[i] - centers[j])) <= EPS:
                alive[i] = False
                break
    idx = np.flatnonzero(alive)
    c = centers[idx]
    r = radii[idx]
    n = len(idx)

    seg_d = pb - pa
    seg_len2 = np.einsum("ij,ij->i", seg_d, seg_d)

    for i in range(n):
        cx, cy = c[i]
        ri = r[i]
        angles = []
        # circle-circle breakpoints
        dvec = c - c[i]
        dist = np.hypot(dvec[:, 0], dvec[:, 1])
        for j in np.flatnonzero((dist < ri + r) & (dist > np.abs(ri - r))):
            if j == i:
                continue
            base = math.atan2(dvec[j, 1], dvec[j, 0])
            cosv = (dist[j] ** 2 + ri * ri - r[j] ** 2) / (2 * dist[j] * ri)
            half = math.acos(max(-1.0, min(1.0, cosv)))
            angles.extend((base - half, base + half))
        # circle-edge breakpoints
        f = pa - c[i]
        bq = 2 * np.einsum("ij,ij->i", f, seg_d)
        cq = np.einsum("ij,ij->i", f, f) - ri * ri
        disc = bq * bq - 4 * seg_len2 * cq
        for k in np.flatnonzero(disc > 0):
            sq = math.sqrt(disc[k])
            for t in ((-bq[k] - sq) / (2 * seg_len2[k]), (-bq[k] + sq) / (2 * seg_len2[k])):
                if 0.0 <= t <= 1.0:
                    px, py = pa[k] + t * seg_d[k]
                    angles.append(math.atan2(py - cy, px - cx))
        if angles:
            ang = np.sort(np.mod(np.array(angles), 2 * math.pi))
            ang = np.append(ang, ang[0] + 2 * math.pi)
        else:
            ang = np.array([0.0, 2 * math.pi])
        starts, ends = ang[:-1], ang[1:]
        keep = ends - starts > 1e-15
        starts, ends = starts[keep], ends[keep]
        if len(starts) == 0:
            continue
        mids = 0.5 * (starts + ends)
        mx = cx + ri * np.cos(mids)
        my = cy + ri * np.sin(mids)
        mpts = np.column_stack([mx, my])
        others = np.arange(n) != i
        dd = np.hypot(mx[:, None] - c[others, 0][None, :], my[:, None] - c[others, 1][None, :])
        covered = np.any(dd < r[others][None, :] - 1e-12, axis=1)
        inside = point_in_polygon(mpts, pa)
        for a0, a1 in zip(starts[inside & ~covered], ends[inside & ~covered]):
            total += _arc_integral(cx, cy, ri, a0, a1)

    # polygon edge pieces inside the union
    for k in range(len(pa)):
        f = pa[k] - c
        bq = 2 * (f @ seg_d[k])
        cq = np.einsum("ij,ij->i", f, f) - r * r
        disc = bq * bq - 4 * seg_len2[k] * cq
        ts = [0.0, 1.0]
        for j in np.flatnonzero(disc > 0):
            sq = math.sqrt(disc[j])
            for t in ((-bq[j] - sq) / (2 * seg_len2[k]), (-bq[j] + sq) / (2 * seg_len2[k])):
                if 0.0 < t < 1.0:
                    ts.append(t)
        ts = np.unique(ts)
        mids = 0.5 * (ts[:-1] + ts[1:])
        mp = pa[k] + mids[:, None] * seg_d[k]
        dd = np.hypot(mp[:, 0:1] - c[None, :, 0], mp[:, 1:2] - c[None, :, 1])
        inside = np.any(dd < r[None, :], axis=1)
        for t0, t1 in zip(ts[:-1][inside], ts[1:][inside]):
            p = pa[k] + t0 * seg_d[k]
            q = pa[k] + t1 * seg_d[k]
            total += 0.5 * (p[0] * q[1] - q[0] * p[1])
    return total


# ---------------------------------------------------------------------------
# contact distances


@lru_cache(maxsize=None)
def _pair_indices(k: int):
    return np.triu_indices(k, 1)


def ray_exit_points(origin, direction, points) -> np.ndarray:
    """Exit distance of rays from the convex hull of point sets.

    ``origin`` ``(m, 2)``, ``direction`` ``(m, 2)`` unit vectors, ``points``
    ``(m, k, 2)``.  Each origin must lie inside its hull.  The exit is the
    largest ray parameter hitting any segment between two hull points, which
    equals the hull boundary crossing because every such segment lies in
    the hull.
    """
    o = np.asarray(origin, dtype=float)[:, None, :]
    u = np.asarray(direction, dtype=float)[:, None, :]
    pts = np.asarray(points, dtype=float) - o
    ia, ib = _pair_indices(pts.shape[1])
    a = pts[:, ia, :]
    e = pts[:, ib, :] - a
    denom = _cross(u, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(a, e) / denom
        s = _cross(a, u) / denom
    ok = (np.abs(denom) > 1e-15) & (s >= -1e-12) & (s <= 1 + 1e-12) & (t >= 0)
    t = np.where(ok, t, -np.inf)
    # points lying on the ray itself (collinear hull edges)
    along = np.einsum("mkd,mkd->mk", pts, np.broadcast_to(u, pts.shape))
    off = np.abs(_cross(pts, u))
    tp = np.where((off <= 1e-12) & (along >= 0), along, -np.inf)
    return np.maximum(t.max(axis=1), tp.max(axis=1))


def _ray_exit_dilated(origin, u, verts, r) -> float:
    """Exit distance of a ray from (convex polygon dilated by ``r``)."""
    best = 0.0
    o = np.asarray(origin, dtype=float)
    n = len(verts)
    for k in range(n):
        a = verts[k] - o
        b = verts[(k + 1) % n] - o
        for p in (a, b):
            # |t u - p| = r
            pu = float(p @ u)
            disc = pu * pu - (float(p @ p) - r * r)
            if disc >= 0:
                best = max(best, pu + math.sqrt(disc))
        e = b - a
        length = math.hypot(*e)
        if length <= 0:
            continue
        ehat = e / length
        nrm = np.array([ehat[1], -ehat[0]])
        # rectangle slab: 0 <= (x - a).ehat <= length, |(x - a).nrm| <= r
        lo, hi = 0.0, math.inf
        for axis, lower, upper in ((ehat, 0.0, length), (nrm, -r, r)):
            du = float(u @ axis)
            x0 = float(-a @ axis)
            if abs(du) < 1e-15:
                if not lower - 1e-12 <= x0 <= upper + 1e-12:
                    lo, hi = 1.0, 0.0
                    break
                continue
            t1, t2 = (lower - x0) / du, (upper - x0) / du
            if t1 > t2:
                t1, t2 = t2, t1
            lo, hi = max(lo, t1), min(hi, t2)
        if hi >= lo and hi >= 0:
            best = max(best, hi)
    return best


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = math.hypot(v[0], v[1])
    if norm <= EPS:
        raise ValueError("direction undefined: coincident points")
    return v / norm


def contact_distance(mover: Shape, target: Shape) -> float:
    """Center distance at which ``mover`` first touches ``target``.

    ``mover`` translates without rotating along the line joining the two
    centers.  Exact for every supported pair.
    """
    u = _unit(mover.center - target.center)
    if isinstance(mover, Disk) and isinstance(target, Disk):
        return mover.radius + target.radius
    if isinstance(mover, ConvexPolygon) and isinstance(target, ConvexPolygon):
        local = mover.vertices - mover.center
        pts = (target.vertices[:, None, :] - local[None, :, :]).reshape(-1, 2)
        return float(ray_exit_points(target.center[None], u[None], pts[None])[0])
    if isinstance(mover, Disk):
        return _ray_exit_dilated(target.center, u, target.vertices, mover.radius)
    # polygon mover against a disk target: Minkowski set is the reflected
    # mover dilated by the disk radius
    reflected = target.center - (mover.vertices - mover.center)
    return _ray_exit_dilated(target.center, u, reflected[::-1], target.radius)


def support_distance(shape: Shape, direction) -> float:
    """Extent of ``shape`` from its center along ``direction``."""
    u = _unit(direction)
    if isinstance(shape, Disk):
        return shape.radius
    return float(np.max((shape.vertices - shape.center) @ u))


def contact_distance_to_edge(mover: Shape, a, b) -> float:
    """Distance from the touching pose center to the edge's supporting line.

    ``mover`` translates along the edge normal through its center.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    e = _unit(b - a)
    off = float(_cross(e, mover.center - a))
    if abs(off) <= EPS:
        raise ValueError("module center lies on the edge's supporting line")
    toward_line = -np.sign(off) * np.array([-e[1], e[0]])
    return support_distance(mover, toward_line)


def closest_point_on_segment(p, a, b) -> tuple[np.ndarray, float]:
    """Closest point to ``p`` on segment ``ab`` and its parameter in [0, 1]."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    e = b - a
    t = float(np.clip((p - a) @ e / (e @ e), 0.0, 1.0))
    return a + t * e, t


def segment_contact_distance(mover: Shape, a, b) -> float:
    """Contact distance of ``mover`` against segment ``ab``.

    The mover approaches along the line from its center to the closest
    point of the segment.  When that point is interior to the segment this
    is the supporting-line distance; at an endpoint the whole segment is
    used as the obstacle.
    """
    q, t = closest_point_on_segment(mover.center, a, b)
    if 1e-12 < t < 1 - 1e-12:
        return contact_distance_to_edge(mover, a, b)
    if isinstance(mover, Disk):
        return mover.radius
    u = _unit(mover.center - q)
    local = mover.vertices - mover.center
    seg = np.array([a, b], dtype=float)
    pts = (seg[:, None, :] - local[None, :, :]).reshape(-1, 2)
    return float(ray_exit_points(q[None], u[None], pts[None])[0])


def convex_inside_polygon(tris: np.ndarray, poly: SimplePolygon, tol: float = 1e-9) -> np.ndarray:
    """Vectorized test that each convex polygon in ``tris`` lies inside ``poly``.

    ``tris`` is ``(m, k, 2)``.  A shape counts as inside when every vertex
    and edge midpoint is inside or on the boundary, no polygon vertex lies
    strictly inside it, and no polygon edge properly crosses one of its
    edges.  Touching the boundary is allowed.
    """
    tris = np.asarray(tris, dtype=float)
    m, k, _ = tris.shape
    if m == 0:
        return np.zeros(0, dtype=bool)
    pa, pb = poly.edges
    mids = 0.5 * (tris + np.roll(tris, -1, axis=1))
    probe = np.concatenate([tris, mids], axis=1).reshape(-1, 2)
    inside = point_in_polygon(probe, poly.vertices) | _on_boundary(probe, pa, pb, tol)
    ok = inside.reshape(m, 2 * k).all(axis=1)
    # polygon vertices strictly inside the shape
    ta = tris
    tb = np.roll(tris, -1, axis=1)
    te = tb - ta
    rel = poly.vertices[None, None, :, :] - ta[:, :, None, :]
    side = _cross(te[:, :, None, :], rel)
    strictly = (side > tol).all(axis=1).any(axis=1)
    ok &= ~strictly
    # proper crossings between shape edges and polygon edges
    pe = pb - pa
    s1 = _cross(te[:, :, None, :], pa[None, None] - ta[:, :, None, :])
    s2 = _cross(te[:, :, None, :], pb[None, None] - ta[:, :, None, :])
    s3 = _cross(pe[None, None], ta[:, :, None, :] - pa[None, None])
    s4 = _cross(pe[None, None], tb[:, :, None, :] - pa[None, None])
    proper = (((s1 > tol) & (s2 < -tol)) | ((s1 < -tol) & (s2 > tol))) & \
             (((s3 > tol) & (s4 < -tol)) | ((s3 < -tol) & (s4 > tol)))
    ok &= ~proper.any(axis=(1, 2))
    return ok


def _on_boundary(points, pa, pb, tol) -> np.ndarray:
    e = pb - pa
    rel = points[:, None, :] - pa[None]
    cross = np.abs(_cross(e[None], rel))
    lens = np.hypot(e[:, 0], e[:, 1])
    t = np.einsum("mnd,nd->mn", rel, e) / (lens ** 2)[None]
    return ((cross <= tol * lens[None]) & (t >= -tol) & (t <= 1 + tol)).any(axis=1)
