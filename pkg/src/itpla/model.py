"""Modules, placements and the neighbour relation.

Triangle conventions used throughout the package: side ``k`` (``k = 0, 1, 2``)
has outward normal bearing ``theta + 2*pi*k/3 - pi/2``; sides run
counter-clockwise, so the side direction is the normal turned by +90
degrees; the connector of side ``k`` is its mid point.  Semi-spaces of a
triangle are 120 degree sectors centred on the side normals and rotate with
the module; circle semi-spaces are 60 degree sectors fixed in the world
frame starting at bearing 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    ConvexPolygon,
    Disk,
    Point2,
    SimplePolygon,
    contact_distance,
    contact_distance_to_edge,
    intersection_area,
)

TWO_PI = 2.0 * math.pi
THIRD_TURN = TWO_PI / 3.0
SQRT3 = math.sqrt(3.0)
_BOUNDARY_SNAP = 1e-12


class ShapeKind(str, Enum):
    CIRCLE = "circle"
    TRIANGLE = "triangle"


@dataclass(frozen=True)
class ModuleShape:
    """Module footprint: a circle of radius ``size`` or an equilateral
    triangle of side ``size``."""

    kind: ShapeKind
    size: float

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if not (self.size > 0 and math.isfinite(self.size)):
            raise ValueError("module size must be positive and finite")

    @property
    def is_triangle(self) -> bool:
        return self.kind is ShapeKind.TRIANGLE

    @property
    def sectors(self) -> int:
        return 3 if self.is_triangle else 6

    @property
    def area(self) -> float:
        if self.is_triangle:
            return SQRT3 / 4.0 * self.size ** 2
        return math.pi * self.size ** 2

    @property
    def inradius(self) -> float:
        return self.size / (2 * SQRT3) if self.is_triangle else self.size

    @property
    def circumradius(self) -> float:
        return self.size / SQRT3 if self.is_triangle else self.size

    @property
    def diameter(self) -> float:
        return self.size if self.is_triangle else 2 * self.size

    def local_vertices(self, theta: float = 0.0) -> np.ndarray:
        """Triangle vertices relative to the centroid; vertex ``k`` joins
        sides ``k`` and ``k + 1``."""
        if not self.is_triangle:
            raise TypeError("circles have no vertices")
        ang = theta + THIRD_TURN * np.arange(3) - math.pi / 6
        return self.circumradius * np.column_stack([np.cos(ang), np.sin(ang)])

    def placed(self, center, theta: float = 0.0):
        center = np.asarray(center, dtype=float)
        if self.is_triangle:
            return ConvexPolygon(center + self.local_vertices(theta), center=center)
        return Disk(center, self.size)


def wrap_angle(theta: float) -> float:
    return float(theta % TWO_PI)


def wrap_third(angle):
    """Wrap into ``(-pi/3, pi/3]`` (period 2*pi/3)."""
    w = np.mod(np.asarray(angle, dtype=float) + math.pi / 3, THIRD_TURN)
    w = np.where(w <= _BOUNDARY_SNAP, THIRD_TURN, w)
    out = w - math.pi / 3
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Pose:
    center: Point2
    theta: float = 0.0

    def __post_init__(self):
        c = Point2(float(self.center[0]), float(self.center[1]))
        if not (math.isfinite(c.x) and math.isfinite(c.y) and math.isfinite(self.theta)):
            raise ValueError("pose must be finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Module:
    id: int
    shape: ModuleShape
    pose: Pose

    @property
    def center(self) -> np.ndarray:
        return np.array(self.pose.center)

    @property
    def theta(self) -> float:
        return self.pose.theta

    def footprint(self):
        return self.shape.placed(self.center, self.theta)

    def side_normals(self) -> np.ndarray:
        return side_normal_angles(self.theta)

    def sides(self) -> "SideGeometry":
        return SideGeometry.of(self)


def side_normal_angles(theta) -> np.ndarray:
    """Outward normal bearings of the three sides, shape ``(..., 3)``."""
    return np.asarray(theta, dtype=float)[..., None] + THIRD_TURN * np.arange(3) - math.pi / 2


@dataclass(frozen=True)
class SideGeometry:
    """Per-side normals, unit directions and connector points of a triangle."""

    normals: np.ndarray
    directions: np.ndarray
    midpoints: np.ndarray
    starts: np.ndarray
    ends: np.ndarray

    @classmethod
    def of(cls, module: Module) -> "SideGeometry":
        if not module.shape.is_triangle:
            raise TypeError("side geometry is defined for triangles only")
        ang = side_normal_angles(module.theta)
        normals = np.column_stack([np.cos(ang), np.sin(ang)])
        directions = np.column_stack([-normals[:, 1], normals[:, 0]])
        mid = module.center + module.shape.inradius * normals
        half = module.shape.size / 2
        return cls(normals, directions, mid, mid - half * directions, mid + half * directions)


class Placement:
    """Module poses over one polygon.  Immutable; modules are kept sorted
    by id."""

    def __init__(self, polygon: SimplePolygon, shape: ModuleShape, ids, centers, thetas):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        thetas = np.mod(np.asarray(thetas, dtype=float).reshape(-1), TWO_PI)
        if not (len(ids) == len(centers) == len(thetas)):
            raise ValueError("ids, centers and thetas must have equal length")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("module ids must be unique")
        if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(thetas))):
            raise ValueError("poses must be finite")
        order = np.argsort(ids, kind="stable")
        self.polygon = polygon
        self.shape = shape
        self.ids = ids[order]
        self.centers = centers[order]
        self.thetas = thetas[order]
        for arr in (self.ids, self.centers, self.thetas):
            arr.setflags(write=False)

    @classmethod
    def from_modules(cls, polygon: SimplePolygon, modules: Sequence[Module]) -> "Placement":
        if not modules:
            raise ValueError("use Placement.empty for a placement without modules")
        shape = modules[0].shape
        if any(m.shape != shape for m in modules):
            raise ValueError("all modules in a placement must share one shape")
        return cls(polygon, shape, [m.id for m in modules],
                   [m.pose.center for m in modules], [m.pose.theta for m in modules])

    @classmethod
    def empty(cls, polygon: SimplePolygon, shape: ModuleShape) -> "Placement":
        return cls(polygon, shape, [], np.zeros((0, 2)), [])

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def modules(self) -> list[Module]:
        return [Module(int(i), self.shape, Pose(c, t))
                for i, c, t in zip(self.ids, self.centers, self.thetas)]

    def index_of(self, module_id: int) -> int:
        pos = int(np.searchsorted(self.ids, module_id))
        if pos >= len(self.ids) or self.ids[pos] != module_id:
            raise KeyError(f"no module with id {module_id}")
        return pos

    def module(self, module_id: int) -> Module:
        i = self.index_of(module_id)
        return Module(int(self.ids[i]), self.shape, Pose(self.centers[i], self.thetas[i]))

    def footprints(self) -> list:
        return [self.shape.placed(c, t) for c, t in zip(self.centers, self.thetas)]

    def footprint_vertices(self) -> np.ndarray:
        """World vertices of every triangle, ``(n, 3, 2)``."""
        ang = self.thetas[:, None] + THIRD_TURN * np.arange(3)[None, :] - math.pi / 6
        r = self.shape.circumradius
        return self.centers[:, None, :] + r * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def with_poses(self, centers, thetas) -> "Placement":
        return Placement(self.polygon, self.shape, self.ids, centers, thetas)

    def without(self, module_id: int) -> "Placement":
        keep = self.ids != module_id
        if keep.all():
            raise KeyError(f"no module with id {module_id}")
        return Placement(self.polygon, self.shape, self.ids[keep], self.centers[keep],
                         self.thetas[keep])

    def edge_segments(self, subdivide: bool = True):
        return self.polygon.segments(self.shape.diameter if subdivide else None)

    def __repr__(self) -> str:
        return f"Placement({len(self)} x {self.shape.kind.value} {self.shape.size:g})"


def upper_bound(polygon: SimplePolygon, shape: ModuleShape) -> int:
    """Floor of polygon area over module area.

    A relative slack of 1e-9 absorbs rounding when the ratio is an integer
    (for instance a hexagon made of exactly six triangles).
    """
    ratio = polygon.area / shape.area
    return max(0, int(math.floor(ratio * (1 + 1e-9))))


def _sector_index(rel, width: float, count: int):
    # sector k covers (k*width, (k+1)*width]; relative angle 0 belongs to sector 0
    a = np.mod(rel, TWO_PI)
    scaled = a / width
    nearest = np.round(scaled)
    scaled = np.where(np.abs(scaled - nearest) < _BOUNDARY_SNAP, nearest, scaled)
    # a full turn is the boundary between the last sector and sector 0
    scaled = np.where(scaled >= count, 0.0, scaled)
    k = np.ceil(scaled).astype(np.int64) - 1
    k = np.where(k < 0, 0, k)
    return np.where(k >= count, 0, k)


def sector_of(shape: ModuleShape, theta, bearing):
    """Vectorized semi-space index of ``bearing`` seen from a module with
    orientation ``theta``."""
    if shape.is_triangle:
        rel = np.asarray(bearing) - (np.asarray(theta) - math.pi / 2) + math.pi / 3
        return _sector_index(rel, THIRD_TURN, 3)
    return _sector_index(np.asarray(bearing), math.pi / 3, 6)


def classify_semispace(subject: Module, point) -> int:
    d = np.asarray(point, dtype=float) - subject.center
    if math.hypot(d[0], d[1]) <= 1e-12:
        raise ValueError("point coincides with the module center")
    return int(sector_of(subject.shape, subject.theta, math.atan2(d[1], d[0])))


class NeighborGraph:
    """Per-module, per-semi-space nearest module and nearest boundary piece.

    ``module_nbr[i, k]`` is the position (not id) of the neighbouring module
    in sector ``k`` of module ``i``, or -1.  ``edge_nbr[i, k]`` indexes the
    boundary pieces returned by ``placement.edge_segments``.
    """

    def __init__(self, placement: Placement, module_nbr: np.ndarray, edge_nbr: np.ndarray,
                 subdivide: bool = True):
        self.placement = placement
        self.module_nbr = module_nbr
        self.edge_nbr = edge_nbr
        self.subdivide = subdivide

    @property
    def segments(self):
        return self.placement.edge_segments(self.subdivide)

    def neighbors_of(self, i: int) -> list[int]:
        """Positions of the modules that are neighbours of module ``i``."""
        row = self.module_nbr[i]
        return sorted(set(int(j) for j in row if j >= 0))

    def is_neighbor(self, j: int, i: int) -> bool:
        """True if module ``j`` is a neighbour of module ``i``."""
        return bool(np.any(self.module_nbr[i] == j))

    def mutual(self, i: int, j: int) -> bool:
        return self.is_neighbor(j, i) and self.is_neighbor(i, j)

    @cached_property
    def mutual_mask(self) -> np.ndarray:
        """``mask[i, k]`` is True when the sector-``k`` neighbour of ``i``
        also lists ``i`` as a neighbour."""
        n = len(self.placement)
        mask = np.zeros(self.module_nbr.shape, dtype=bool)
        if n == 0:
            return mask
        adj = np.zeros((n, n), dtype=bool)
        rows, cols = np.nonzero(self.module_nbr >= 0)
        adj[rows, self.module_nbr[rows, cols]] = True
        mask[rows, cols] = adj[self.module_nbr[rows, cols], rows]
        return mask

    def neighbor_counts(self) -> np.ndarray:
        """``|N(m_i)|``: modules that list ``m_i`` as a neighbour plus the
        boundary pieces that are neighbours of ``m_i``."""
        n = len(self.placement)
        counts = np.zeros(n, dtype=np.int64)
        for i in range(n):
            listed_by = {int(j) for j in range(n) if j != i and np.any(self.module_nbr[j] == i)}
            edges = {int(e) for e in self.edge_nbr[i] if e >= 0}
            counts[i] = len(listed_by) + len(edges)
        return counts

    @cached_property
    def overlaps(self) -> list[set]:
        """Overlap sets: partner module positions and ``("edge", j)`` tags for
        boundary pieces crossing the module interior."""
        p = self.placement
        n = len(p)
        out: list[set] = [set() for _ in range(n)]
        feet = p.footprints()
        reach = 2 * p.shape.circumradius
        for i in range(n):
            for j in range(i + 1, n):
                if np.hypot(*(p.centers[i] - p.centers[j])) >= reach:
                    continue
                if intersection_area(feet[i], feet[j]) > 1e-12:
                    out[i].add(j)
                    out[j].add(i)
        a, b, _ = p.polygon.segments(None)
        for i in range(n):
            for j in range(len(a)):
                if _segment_hits_interior(feet[i], a[j], b[j]):
                    out[i].add(("edge", j))
        return out


def _segment_hits_interior(shape, a, b) -> bool:
    if isinstance(shape, Disk):
        e = b - a
        t = np.clip((shape.center - a) @ e / (e @ e), 0, 1)
        return float(np.hypot(*(a + t * e - shape.center))) < shape.radius - 1e-12
    # convex polygon: clip the segment against every side with strict margins
    t0, t1 = 0.0, 1.0
    v = shape.vertices
    d = b - a
    for k in range(len(v)):
        p, q = v[k], v[(k + 1) % len(v)]
        e = q - p
        num = e[0] * (a[1] - p[1]) - e[1] * (a[0] - p[0])
        den = e[0] * d[1] - e[1] * d[0]
        margin = 1e-12 * math.hypot(*e)
        if abs(den) < 1e-15:
            if num <= margin:
                return False
            continue
        t = (margin - num) / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 >= t1:
            return False
    return t1 - t0 > 1e-12


def build_neighbor_graph(placement: Placement, subdivide: bool = True) -> NeighborGraph:
    """Nearest module and nearest boundary piece in every semi-space.

    Candidates are classified by their center (modules) or mid point
    (boundary pieces); ties on distance go to the lower id.
    """
    n = len(placement)
    k_count = placement.shape.sectors
    module_nbr = np.full((n, k_count), -1, dtype=np.int64)
    edge_nbr = np.full((n, k_count), -1, dtype=np.int64)
    if n == 0:
        return NeighborGraph(placement, module_nbr, edge_nbr, subdivide)
    c = placement.centers
    th = placement.thetas

    if n > 1:
        diff = c[None, :, :] - c[:, None, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        bearing = np.arctan2(diff[..., 1], diff[..., 0])
        sect = sector_of(placement.shape, th[:, None], bearing)
        valid = dist > 1e-12
        for k in range(k_count):
            masked = np.where((sect == k) & valid, dist, np.inf)
            best = np.argmin(masked, axis=1)
            has = np.isfinite(masked[np.arange(n), best])
            module_nbr[has, k] = best[has]

    a, b, _ = placement.edge_segments(subdivide)
    mid = 0.5 * (a + b)
    diff = mid[None, :, :] - c[:, None, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    bearing = np.arctan2(diff[..., 1], diff[..., 0])
    sect = sector_of(placement.shape, th[:, None], bearing)
    valid = dist > 1e-12
    m = len(a)
    for k in range(k_count):
        masked = np.where((sect == k) & valid, dist, np.inf)
        best = np.argmin(masked, axis=1)
        has = np.isfinite(masked[np.arange(n), best])
        edge_nbr[has, k] = best[has]
    assert m > 0
    return NeighborGraph(placement, module_nbr, edge_nbr, subdivide)


# ---------------------------------------------------------------------------
# pairwise primitives


def _contact(m_i: Module, m_j: Module) -> float:
    # m_j translates toward m_i
    return contact_distance(m_j.footprint(), m_i.footprint())


def pair_contact_distances(placement: Placement, I, J) -> np.ndarray:
    """Vectorized contact distance for module positions ``I`` and ``J``:
    the center distance at which ``J`` touches ``I`` when it slides along
    their center line.

    For triangles this is the smallest upper bound that the six side
    normals of the pair put on the slide (separating axes).
    """
    I = np.asarray(I, dtype=np.int64)
    J = np.asarray(J, dtype=np.int64)
    if not placement.shape.is_triangle:
        return np.full(len(I), 2.0 * placement.shape.size)
    if len(I) == 0:
        return np.zeros(0)
    c = placement.centers
    delta = c[J] - c[I]
    u = delta / np.hypot(delta[:, 0], delta[:, 1])[:, None]
    local = placement.footprint_vertices() - c[:, None, :]
    ang = np.concatenate([side_normal_angles(placement.thetas[I]),
                          side_normal_angles(placement.thetas[J])], axis=1)
    axes = np.stack([np.cos(ang), np.sin(ang)], axis=-1)           # (m, 6, 2)
    p_i = np.einsum("mvd,mad->mav", local[I], axes)                # (m, 6, 3)
    p_j = np.einsum("mvd,mad->mav", local[J], axes)
    un = np.einsum("md,mad->ma", u, axes)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(un > 0, (p_i.max(axis=2) - p_j.min(axis=2)) / un,
                         (p_i.min(axis=2) - p_j.max(axis=2)) / un)
    bound = np.where(np.abs(un) > 1e-15, bound, np.inf)
    return bound.min(axis=1)


def normalized_distance(m_i: Module, m_j: Module) -> float:
    """``(d / d*)**2 - 1``: negative when the pair overlaps along the
    approach line, zero at contact."""
    d = float(np.hypot(*(m_j.center - m_i.center)))
    if d <= 1e-12:
        raise ValueError("coincident module centers")
    d_star = _contact(m_i, m_j)
    return (d / d_star) ** 2 - 1.0


def normalized_distance_to_edge(m_i: Module, a, b) -> float:
    """Module-to-edge analogue of :func:`normalized_distance`, measured
    along the edge normal to its supporting line."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d_star = contact_distance_to_edge(m_i.footprint(), a, b)
    e = (b - a) / np.hypot(*(b - a))
    d = abs(e[0] * (m_i.center[1] - a[1]) - e[1] * (m_i.center[0] - a[0]))
    return (d / d_star) ** 2 - 1.0


def facing_side(m_i: Module, point) -> int:
    """Side of ``m_i`` whose outward normal best matches the direction to
    ``point``; this is the semi-space index of the point."""
    return classify_semispace(m_i, point)


def _require_mutual_triangles(m_i: Module, m_j: Module, graph: NeighborGraph | None):
    if not (m_i.shape.is_triangle and m_j.shape.is_triangle):
        raise TypeError("defined for triangular modules only")
    if graph is not None:
        p = graph.placement
        i, j = p.index_of(m_i.id), p.index_of(m_j.id)
        if not graph.mutual(i, j):
            raise ValueError(f"modules {m_i.id} and {m_j.id} are not mutual neighbours")


def angular_difference(m_i: Module, m_j: Module, graph: NeighborGraph | None = None) -> float:
    """Signed corrective rotation between the facing sides of two triangles.

    Rotating ``m_i`` by ``+delta/2`` and ``m_j`` by ``-delta/2`` makes the
    facing sides antiparallel.  Positive means ``m_i`` turns
    counter-clockwise.  Wrapped into ``(-pi/3, pi/3]``.
    """
    _require_mutual_triangles(m_i, m_j, graph)
    k_i = facing_side(m_i, m_j.center)
    k_j = facing_side(m_j, m_i.center)
    n_i = m_i.theta + THIRD_TURN * k_i - math.pi / 2
    n_j = m_j.theta + THIRD_TURN * k_j - math.pi / 2
    return wrap_third(n_j + math.pi - n_i)


def translation_offset(m_i: Module, m_j: Module, graph: NeighborGraph | None = None) -> np.ndarray:
    """Half the connector slide between the facing sides, projected on the
    unit direction of ``m_i``'s facing side."""
    _require_mutual_triangles(m_i, m_j, graph)
    s_i = SideGeometry.of(m_i)
    s_j = SideGeometry.of(m_j)
    k_i = facing_side(m_i, m_j.center)
    k_j = facing_side(m_j, m_i.center)
    e = s_i.directions[k_i]
    slide = float((s_j.midpoints[k_j] - s_i.midpoints[k_i]) @ e)
    return slide * e / 2.0


def module_ids(placement: Placement, positions: Iterable[int]) -> list[int]:
    return [int(placement.ids[p]) for p in positions]
