"""Shared fixtures and independent oracles.

The oracles deliberately avoid the package's own geometry: contact
distances come from bisection over a shapely intersection predicate and
areas from Monte Carlo sampling.
"""

import math

import numpy as np
import pytest
import shapely

from itpla.geometry import ConvexPolygon, Disk, SimplePolygon
from itpla.model import ModuleShape, Placement

SQRT3 = math.sqrt(3.0)


def hexagon(side: float = 1.0) -> SimplePolygon:
    return SimplePolygon([(side * math.cos(k * math.pi / 3), side * math.sin(k * math.pi / 3))
                          for k in range(6)], name="hexagon")


def hexagon_tiling(side: float = 1.0) -> Placement:
    """The six triangles of side ``side`` that tile the regular hexagon."""
    poly = hexagon(side)
    v = poly.vertices
    centers = np.array([(v[k] + v[(k + 1) % 6]) / 3.0 for k in range(6)])
    thetas = np.arctan2(centers[:, 1], centers[:, 0]) + math.pi / 2
    return Placement(poly, ModuleShape("triangle", side), np.arange(6), centers, thetas)


def to_shapely(shape):
    if isinstance(shape, Disk):
        return shapely.Point(shape.center).buffer(shape.radius, quad_segs=256)
    return shapely.Polygon(shape.vertices)


def overlaps(a, b, tol: float = 0.0) -> bool:
    """Interiors intersect (by positive intersection area)."""
    return to_shapely(a).intersection(to_shapely(b)).area > tol


def bisection_contact(mover, target, iterations: int = 80) -> float:
    """Center distance at which ``mover`` first touches ``target`` when it
    slides along the center line; bisection on a shapely overlap test.

    Disks use an exact distance test instead of a polygonized circle.
    """
    u = mover.center - target.center
    u = u / np.linalg.norm(u)

    def hit(t: float) -> bool:
        c = target.center + t * u
        if isinstance(mover, Disk) and isinstance(target, Disk):
            return np.linalg.norm(c - target.center) < mover.radius + target.radius
        if isinstance(mover, Disk):
            return shapely.Polygon(target.vertices).distance(shapely.Point(c)) < mover.radius \
                or shapely.Polygon(target.vertices).contains(shapely.Point(c))
        moved = shapely.Polygon(mover.vertices - mover.center + c)
        if isinstance(target, Disk):
            return moved.distance(shapely.Point(target.center)) < target.radius \
                or moved.contains(shapely.Point(target.center))
        return moved.intersection(shapely.Polygon(target.vertices)).area > 0

    lo, hi = 0.0, 1.0
    while hit(hi):
        hi *= 2
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if hit(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def monte_carlo_union(shapes, clip: SimplePolygon, samples: int, rng) -> float:
    """Area of ``union(shapes) & clip`` by uniform sampling of the clip box."""
    x0, y0, x1, y1 = clip.bounds
    pts = rng.uniform((x0, y0), (x1, y1), size=(samples, 2))
    region = shapely.union_all([to_shapely(s) for s in shapes]).intersection(shapely.Polygon(clip.vertices))
    shapely.prepare(region)
    hits = shapely.contains_xy(region, pts[:, 0], pts[:, 1])
    return float(hits.mean()) * (x1 - x0) * (y1 - y0)


def random_triangle(rng, scale: float = 1.0) -> ConvexPolygon:
    c = rng.uniform(-1, 1, 2)
    t = rng.uniform(0, 2 * math.pi)
    s = scale * rng.uniform(0.5, 1.5)
    ang = t + 2 * math.pi / 3 * np.arange(3) - math.pi / 6
    return ConvexPolygon(c + s / SQRT3 * np.column_stack([np.cos(ang), np.sin(ang)]), center=c)


def random_convex(rng) -> ConvexPolygon:
    """Random convex polygon (hull of 3..8 points), centered at its centroid."""
    while True:
        k = rng.integers(3, 9)
        pts = rng.uniform(-1, 1, size=(k, 2)) * rng.uniform(0.3, 1.2, 2)
        hull = shapely.MultiPoint(pts).convex_hull
        if hull.geom_type == "Polygon" and hull.area > 0.05:
            v = np.asarray(hull.exterior.coords)[:-1]
            c = np.asarray(hull.centroid.coords[0])
            shift = rng.uniform(-2, 2, 2)
            return ConvexPolygon(v + shift, center=c + shift)


@pytest.fixture
def hex_polygon():
    return hexagon()


@pytest.fixture
def tri():
    return ModuleShape("triangle", 1.0)


@pytest.fixture
def circ():
    return ModuleShape("circle", 1.0)


@pytest.fixture
def big_square():
    return SimplePolygon([(-50, -50), (50, -50), (50, 50), (-50, 50)], name="square")
