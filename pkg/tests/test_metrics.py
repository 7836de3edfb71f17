import math

import numpy as np
import pytest

from conftest import hexagon_tiling, monte_carlo_union
from itpla.geometry import SimplePolygon, intersection_area
from itpla.metrics import (
    compute_metrics,
    coverage_ratio,
    is_acceptable,
    per_module_overlap,
    per_module_overlaps,
    total_misplacement,
    total_overlap,
)
from itpla.model import ModuleShape, Placement, build_neighbor_graph
from itpla.solver import SolverConfig

TRI = ModuleShape("triangle", 1.0)
CIRC = ModuleShape("circle", 1.0)
A = TRI.area
BOX = SimplePolygon([(-5, -5), (5, -5), (5, 5), (-5, 5)])
RIGHT_HALF = SimplePolygon([(0, -5), (5, -5), (5, 5), (0, 5)])


def place(shape, centers, thetas=None, poly=BOX):
    n = len(centers)
    thetas = np.zeros(n) if thetas is None else thetas
    return Placement(poly, shape, np.arange(n), centers, thetas)


class TestTotalOverlap:
    def test_disjoint(self):
        assert total_overlap(place(TRI, [(0, 0), (2, 0)])) == pytest.approx(0.0, abs=1e-12)

    def test_coincident(self):
        assert total_overlap(place(TRI, [(0, 0), (0, 0)])) == pytest.approx(A)

    def test_half_outside(self):
        # the median x = 0 splits the triangle in two equal halves
        assert total_overlap(place(TRI, [(0, 0)], poly=RIGHT_HALF)) == pytest.approx(0.5 * A)

    def test_circle_half_outside(self):
        assert total_overlap(place(CIRC, [(0, 0)], poly=RIGHT_HALF)) == pytest.approx(0.5 * math.pi)

    def test_empty(self):
        assert total_overlap(Placement.empty(BOX, TRI)) == 0.0

    def test_tiling(self):
        assert total_overlap(hexagon_tiling()) == pytest.approx(0.0, abs=1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(4)
        for shape in (TRI, CIRC):
            p = place(shape, rng.uniform(-4.5, 4.5, (12, 2)), rng.uniform(0, 2 * np.pi, 12))
            union = len(p) * shape.area - total_overlap(p)
            mc = monte_carlo_union(p.footprints(), BOX, 1_000_000, rng)
            assert union == pytest.approx(mc, rel=5e-3)

    def test_removal_never_increases(self):
        rng = np.random.default_rng(6)
        p = place(TRI, rng.uniform(-1, 1, (8, 2)), rng.uniform(0, 6, 8))
        base = total_overlap(p)
        for i in p.ids:
            assert total_overlap(p.without(int(i))) <= base + 1e-12


class TestPerModuleOverlap:
    def test_isolated(self):
        p = place(TRI, [(0, 0), (3, 0)])
        assert per_module_overlap(p, 0) == pytest.approx(0.0, abs=1e-12)

    def test_coincident_pair(self):
        p = place(TRI, [(1, 1), (1, 1)])
        np.testing.assert_allclose(per_module_overlaps(p), [A, A])

    def test_protrusion(self):
        p = place(TRI, [(0, 0), (3, 0)], poly=RIGHT_HALF)
        assert per_module_overlap(p, 0) == pytest.approx(0.5 * A)
        assert per_module_overlap(p, 1) == pytest.approx(0.0, abs=1e-12)

    def test_unknown_id(self):
        with pytest.raises(KeyError):
            per_module_overlap(place(TRI, [(0, 0)]), 7)

    def test_double_count_identity(self):
        p = place(TRI, [(0, 0), (0.3, 0.1)], [0.0, 0.7])
        inter = intersection_area(*p.footprints())
        assert per_module_overlaps(p).sum() == pytest.approx(total_overlap(p) + inter)

    def test_sum_bounds_total(self):
        rng = np.random.default_rng(8)
        p = place(TRI, rng.uniform(-1, 1, (6, 2)), rng.uniform(0, 6, 6))
        assert per_module_overlaps(p).sum() >= total_overlap(p) - 1e-12


class TestMisplacement:
    def test_one_slid_pair(self):
        p = place(TRI, [(0, 0), (0.4, -2 * TRI.inradius)], [0.0, math.pi])
        assert total_misplacement(p) == pytest.approx(0.2, abs=1e-12)

    def test_connected_patch(self):
        assert total_misplacement(hexagon_tiling()) == pytest.approx(0.0, abs=1e-12)

    def test_separate_patches_do_not_misplace(self):
        # same slide, but the pair sits well apart: two patches, not one
        far = place(TRI, [(0, 0), (0.4, -6 * TRI.inradius)], [0.0, math.pi])
        assert total_misplacement(far) == 0.0
        assert total_misplacement(far, connect_range=10.0) == pytest.approx(0.2, abs=1e-12)

    def test_connect_range_boundary(self):
        # face to face at 1.2 contact distances counts under the default 1.25
        p = place(TRI, [(0, 0), (0.4, -1.2 * 2 * TRI.inradius)], [0.0, math.pi])
        assert total_misplacement(p) == pytest.approx(0.2, abs=1e-12)
        assert total_misplacement(p, connect_range=1.1) == 0.0

    def test_circles(self):
        assert total_misplacement(place(CIRC, [(0, 0), (1, 0.3)])) == 0.0

    def test_rigid_motion_invariant(self):
        rng = np.random.default_rng(2)
        p = place(TRI, rng.uniform(-2, 2, (7, 2)), rng.uniform(0, 6, 7))
        phi, shift = 0.83, np.array([1.7, -0.4])
        rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        poly = SimplePolygon(BOX.vertices @ rot.T + shift)
        q = Placement(poly, TRI, p.ids, p.centers @ rot.T + shift, p.thetas + phi)
        assert total_misplacement(q) == pytest.approx(total_misplacement(p), abs=1e-9)


class TestAcceptability:
    def test_zero(self):
        p = hexagon_tiling()
        assert is_acceptable(p, None, SolverConfig.for_shape(TRI))

    def test_inclusive_overlap_threshold(self):
        p = place(TRI, [(0, 0), (0.2, 0)])
        o = total_overlap(p)
        cfg = SolverConfig.for_shape(TRI, tau_o=o, tau_m=10.0)
        assert is_acceptable(p, build_neighbor_graph(p), cfg)

    def test_misplacement_above_threshold(self):
        p = place(TRI, [(0, 0), (0.4, -2 * TRI.inradius)], [0.0, math.pi])
        cfg = SolverConfig.for_shape(TRI, tau_m=0.2 - 1e-9)
        assert not is_acceptable(p, None, cfg)


class TestSummary:
    def test_compute_metrics(self):
        p = place(TRI, [(0, 0), (0, 0)])
        m = compute_metrics(p, with_per_module=True)
        assert m.module_count == 2
        assert m.total_overlap == pytest.approx(A)
        assert m.per_module_overlap == {0: pytest.approx(A), 1: pytest.approx(A)}
        assert m.coverage_ratio == pytest.approx(A / BOX.area)

    def test_tiling_covers_hexagon(self):
        assert coverage_ratio(hexagon_tiling()) == pytest.approx(1.0)
