"""Placement quality: overlap, misplacement, acceptability, coverage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import polygons_union_clipped, union_area_clipped
from .config import default
from .model import (THIRD_TURN, NeighborGraph, Placement, build_neighbor_graph,
                    pair_contact_distances, sector_of)


@dataclass(frozen=True)
class PlacementMetrics:
    total_overlap: float
    total_misplacement: float
    module_count: int
    per_module_overlap: dict = field(default_factory=dict)
    coverage_ratio: float = 0.0


def _union_area(placement: Placement, keep: np.ndarray | None = None) -> float:
    if keep is None:
        keep = np.ones(len(placement), dtype=bool)
    if not keep.any():
        return 0.0
    if placement.shape.is_triangle:
        return polygons_union_clipped(placement.footprint_vertices()[keep], placement.polygon)
    feet = [f for f, k in zip(placement.footprints(), keep) if k]
    return union_area_clipped(feet, placement.polygon)


def total_overlap(placement: Placement) -> float:
    """Module area not covered exactly once inside the polygon: mutual
    overlaps plus protrusion beyond the boundary."""
    n = len(placement)
    if n == 0:
        return 0.0
    value = n * placement.shape.area - _union_area(placement)
    return max(value, 0.0)


def per_module_overlaps(placement: Placement) -> np.ndarray:
    """For every module, the part of its area outside the polygon or shared
    with any other module."""
    n = len(placement)
    if n == 0:
        return np.zeros(0)
    full = _union_area(placement)
    out = np.empty(n)
    for i in range(n):
        keep = np.ones(n, dtype=bool)
        keep[i] = False
        exclusive = full - _union_area(placement, keep)
        out[i] = max(placement.shape.area - exclusive, 0.0)
    return out


def per_module_overlap(placement: Placement, module_id: int) -> float:
    i = placement.index_of(module_id)
    return float(per_module_overlaps(placement)[i])


def total_misplacement(placement: Placement, graph: NeighborGraph | None = None,
                       connect_range: float = default("connect_range")) -> float:
    """Half the summed connector offsets over connected mutual-neighbour pairs.

    A mutual pair counts as connected when its center distance is within
    ``connect_range`` contact distances; modules of separate patches do
    not misplace each other.  Each ordered pair contributes half its
    connector slide, so a single pair contributes half the slide overall.
    Circles never misplace.
    """
    if not placement.shape.is_triangle or len(placement) < 2:
        return 0.0
    if graph is None:
        graph = build_neighbor_graph(placement)
    rows, cols = np.nonzero(graph.mutual_mask)
    if len(rows) == 0:
        return 0.0
    J = graph.module_nbr[rows, cols]
    d = np.hypot(*(placement.centers[rows] - placement.centers[J]).T)
    near = d <= connect_range * pair_contact_distances(placement, rows, J)
    rows, cols = rows[near], cols[near]
    c = placement.centers
    th = placement.thetas
    I, J = rows, graph.module_nbr[rows, cols]
    back = c[I] - c[J]
    k_j = sector_of(placement.shape, th[J], np.arctan2(back[:, 1], back[:, 0]))
    a_i = th[I] + THIRD_TURN * cols - math.pi / 2
    a_j = th[J] + THIRD_TURN * k_j - math.pi / 2
    r_in = placement.shape.inradius
    gap = (c[J] + r_in * np.column_stack([np.cos(a_j), np.sin(a_j)])) - \
          (c[I] + r_in * np.column_stack([np.cos(a_i), np.sin(a_i)]))
    e_i = np.column_stack([-np.sin(a_i), np.cos(a_i)])
    slide = np.abs(np.einsum("ij,ij->i", gap, e_i))
    return 0.5 * float(np.sum(slide / 2.0))


def is_acceptable(placement: Placement, graph: NeighborGraph | None, config) -> bool:
    overlap = total_overlap(placement)
    misplacement = total_misplacement(placement, graph, config.connect_range)
    return overlap <= config.tau_o and misplacement <= config.tau_m


def coverage_ratio(placement: Placement, overlap: float | None = None) -> float:
    if overlap is None:
        overlap = total_overlap(placement)
    covered = len(placement) * placement.shape.area - overlap
    return max(0.0, covered / placement.polygon.area)


def compute_metrics(placement: Placement, graph: NeighborGraph | None = None,
                    with_per_module: bool = False) -> PlacementMetrics:
    overlap = total_overlap(placement)
    mis = total_misplacement(placement, graph)
    per = {}
    if with_per_module:
        per = {int(i): float(v) for i, v in zip(placement.ids, per_module_overlaps(placement))}
    return PlacementMetrics(overlap, mis, len(placement), per, coverage_ratio(placement, overlap))
