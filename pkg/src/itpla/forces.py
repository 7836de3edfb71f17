"""Pseudo-forces acting on modules.

Five families: centre distance, facing-side moment and connector offset
between neighbouring modules, and distance and moment from boundary
pieces.  Each family is reduced to a weighted mean per module; translation
is the sum of the three translational means and rotation the sum of the two
rotational ones.

The per-pair functions are the reference definitions.  The solver uses
:func:`compute_pseudo_forces`, a vectorized equivalent over a whole
placement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import default
from .geometry import (
    closest_point_on_segment,
    contact_distance,
    ray_exit_points,
    segment_contact_distance,
)
from .model import (
    THIRD_TURN,
    Module,
    NeighborGraph,
    Placement,
    SideGeometry,
    angular_difference,
    facing_side,
    pair_contact_distances,
    sector_of,
    translation_offset,
    wrap_third,
)

_WEIGHT_CAP = 1e12


@dataclass(frozen=True)
class ForceGains:
    """Gains, weight exponent and boundary/neighbour ranges.  Defaults and
    their meaning live in :mod:`itpla.config`."""

    chi_d: float = default("chi_d")
    chi_tau: float = default("chi_tau")
    chi_T: float = default("chi_T")
    chi_Pd: float = default("chi_Pd")
    chi_Ptau: float = default("chi_Ptau")
    n: int = default("n")
    weight_epsilon: float = default("weight_epsilon")
    edge_range: float = default("edge_range")
    edge_fade: float = default("edge_fade")
    edge_moment_range: float = default("edge_moment_range")
    edge_moment_gate: float = default("edge_moment_gate")
    edge_moment_cutoff: float = default("edge_moment_cutoff")
    module_range: float | None = default("module_range")

    def __post_init__(self):
        for name in ("chi_d", "chi_tau", "chi_T", "chi_Pd", "chi_Ptau", "weight_epsilon",
                     "edge_range", "edge_fade", "edge_moment_gate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.module_range is not None and not self.module_range > 0:
            raise ValueError("module_range must be positive or None")
        if not self.edge_moment_range > 1:
            raise ValueError("edge_moment_range must exceed 1")
        if not self.edge_moment_cutoff > self.edge_moment_gate:
            raise ValueError("edge_moment_cutoff must exceed edge_moment_gate")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def module_reach(self) -> float:
        return math.inf if self.module_range is None else self.module_range


@dataclass(frozen=True)
class PseudoForce:
    translation: np.ndarray
    rotation: float

    @classmethod
    def zero(cls) -> "PseudoForce":
        return cls(np.zeros(2), 0.0)


def distance_force(m_i: Module, m_k: Module, gains: ForceGains) -> tuple[np.ndarray, float]:
    """Attraction or repulsion on ``m_i`` along the centre line, and its weight."""
    delta = m_i.center - m_k.center
    d = math.hypot(delta[0], delta[1])
    if d <= 1e-12:
        raise ValueError("coincident module centers")
    d_star = contact_distance(m_k.footprint(), m_i.footprint())
    dbar = (d / d_star) ** 2 - 1.0
    u = delta / d
    return -gains.chi_d * dbar * u, (d_star / d) ** gains.n


def moment_force(m_i: Module, m_k: Module, gains: ForceGains,
                 graph: NeighborGraph | None = None) -> tuple[float, float]:
    if not (m_i.shape.is_triangle and m_k.shape.is_triangle):
        return 0.0, 0.0
    delta = angular_difference(m_i, m_k, graph)
    return gains.chi_tau * delta / 2.0, delta * delta + gains.weight_epsilon


def offset_force(m_i: Module, m_k: Module, gains: ForceGains,
                 graph: NeighborGraph | None = None) -> tuple[np.ndarray, float]:
    if not (m_i.shape.is_triangle and m_k.shape.is_triangle):
        return np.zeros(2), 0.0
    dt = translation_offset(m_i, m_k, graph)
    return gains.chi_T * dt / 2.0, float(dt @ dt) + gains.weight_epsilon


def _edge_frame(m_i: Module, a, b, inside: bool | None):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q, _ = closest_point_on_segment(m_i.center, a, b)
    delta = m_i.center - q
    dist = math.hypot(delta[0], delta[1])
    e = (b - a) / math.hypot(*(b - a))
    inward = np.array([-e[1], e[0]])
    if inside is None:
        inside = float((m_i.center - a) @ inward) > 0
    return q, dist, inward, inside


def edge_distance_force(m_i: Module, a, b, gains: ForceGains,
                        inside: bool | None = None) -> tuple[np.ndarray, float]:
    """Boundary push or pull on ``m_i`` from segment ``ab`` and its weight.

    Direction is along the line from the closest point of the segment to
    the module center (the edge normal for interior feet).  ``inside`` tells
    whether the center lies inside the polygon; by default the left side of
    the directed edge is taken as inside.  A center outside is always
    pushed back toward the segment.  No range limit is applied here; see
    :func:`edge_influence`.
    """
    q, dist, inward, inside = _edge_frame(m_i, a, b, inside)
    if dist <= 1e-12:
        return gains.chi_Pd * inward, _WEIGHT_CAP
    u = (m_i.center - q) / dist
    d_star = segment_contact_distance(m_i.footprint(), a, b)
    weight = min((d_star / dist) ** gains.n, _WEIGHT_CAP)
    if inside:
        dbar = (dist / d_star) ** 2 - 1.0
        return -gains.chi_Pd * dbar * u, weight
    return -gains.chi_Pd * (1.0 + (dist / d_star) ** 2) * u, weight


def edge_moment_force(m_i: Module, a, b, gains: ForceGains,
                      inside: bool | None = None) -> tuple[float, float]:
    """Rotation turning ``m_i``'s nearest side parallel to segment ``ab``.

    The whole correction goes to the module.  How strongly the term counts
    in the aggregate depends on distance and angle; see
    :func:`edge_influence`.
    """
    if not m_i.shape.is_triangle:
        return 0.0, 0.0
    delta = _edge_misalignment(m_i, a, b)
    return gains.chi_Ptau * delta, delta * delta + gains.weight_epsilon


def _edge_misalignment(m_i: Module, a, b) -> float:
    e = (np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
    outward = math.atan2(-e[0], e[1])
    return float(wrap_third(outward - (m_i.theta - math.pi / 2)))


def _fade(x, full, zero):
    """1 up to ``full``, 0 from ``zero`` on, linear in between."""
    return np.clip((zero - x) / (zero - full), 0.0, 1.0)


def _influence(ratio, near, misalignment, gains: ForceGains):
    """Distance and moment factors for boundary terms; ``near`` marks
    centers outside the polygon or on the segment, which always count."""
    k_d = np.where(near, 1.0, _fade(ratio, gains.edge_range - gains.edge_fade, gains.edge_range))
    k_m = np.where(near, 1.0, _fade(ratio, 1.0, gains.edge_moment_range))
    k_m = k_m * _fade(np.abs(misalignment), gains.edge_moment_gate, gains.edge_moment_cutoff)
    return k_d, k_m


def edge_influence(m_i: Module, a, b, gains: ForceGains,
                   inside: bool | None = None) -> tuple[float, float]:
    """Factors in [0, 1] scaling the boundary distance term and the
    boundary moment term of segment ``ab`` on ``m_i``.

    The distance factor scales the weight only (the value itself is zero
    at contact); the moment factor scales both, so moments fade in and out
    of the weighted mean continuously.  Distance terms vanish beyond
    ``edge_range`` contact distances; moments act in full up to contact
    and vanish by ``edge_moment_range``, and also vanish as the nearest
    side turns from parallel to corner-on.
    """
    _, dist, _, inside = _edge_frame(m_i, a, b, inside)
    near = (not inside) or dist <= 1e-12
    ratio = 0.0 if near else dist / segment_contact_distance(m_i.footprint(), a, b)
    k_d, k_m = _influence(ratio, near, _edge_misalignment(m_i, a, b), gains)
    return float(k_d), float(k_m)


def _mean(pairs):
    num = None
    den = 0.0
    for value, weight in pairs:
        if weight <= 0:
            continue
        num = value * weight if num is None else num + value * weight
        den += weight
    return num / den if den > 0 else None


def aggregate(m_i: Module, graph: NeighborGraph, gains: ForceGains) -> PseudoForce:
    """Total pseudo-force on one module (reference, per-pair evaluation)."""
    p = graph.placement
    i = p.index_of(m_i.id)
    tri = p.shape.is_triangle
    dist_terms, moment_terms, offset_terms = [], [], []
    for j in graph.module_nbr[i]:
        if j < 0:
            continue
        m_k = p.module(int(p.ids[j]))
        f, w = distance_force(m_i, m_k, gains)
        if np.linalg.norm(m_i.center - m_k.center) > gains.module_reach * \
                contact_distance(m_k.footprint(), m_i.footprint()):
            w = 0.0
        dist_terms.append((f, w))
        if tri and graph.mutual(i, int(j)):
            moment_terms.append(moment_force(m_i, m_k, gains))
            offset_terms.append(offset_force(m_i, m_k, gains))
    a, b, _ = graph.segments
    inside = bool(p.polygon.contains(m_i.center[None])[0])
    edge_terms, edge_moments = [], []
    for e in graph.edge_nbr[i]:
        if e < 0:
            continue
        k_d, k_m = edge_influence(m_i, a[e], b[e], gains, inside)
        f, w = edge_distance_force(m_i, a[e], b[e], gains, inside)
        edge_terms.append((f, w * k_d))
        if tri:
            t, w = edge_moment_force(m_i, a[e], b[e], gains, inside)
            edge_moments.append((t * k_m, w * k_m))
    translation = np.zeros(2)
    for part in (_mean(dist_terms), _mean(offset_terms), _mean(edge_terms)):
        if part is not None:
            translation = translation + part
    rotation = 0.0
    for part in (_mean(moment_terms), _mean(edge_moments)):
        if part is not None:
            rotation += float(part)
    return PseudoForce(translation, rotation)


def _weighted_mean(index, values, weights, n):
    den = np.bincount(index, weights=weights, minlength=n)
    if values.ndim == 1:
        num = np.bincount(index, weights=values * weights, minlength=n)
    else:
        num = np.column_stack([np.bincount(index, weights=values[:, d] * weights, minlength=n)
                               for d in range(values.shape[1])])
        den = den[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def compute_pseudo_forces(placement: Placement, graph: NeighborGraph,
                          gains: ForceGains) -> tuple[np.ndarray, np.ndarray]:
    """Translation ``(n, 2)`` and rotation ``(n,)`` for every module."""
    n = len(placement)
    trans = np.zeros((n, 2))
    rot = np.zeros(n)
    if n == 0:
        return trans, rot
    shape = placement.shape
    tri = shape.is_triangle
    c = placement.centers
    th = placement.thetas

    rows, cols = np.nonzero(graph.module_nbr >= 0)
    if len(rows):
        I = rows
        J = graph.module_nbr[rows, cols]
        delta = c[I] - c[J]
        d = np.hypot(delta[:, 0], delta[:, 1])
        u = delta / d[:, None]
        d_star = pair_contact_distances(placement, I, J)
        dbar = (d / d_star) ** 2 - 1.0
        f = -gains.chi_d * dbar[:, None] * u
        w = np.where(d <= gains.module_reach * d_star, (d_star / d) ** gains.n, 0.0)
        trans += _weighted_mean(I, f, w, n)

        mutual = graph.mutual_mask[rows, cols]
        if tri and mutual.any():
            I, J, k_i = I[mutual], J[mutual], cols[mutual]
            back = c[I] - c[J]
            k_j = sector_of(shape, th[J], np.arctan2(back[:, 1], back[:, 0]))
            a_i = th[I] + THIRD_TURN * k_i - math.pi / 2
            a_j = th[J] + THIRD_TURN * k_j - math.pi / 2
            dtheta = wrap_third(a_j + math.pi - a_i)
            rot += _weighted_mean(I, gains.chi_tau * dtheta / 2.0,
                                  dtheta ** 2 + gains.weight_epsilon, n)
            r_in = shape.inradius
            n_i = np.column_stack([np.cos(a_i), np.sin(a_i)])
            n_j = np.column_stack([np.cos(a_j), np.sin(a_j)])
            e_i = np.column_stack([-n_i[:, 1], n_i[:, 0]])
            gap = (c[J] + r_in * n_j) - (c[I] + r_in * n_i)
            slide = np.einsum("ij,ij->i", gap, e_i)
            dT = slide[:, None] * e_i / 2.0
            trans += _weighted_mean(I, gains.chi_T * dT / 2.0,
                                    slide ** 2 / 4.0 + gains.weight_epsilon, n)

    rows, cols = np.nonzero(graph.edge_nbr >= 0)
    if len(rows):
        I = rows
        E = graph.edge_nbr[rows, cols]
        sa, sb, _ = graph.segments
        a, b = sa[E], sb[E]
        seg = b - a
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        t = np.clip(np.einsum("ij,ij->i", c[I] - a, seg) / seg_len ** 2, 0.0, 1.0)
        q = a + t[:, None] * seg
        delta = c[I] - q
        dist = np.hypot(delta[:, 0], delta[:, 1])
        inward = np.column_stack([-seg[:, 1], seg[:, 0]]) / seg_len[:, None]
        zero = dist <= 1e-12
        u = np.where(zero[:, None], inward, delta / np.where(zero, 1.0, dist)[:, None])
        inside_mod = placement.polygon.contains(c)
        inside = inside_mod[I]

        if tri:
            local = placement.footprint_vertices() - c[:, None, :]
            d_star = np.max(np.einsum("mkd,md->mk", local[I], -u), axis=1)
            endpoint = ~((t > 1e-12) & (t < 1 - 1e-12)) & ~zero
            if endpoint.any():
                ends = np.stack([a[endpoint], b[endpoint]], axis=1)
                pts = (ends[:, :, None, :] - local[I[endpoint]][:, None, :, :]).reshape(-1, 6, 2)
                d_star[endpoint] = ray_exit_points(q[endpoint], u[endpoint], pts)
        else:
            d_star = np.full(len(I), float(shape.size))

        ratio = np.where(zero, 0.0, dist / d_star)
        near = ~inside | zero
        outward = -inward
        dtheta = wrap_third(np.arctan2(outward[:, 1], outward[:, 0]) - (th[I] - math.pi / 2))
        k_d, k_m = _influence(ratio, near, dtheta, gains)
        magnitude = np.where(inside | zero, -(ratio ** 2 - 1.0), 1.0 + ratio ** 2)
        # inside: -chi*dbar along u; outside: push toward the segment (-u)
        f = gains.chi_Pd * np.where((inside | zero)[:, None], magnitude[:, None] * u,
                                    -magnitude[:, None] * u)
        with np.errstate(divide="ignore"):
            w = np.minimum((d_star / np.where(zero, 1.0, dist)) ** gains.n, _WEIGHT_CAP)
        w = np.where(zero, _WEIGHT_CAP, w)
        trans += _weighted_mean(I, f, w * k_d, n)

        if tri:
            w_m = (dtheta ** 2 + gains.weight_epsilon) * k_m
            rot += _weighted_mean(I, gains.chi_Ptau * dtheta * k_m, w_m, n)
    return trans, rot


def aggregate_all(placement: Placement, graph: NeighborGraph, gains: ForceGains) -> list[PseudoForce]:
    trans, rot = compute_pseudo_forces(placement, graph, gains)
    return [PseudoForce(trans[i], float(rot[i])) for i in range(len(placement))]


__all__ = [
    "ForceGains",
    "PseudoForce",
    "distance_force",
    "moment_force",
    "offset_force",
    "edge_distance_force",
    "edge_moment_force",
    "edge_influence",
    "aggregate",
    "aggregate_all",
    "compute_pseudo_forces",
    "facing_side",
    "SideGeometry",
]
