"""Acceptance checks.  Each test prints one PASS/FAIL line with the
measured value next to its threshold, then asserts it.

The solver-level checks run with ``configs/bench.json`` (dt 0.1, 800 steps
per phase); the library defaults (dt 0.01, 20000 steps) are far too slow
for the time budgets below.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
import shapely

from conftest import bisection_contact, hexagon, overlaps, random_convex, to_shapely
from itpla.cli import corpus_dir, corpus_files, main, run_bench
from itpla.forces import (
    ForceGains,
    distance_force,
    edge_distance_force,
    edge_influence,
    edge_moment_force,
    moment_force,
    offset_force,
)
from itpla.geometry import Disk, SimplePolygon, contact_distance
from itpla.io import load_config, load_polygon
from itpla.metrics import total_overlap
from itpla.model import ModuleShape, Placement, build_neighbor_graph, normalized_distance
from itpla.solver import SolverConfig, generate_next_placement, multi_start, with_overrides

ROOT = Path(__file__).resolve().parents[1]
BENCH_CONFIG = ROOT / "configs" / "bench.json"
TRI = ModuleShape("triangle", 1.0)


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def bench_config(**overrides) -> SolverConfig:
    return with_overrides(load_config(BENCH_CONFIG, TRI), **overrides)


@pytest.fixture(scope="module")
def bench():
    """Best-of-10 ItPla against the grid sweep on the bundled corpus."""
    polygons = [load_polygon(p) for p in corpus_files(corpus_dir())]
    cfg = bench_config(starts=10, seed=0)
    t0 = time.perf_counter()
    rows, runs = run_bench(polygons, TRI, cfg, workers=1)
    return rows, runs, time.perf_counter() - t0, cfg


def test_hexagonal_equilibrium(capsys):
    r = 1.0
    t0 = time.perf_counter()
    square = SimplePolygon([(-15, -15), (15, -15), (15, 15), (-15, 15)])
    phi = math.pi / 6
    centers = [(0.0, 0.0)] + [(2 * r * math.cos(phi + k * math.pi / 3), 2 * r * math.sin(phi + k * math.pi / 3))
                              for k in range(6)]
    shape = ModuleShape("circle", r)
    p = Placement(square, shape, np.arange(7), centers, np.zeros(7))
    cfg = SolverConfig.for_shape(shape, dt=0.01)
    first = generate_next_placement(p, cfg)
    step = np.hypot(*(first.centers - p.centers).T).max() / cfg.dt
    q = first
    for _ in range(100):
        q = generate_next_placement(q, cfg)
    drift = np.hypot(*(q.centers - p.centers).T).max()
    elapsed = time.perf_counter() - t0
    ok = step < 1e-9 * r and drift < 1e-12 * r and elapsed < 1.0
    report(capsys, "hexagonal equilibrium", ok,
           f"max translation {step:.2e} (< 1e-9 r), drift over 101 steps {drift:.2e}, {elapsed:.2f} s (< 1 s)")
    assert ok


def _families(p: Placement, gains: ForceGains):
    """The five aggregated terms of every module, evaluated from the
    primitives rather than the vectorized solver path."""
    g = build_neighbor_graph(p)
    a, b, _ = g.segments
    out = []
    for i, m in enumerate(p.modules):
        def mean(pairs):
            den = sum(w for _, w in pairs)
            return sum(v * w for v, w in pairs) / den if den > 0 else 0.0

        nbrs = []
        for j in g.module_nbr[i]:
            if j < 0:
                continue
            m_k = p.modules[int(j)]
            f, w = distance_force(m, m_k, gains)
            reach = gains.module_reach * contact_distance(m_k.footprint(), m.footprint())
            nbrs.append((f, w if np.linalg.norm(m.center - m_k.center) <= reach else 0.0))
        mutual = [p.modules[int(j)] for j in g.module_nbr[i] if j >= 0 and g.mutual(i, int(j))]
        inside = bool(p.polygon.contains(m.center[None])[0])
        edge_d, edge_t = [], []
        for e in g.edge_nbr[i]:
            if e < 0:
                continue
            k_d, k_m = edge_influence(m, a[e], b[e], gains, inside)
            f, w = edge_distance_force(m, a[e], b[e], gains, inside)
            edge_d.append((f, w * k_d))
            t, w = edge_moment_force(m, a[e], b[e], gains, inside)
            edge_t.append((t * k_m, w * k_m))
        out.append({
            "distance": np.linalg.norm(mean(nbrs)),
            "moment": abs(mean([moment_force(m, k, gains) for k in mutual])),
            "offset": np.linalg.norm(mean([offset_force(m, k, gains) for k in mutual])),
            "edge distance": np.linalg.norm(mean(edge_d)),
            "edge moment": abs(mean(edge_t)),
        })
    return out


def test_connected_pair_fixed_point(capsys):
    t0 = time.perf_counter()
    big = SimplePolygon([(-50, -50), (50, -50), (50, 50), (-50, 50)])
    p = Placement(big, TRI, [0, 1], [(0.0, 0.0), (0.0, -2 * TRI.inradius)], [0.0, math.pi])
    fams = _families(p, ForceGains())
    worst = max(max(f.values()) for f in fams)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 1.0
    report(capsys, "connected-pair fixed point", ok,
           f"largest of the five aggregates {worst:.2e} (<= 1e-9), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_exact_tiling_recovery(capsys):
    s = 1.0
    shape = ModuleShape("triangle", s)
    cfg = bench_config(starts=10, seed=0)
    t0 = time.perf_counter()
    res = multi_start(hexagon(s), shape, cfg)
    elapsed = time.perf_counter() - t0
    hits = [k for k, (pl, tr) in enumerate(zip(res.placements, res.traces))
            if len(pl) == 6 and tr.final.total_overlap <= 1e-3 * shape.area
            and tr.final.total_misplacement <= 1e-3 * s]
    ok = bool(hits) and elapsed <= 120
    report(capsys, "exact-tiling recovery", ok,
           f"{len(hits)}/10 seeds place 6 with O <= 0.001 A and M <= 0.001 s, {elapsed:.1f} s (<= 120 s)")
    assert ok


def test_baseline_dominance(capsys, bench):
    rows, _, elapsed, _ = bench
    wins = sum(r["itpla_count"] >= r["baseline_count"] for r in rows)
    bounded = all(r["itpla_count"] <= r["bound"] for r in rows)
    table = ", ".join(f"{r['polygon']} {r['itpla_count']}/{r['baseline_count']}" for r in rows)
    ok = wins >= 4 and bounded and elapsed <= 600
    report(capsys, "baseline dominance", ok,
           f"ItPla >= grid on {wins}/5 (need 4) [{table}], within bound: {bounded}, "
           f"{elapsed:.0f} s (<= 600 s)")
    assert ok


def test_count_invariants(capsys, bench):
    _, runs, _, _ = bench
    problems = [f"{name} seed {tr.seed}: {msg}" for name, items in runs.items()
                for _, tr, msgs in items for msg in msgs]
    total = sum(len(items) for items in runs.values())
    ok = not problems
    report(capsys, "upper-bound and monotone-count invariants", ok,
           f"{total} runs checked, {len(problems)} violations" + (f" ({problems[0]})" if problems else ""))
    assert ok


def _sampled_union(shapes, samples, rng):
    """Union area by sampling uniformly inside the footprints themselves:
    area(union) = sum of areas * E[1 / cover count]."""
    polys = [to_shapely(f) for f in shapes]
    areas = np.array([p.area for p in polys])
    pick = rng.choice(len(polys), size=samples, p=areas / areas.sum())
    pts = np.empty((samples, 2))
    for k, f in enumerate(shapes):
        sel = pick == k
        m = int(sel.sum())
        if isinstance(f, Disk):
            r = f.radius * np.sqrt(rng.uniform(size=m))
            t = rng.uniform(0, 2 * math.pi, m)
            pts[sel] = f.center + np.column_stack([r * np.cos(t), r * np.sin(t)])
        else:
            a, b, c = f.vertices
            u, v = rng.uniform(size=(2, m))
            flip = u + v > 1
            u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
            pts[sel] = a + np.outer(u, b - a) + np.outer(v, c - a)
    cover = sum(shapely.contains_xy(p, pts[:, 0], pts[:, 1]) for p in polys)
    return float(areas.sum() * np.mean(1.0 / np.maximum(cover, 1)))


def test_geometry_oracles(capsys):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    box = SimplePolygon([(-3, -3), (3, -3), (3, 3), (-3, 3)])

    # sign of the normalized distance against the overlap oracle
    sign_bad = checked = 0
    while checked < 1000:
        shape = TRI if checked % 2 == 0 else ModuleShape("circle", 0.5)
        c = rng.uniform(-0.8, 0.8, (2, 2))
        th = rng.uniform(0, 2 * math.pi, 2)
        pl = Placement(box, shape, np.arange(2), c, th)
        m_i, m_j = pl.modules
        try:
            dbar = normalized_distance(m_i, m_j)
        except ValueError:
            continue
        if abs(dbar) <= 1e-9:
            continue
        checked += 1
        if (dbar < 0) != overlaps(m_i.footprint(), m_j.footprint(), 1e-12):
            sign_bad += 1

    # union area against Monte Carlo
    worst_union = 0.0
    for k in range(100):
        shape = TRI if k % 2 == 0 else ModuleShape("circle", 0.5)
        n = int(rng.integers(2, 9))
        pl = Placement(box, shape, np.arange(n), rng.uniform(-1.5, 1.5, (n, 2)), rng.uniform(0, 6.3, n))
        exact = n * shape.area - total_overlap(pl)
        mc = _sampled_union(pl.footprints(), 200_000, rng)
        worst_union = max(worst_union, abs(exact - mc) / mc)

    # contact distance against bisection
    worst_contact = 0.0
    for k in range(500):
        kinds = k % 4
        a = Disk(rng.uniform(-1, 1, 2), rng.uniform(0.2, 1)) if kinds in (0, 1) else random_convex(rng)
        b = Disk(rng.uniform(-1, 1, 2), rng.uniform(0.2, 1)) if kinds in (0, 2) else random_convex(rng)
        if np.linalg.norm(a.center - b.center) < 1e-6:
            continue
        got = contact_distance(a, b)
        ref = bisection_contact(a, b)
        worst_contact = max(worst_contact, abs(got - ref) / ref)

    elapsed = time.perf_counter() - t0
    ok = sign_bad == 0 and worst_union <= 5e-3 and worst_contact <= 1e-6 and elapsed < 60
    report(capsys, "geometry oracle suite", ok,
           f"sign violations {sign_bad}/1000, union vs Monte Carlo {worst_union:.2%} (<= 0.5%), "
           f"contact vs bisection {worst_contact:.1e} (<= 1e-6), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_overlap_can_rise(capsys, bench):
    _, runs, _, cfg = bench
    rising = 0
    for placement, trace, msgs in runs["dumbbell"]:
        ov = trace.overlaps()
        if any(b > a for a, b in zip(ov, ov[1:])) and not msgs:
            rising += 1
    ok = rising >= 1
    report(capsys, "non-monotone overlap on the dumbbell", ok,
           f"{rising}/{len(runs['dumbbell'])} accepted traces show an overlap increase (need >= 1)")
    assert ok


def test_determinism(capsys, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["solve", "--polygon", "hexagon", "--config", str(BENCH_CONFIG), "--seed", "7",
              "--out", str(out)])
        outs.append(out)
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("trace.csv", "placement.json"))
    report(capsys, "determinism", same, f"trace.csv and placement.json byte-identical: {same}")
    assert same
