"""Iterative placement: per-step integration, annealed stable-placement
generation, and the outer accept-or-remove loop."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import as_dict as config_as_dict, default, resolve
from .forces import ForceGains, compute_pseudo_forces
from .geometry import SimplePolygon
from .metrics import per_module_overlaps, total_misplacement, total_overlap
from .model import ModuleShape, NeighborGraph, Placement, build_neighbor_graph, upper_bound

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.  Defaults and their meaning live in
    :mod:`itpla.config`; use :meth:`for_shape` to get module-scaled
    thresholds."""

    tau_o: float
    tau_m: float
    tau_s: float
    dt: float = default("dt")
    tau_E: int = default("tau_E")
    alpha_O: float = default("alpha_O")
    alpha_M: float = default("alpha_M")
    max_iterations: int = default("max_iterations")
    seed: int = default("seed")
    starts: int = default("starts")
    gains: ForceGains = field(default_factory=ForceGains)
    subdivide_edges: bool = default("subdivide_edges")
    max_step_fraction: float = default("max_step_fraction")
    temperature_epsilon: float = default("temperature_epsilon")
    energy_tolerance: float = default("energy_tolerance")
    connect_range: float = default("connect_range")

    def __post_init__(self):
        for name in ("tau_o", "tau_m", "tau_s", "max_step_fraction", "temperature_epsilon",
                     "connect_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt < 0:
            raise ValueError("dt must be non-negative")
        if self.energy_tolerance < 0:
            raise ValueError("energy_tolerance must be non-negative")
        if self.alpha_O < 0 or self.alpha_M < 0:
            raise ValueError("alpha weights must be non-negative")
        if int(self.tau_E) != self.tau_E or self.tau_E < 1:
            raise ValueError("tau_E must be a positive integer")
        if self.max_iterations < 1 or self.starts < 1:
            raise ValueError("max_iterations and starts must be at least 1")

    @classmethod
    def for_shape(cls, shape: ModuleShape, **overrides) -> "SolverConfig":
        """Schema defaults scaled to ``shape``, with ``overrides`` applied.
        ``gains`` may be passed as a ForceGains instance."""
        gains = overrides.pop("gains", None)
        config = resolve(shape, overrides)
        return replace(config, gains=gains) if gains is not None else config

    def score(self, overlap: float, misplacement: float) -> float:
        return self.alpha_O * overlap + self.alpha_M * misplacement

    def as_dict(self) -> dict:
        return config_as_dict(self)


@dataclass
class TraceRecord:
    iteration: int
    module_count: int
    total_overlap: float
    total_misplacement: float
    event: str


@dataclass
class RunTrace:
    seed: int
    records: list[TraceRecord] = field(default_factory=list)
    removed_ids: list[int] = field(default_factory=list)
    snapshots: list[tuple[int, Placement, int | None]] = field(default_factory=list)
    cap_phases: int = 0
    cap_degraded: bool = False
    bound: int = 0

    def add(self, iteration, placement, overlap, misplacement, event):
        self.records.append(TraceRecord(iteration, len(placement), float(overlap),
                                        float(misplacement), event))

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def counts(self) -> list[int]:
        return [r.module_count for r in self.records]

    def overlaps(self) -> list[float]:
        return [r.total_overlap for r in self.records]


@dataclass
class Candidate:
    placement: Placement
    overlap: float
    misplacement: float
    graph: NeighborGraph | None = None


@dataclass
class StableResult:
    candidates: list[Candidate]
    cap_reached: bool
    iterations: int


def generate_initial_placement(polygon: SimplePolygon, shape: ModuleShape, count: int,
                               rng: np.random.Generator) -> Placement:
    """``count`` modules with centers uniform in the polygon (rejection
    sampling over the bounding box) and orientations uniform in [0, 2*pi)."""
    if count <= 0:
        return Placement.empty(polygon, shape)
    x0, y0, x1, y1 = polygon.bounds
    centers = np.zeros((0, 2))
    while len(centers) < count:
        batch = rng.uniform((x0, y0), (x1, y1), size=(max(4 * count, 64), 2))
        centers = np.vstack([centers, batch[polygon.contains(batch)]])
    thetas = rng.uniform(0.0, 2 * math.pi, size=count)
    return Placement(polygon, shape, np.arange(count), centers[:count], thetas)


def _advance(placement: Placement, graph: NeighborGraph,
             config: SolverConfig) -> tuple[Placement, float]:
    trans, rot = compute_pseudo_forces(placement, graph, config.gains)
    step = trans * config.dt
    limit = config.max_step_fraction * placement.shape.inradius
    norm = np.hypot(step[:, 0], step[:, 1])
    over = norm > limit
    if over.any():
        step[over] *= (limit / norm[over])[:, None]
        norm = np.minimum(norm, limit)
    turn = rot * config.dt
    moved = placement.with_poses(placement.centers + step, placement.thetas + turn)
    disp = norm
    if placement.shape.is_triangle:
        disp = np.maximum(norm, placement.shape.circumradius * np.abs(turn))
    return moved, float(disp.max()) if len(disp) else 0.0


def generate_next_placement(placement: Placement, config: SolverConfig,
                            graph: NeighborGraph | None = None) -> Placement:
    """One synchronous step: forces from the input snapshot, then every
    module translated by ``force * dt`` and rotated by ``torque * dt``."""
    if graph is None:
        graph = build_neighbor_graph(placement, config.subdivide_edges)
    return _advance(placement, graph, config)[0]


def _evaluate(placement: Placement, config: SolverConfig) -> Candidate:
    graph = build_neighbor_graph(placement, config.subdivide_edges)
    return Candidate(placement, total_overlap(placement),
                     total_misplacement(placement, graph, config.connect_range), graph)


def generate_stable_placements(placement: Placement, config: SolverConfig,
                               rng: np.random.Generator | None = None,
                               trace: RunTrace | None = None,
                               iteration: int = 0) -> StableResult:
    """Iterate steps until ``tau_E`` placements are admitted.

    A step's result is admitted when the per-step displacement is below
    ``tau_s`` and the energy has stopped falling: either ``dE`` is within
    ``energy_tolerance`` of zero, or ``exp(-dE / T)`` is below a uniform
    draw, which only an increase can pass.  ``dE`` is the change of the
    weighted overlap/misplacement energy and the temperature ``T`` is the
    current energy plus a small epsilon.  If the cap is hit with nothing
    admitted, the lowest-energy placement seen is returned alone and
    ``cap_reached`` is set.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    current = _evaluate(placement, config)
    best = current
    candidates: list[Candidate] = []
    steps = 0
    for steps in range(1, config.max_iterations + 1):
        moved, disp = _advance(current.placement, current.graph, config)
        new = _evaluate(moved, config)
        d_energy = config.score(new.overlap - current.overlap,
                                new.misplacement - current.misplacement)
        temperature = config.score(current.overlap, current.misplacement) + \
            config.temperature_epsilon
        draw = rng.random()
        settled = abs(d_energy) <= config.energy_tolerance or \
            math.exp(min(-d_energy / temperature, 700.0)) < draw
        admitted = disp < config.tau_s and settled
        if admitted:
            candidates.append(new)
        if trace is not None:
            trace.add(iteration + steps, moved, new.overlap, new.misplacement,
                      "admit" if admitted else "step")
        if config.score(new.overlap, new.misplacement) < config.score(best.overlap, best.misplacement):
            best = new
        current = new
        if len(candidates) >= config.tau_E:
            break
    if not candidates:
        logger.info("iteration cap (%d) reached without a stable placement", config.max_iterations)
        return StableResult([best], True, steps)
    return StableResult(candidates, False, steps)


def select_best(candidates: Sequence, config: SolverConfig):
    """Candidate with the lowest weighted overlap + misplacement; the
    earliest wins ties."""
    if not candidates:
        raise ValueError("no candidates to select from")
    best, best_score = None, math.inf
    for cand in candidates:
        if isinstance(cand, Placement):
            cand = _evaluate(cand, config)
        s = config.score(cand.overlap, cand.misplacement)
        if s < best_score:
            best, best_score = cand, s
    return best


def removal_choice(placement: Placement, graph: NeighborGraph | None = None) -> int:
    """Id of the module to drop.

    Among modules whose own overlap is at least the mean, the one with the
    fewest neighbours; ties go to the larger overlap, then the lower id.
    """
    if len(placement) == 0:
        raise ValueError("cannot remove from an empty placement")
    if graph is None:
        graph = build_neighbor_graph(placement)
    overlaps = per_module_overlaps(placement)
    counts = graph.neighbor_counts()
    eligible = np.flatnonzero(overlaps >= overlaps.mean() - 1e-15)
    if len(eligible) == 0:
        eligible = np.arange(len(placement))
    key = sorted(eligible, key=lambda i: (counts[i], -overlaps[i], placement.ids[i]))
    return int(placement.ids[key[0]])


def remove_module(placement: Placement, config: SolverConfig | None = None,
                  graph: NeighborGraph | None = None) -> Placement:
    """Drop one module from an unacceptable placement."""
    if len(placement) == 0:
        raise ValueError("cannot remove from an empty placement")
    if config is None:
        config = SolverConfig.for_shape(placement.shape)
    if graph is None:
        graph = build_neighbor_graph(placement, config.subdivide_edges)
    overlap = total_overlap(placement)
    mis = total_misplacement(placement, graph, config.connect_range)
    if overlap <= config.tau_o and mis <= config.tau_m:
        raise ValueError("placement is already acceptable; nothing to remove")
    return placement.without(removal_choice(placement, graph))


def itpla(polygon: SimplePolygon, shape: ModuleShape, config: SolverConfig,
          seed: int | None = None, keep_snapshots: bool = True) -> tuple[Placement, RunTrace]:
    """Place as many modules as possible, removing one at a time until the
    selected stable placement is acceptable."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    bound = upper_bound(polygon, shape)
    trace = RunTrace(seed=seed, bound=bound)
    current = generate_initial_placement(polygon, shape, bound, rng)
    init = _evaluate(current, config)
    trace.add(0, current, init.overlap, init.misplacement, "init")
    if keep_snapshots:
        trace.snapshots.append((0, current, None))
    iteration = 0
    while True:
        if len(current) == 0:
            trace.add(iteration, current, 0.0, 0.0, "accept")
            return current, trace
        result = generate_stable_placements(current, config, rng, trace, iteration)
        iteration += result.iterations
        if result.cap_reached:
            trace.cap_phases += 1
        chosen = select_best(result.candidates, config)
        if chosen.overlap <= config.tau_o and chosen.misplacement <= config.tau_m:
            trace.cap_degraded = result.cap_reached
            trace.add(iteration, chosen.placement, chosen.overlap, chosen.misplacement, "accept")
            if keep_snapshots:
                trace.snapshots.append((iteration, chosen.placement, None))
            return chosen.placement, trace
        victim = removal_choice(chosen.placement, chosen.graph)
        if keep_snapshots:
            trace.snapshots.append((iteration, chosen.placement, victim))
        current = chosen.placement.without(victim)
        trace.removed_ids.append(victim)
        after = _evaluate(current, config)
        trace.add(iteration, current, after.overlap, after.misplacement, "remove")
        logger.debug("removed module %d, %d left", victim, len(current))


@dataclass
class MultiStartResult:
    placement: Placement
    traces: list[RunTrace]
    placements: list[Placement]
    best_index: int


def _run_one(args):
    polygon, shape, config, seed, keep = args
    return itpla(polygon, shape, config, seed=seed, keep_snapshots=keep)


def multi_start(polygon: SimplePolygon, shape: ModuleShape, config: SolverConfig,
                workers: int = 1, keep_snapshots: bool = False) -> MultiStartResult:
    """Run ``config.starts`` independent solves with seeds ``seed + k`` and
    keep the one with the most modules (ties: lowest weighted score, then
    lowest run index)."""
    jobs = [(polygon, shape, config, config.seed + k, keep_snapshots) for k in range(config.starts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    placements = [r[0] for r in results]
    traces = [r[1] for r in results]
    best = best_run(placements, traces, config)
    return MultiStartResult(placements[best], traces, placements, best)


def best_run(placements: Sequence[Placement], traces: Sequence[RunTrace], config: SolverConfig) -> int:
    """Index of the run with the most modules; ties go to the lowest
    weighted score of its final placement, then to the earliest run."""
    def rank(k):
        rec = traces[k].final
        return (-len(placements[k]), config.score(rec.total_overlap, rec.total_misplacement), k)

    return min(range(len(placements)), key=rank)


def with_overrides(config: SolverConfig, **kw) -> SolverConfig:
    return replace(config, **kw)
