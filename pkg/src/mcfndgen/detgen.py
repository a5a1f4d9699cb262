"""Deterministic instance generator.

The pipeline runs three stages: build the graph and commodities, draw raw
arc parameters, then apply the two tuning rounds (per-arc overrides and
global cost/capacity multipliers).  The draw order is frozen so that a
(config, seed, stream) triple is a pure function of its inputs:

    1. topology extras: (tail, head) pairs, with re-draws on rejection
    2. commodities, one at a time (mode-dependent draws, then demand)
    3. fixed costs by arc, capacities by arc, variable costs arc-major,
       commodity bounds arc-major
    4. tuning passes, each a partial shuffle over its eligible arc list:
       zero-fix, full-capacity, zero-bound, max-bound

Adding an output format or report must never perturb this order.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, GenerationError
from .model import Commodity, DetInstance, Graph, total_volume, validate
from .prng import Pcg32

log = logging.getLogger(__name__)


class Topology(enum.Enum):
    RANDOM = "random"
    GRID = "grid"
    CIRCULAR = "circular"
    FILE = "file"


class OdMode(enum.Enum):
    SINGLE = "single"
    SHARED = "shared"
    RANDOM = "random"


# retries per requested arc before declaring the graph saturated
_ARC_RETRY_FACTOR = 100


@dataclass(frozen=True)
class GenConfig:
    """Full option surface of the deterministic generator."""

    topology: Topology = Topology.GRID
    grid_x: int = 3
    grid_y: int = 3
    node_count: int = 10
    commodity_count: int = 5
    extra_random_arcs: int = 0
    allow_parallel: bool = False
    od_mode: OdMode = OdMode.SINGLE
    src_min: int = 1
    src_max: int = 1
    snk_min: int = 1
    snk_max: int = 1
    dem_min: float = 10.0
    dem_max: float = 100.0
    fix_min: float = 50.0
    fix_max: float = 200.0
    var_min: float = 1.0
    var_max: float = 10.0
    cap_min: float = 50.0
    cap_max: float = 200.0
    bnd_min: float = 10.0
    bnd_max: float = 100.0
    cap_integer: bool = False
    bnd_integer: bool = False
    use_com_capacity: bool = False
    ratio_zero_fix: float = 0.0
    ratio_full_cap: float = 0.0
    ratio_zero_bnd: float = 0.0
    ratio_max_bnd: float = 0.0
    fix_multiplier: float = 1.0
    cap_multiplier: float = 1.0
    tune_extras_only: bool = False

    def effective_node_count(self) -> int:
        if self.topology is Topology.GRID:
            return self.grid_x * self.grid_y
        return self.node_count

    def check(self) -> None:
        """Raise ConfigError listing every invalid setting."""
        problems = []
        if self.topology is Topology.GRID:
            if self.grid_x < 1 or self.grid_y < 1:
                problems.append(f"grid dimensions must be positive, got {self.grid_x}x{self.grid_y}")
        elif self.node_count < 1:
            problems.append(f"node count must be positive, got {self.node_count}")
        if self.commodity_count < 1:
            problems.append(f"commodity count must be positive, got {self.commodity_count}")
        if self.extra_random_arcs < 0:
            problems.append("extra random arc count must be nonnegative")
        for name, lo, hi in (
            ("demand", self.dem_min, self.dem_max),
            ("fixed cost", self.fix_min, self.fix_max),
            ("variable cost", self.var_min, self.var_max),
            ("capacity", self.cap_min, self.cap_max),
            ("commodity bound", self.bnd_min, self.bnd_max),
        ):
            if lo > hi:
                problems.append(f"{name} range is empty: [{lo}, {hi}]")
            if lo < 0:
                problems.append(f"{name} range must be nonnegative, got minimum {lo}")
        for name, srange in (
            ("source", (self.src_min, self.src_max)),
            ("sink", (self.snk_min, self.snk_max)),
        ):
            if srange[0] < 1 or srange[0] > srange[1]:
                problems.append(f"{name} count range is invalid: [{srange[0]}, {srange[1]}]")
        for name, ratio in (
            ("ratio_zero_fix", self.ratio_zero_fix),
            ("ratio_full_cap", self.ratio_full_cap),
            ("ratio_zero_bnd", self.ratio_zero_bnd),
            ("ratio_max_bnd", self.ratio_max_bnd),
        ):
            if not 0.0 <= ratio <= 1.0:
                problems.append(f"{name} must be in [0, 1], got {ratio}")
        if self.fix_multiplier < 1.0:
            problems.append(f"fixed cost multiplier must be >= 1, got {self.fix_multiplier}")
        if not 0.0 < self.cap_multiplier <= 1.0:
            problems.append(f"capacity multiplier must be in (0, 1], got {self.cap_multiplier}")
        if self.od_mode is OdMode.RANDOM:
            if self.src_max + self.snk_max > self.effective_node_count():
                problems.append(
                    "source and sink sets cannot be disjoint: "
                    f"src_max + snk_max = {self.src_max + self.snk_max} exceeds "
                    f"{self.effective_node_count()} nodes"
                )
        if problems:
            raise ConfigError("; ".join(problems))


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to nearest with halves going up (15 * 0.5 -> 8)."""
    return np.floor(np.asarray(values, dtype=float) + 0.5)


def _sample_without_replacement(rng: Pcg32, pool: list[int], count: int) -> list[int]:
    """First ``count`` entries of a partial Fisher-Yates shuffle of ``pool``."""
    pool = list(pool)
    for i in range(count):
        j = rng.uniform_int(i, len(pool) - 1)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:count]


def build_topology(config: GenConfig, rng: Pcg32, graph_in: Optional[Graph] = None) -> Graph:
    """Base arcs from the configured topology plus the extra random arcs."""
    if (config.topology is Topology.FILE) != (graph_in is not None):
        raise ConfigError("a graph file is required exactly when topology is 'file'")
    arcs: list[tuple[int, int]] = []
    if config.topology is Topology.GRID:
        nx, ny = config.grid_x, config.grid_y
        n = nx * ny
        for y in range(ny):
            for x in range(nx):
                node = y * nx + x
                if x + 1 < nx:
                    arcs.append((node, node + 1))
                    arcs.append((node + 1, node))
                if y + 1 < ny:
                    arcs.append((node, node + nx))
                    arcs.append((node + nx, node))
    elif config.topology is Topology.CIRCULAR:
        n = config.node_count
        for i in range(n):
            j = (i + 1) % n
            arcs.append((i, j))
            arcs.append((j, i))
    elif config.topology is Topology.RANDOM:
        n = config.node_count
        if config.extra_random_arcs == 0:
            raise ConfigError("random topology with no random arcs yields an empty graph")
    else:
        n = graph_in.node_count
        arcs.extend(graph_in.arcs)

    requested = config.extra_random_arcs
    if not config.allow_parallel and len(arcs) + requested > n * (n - 1):
        raise GenerationError(
            f"cannot place {requested} extra arcs without parallels: "
            f"{n * (n - 1)} distinct pairs exist, {len(arcs)} already used"
        )
    existing = set(arcs) if not config.allow_parallel else None
    budget = _ARC_RETRY_FACTOR * max(requested, 1)
    added = 0
    while added < requested:
        if budget <= 0:
            raise GenerationError(
                f"random arc placement saturated after adding {added} of {requested} arcs"
            )
        budget -= 1
        tail = rng.uniform_int(0, n - 1)
        head = rng.uniform_int(0, n - 1)
        if tail == head:
            continue
        if existing is not None:
            if (tail, head) in existing:
                continue
            existing.add((tail, head))
        arcs.append((tail, head))
        added += 1
    return Graph(node_count=n, arcs=tuple(arcs), no_parallel=not config.allow_parallel)


def place_commodities(graph: Graph, config: GenConfig, rng: Pcg32) -> list[Commodity]:
    """Commodities with origins, destinations and demands per the OD mode.

    In RANDOM mode each configured commodity draws disjoint source and
    sink sets and expands into one sub-commodity per (source, sink) pair,
    its demand split equally, so the configured count is pre-expansion.
    """
    n = graph.node_count
    if n < 2:
        raise ConfigError("commodity placement requires at least two nodes")

    def draw_pair() -> tuple[int, int]:
        origin = rng.uniform_int(0, n - 1)
        dest = rng.uniform_int(0, n - 1)
        while dest == origin:
            dest = rng.uniform_int(0, n - 1)
        return origin, dest

    commodities: list[Commodity] = []
    if config.od_mode is OdMode.SINGLE:
        for _ in range(config.commodity_count):
            origin, dest = draw_pair()
            demand = rng.uniform_real(config.dem_min, config.dem_max)
            commodities.append(Commodity(origin, dest, demand))
    elif config.od_mode is OdMode.SHARED:
        origin, dest = draw_pair()
        for _ in range(config.commodity_count):
            demand = rng.uniform_real(config.dem_min, config.dem_max)
            commodities.append(Commodity(origin, dest, demand))
    else:
        if config.src_max + config.snk_max > n:
            raise ConfigError(
                f"cannot draw {config.src_max} sources and {config.snk_max} sinks "
                f"as disjoint sets from {n} nodes"
            )
        nodes = list(range(n))
        for _ in range(config.commodity_count):
            n_src = rng.uniform_int(config.src_min, config.src_max)
            n_snk = rng.uniform_int(config.snk_min, config.snk_max)
            picked = _sample_without_replacement(rng, nodes, n_src + n_snk)
            sources, sinks = picked[:n_src], picked[n_src:]
            demand = rng.uniform_real(config.dem_min, config.dem_max)
            share = demand / (n_src * n_snk)
            for src in sources:
                for snk in sinks:
                    commodities.append(Commodity(src, snk, share))
    return commodities


def sample_arc_parameters(
    graph: Graph, commodities: list[Commodity], config: GenConfig, rng: Pcg32
) -> DetInstance:
    """Draw fixed costs, capacities, routing costs and optional bounds."""
    n_a, n_k = graph.arc_count, len(commodities)
    fixed = rng.uniform_real_array(config.fix_min, config.fix_max, n_a)
    capacity = rng.uniform_real_array(config.cap_min, config.cap_max, n_a)
    var_cost = rng.uniform_real_array(config.var_min, config.var_max, n_a * n_k).reshape(n_a, n_k)
    com_capacity = None
    if config.use_com_capacity:
        com_capacity = rng.uniform_real_array(config.bnd_min, config.bnd_max, n_a * n_k)
        com_capacity = com_capacity.reshape(n_a, n_k)
        if config.bnd_integer:
            com_capacity = round_half_up(com_capacity)
    if config.cap_integer:
        capacity = round_half_up(capacity)
    return DetInstance(
        graph=graph,
        commodities=tuple(commodities),
        fixed_cost=fixed,
        capacity=capacity,
        var_cost=var_cost,
        com_capacity=com_capacity,
        use_com_capacity=config.use_com_capacity,
    )


def tune_random_arcs(instance: DetInstance, config: GenConfig, rng: Pcg32) -> DetInstance:
    """Per-arc overrides: zero fixed costs, full capacities, bound extremes.

    Each pass independently draws its own arcs (without replacement) from
    the eligible set: all arcs, or only the trailing extra random arcs
    when ``tune_extras_only`` is set.
    """
    n_a = instance.arc_count
    if config.tune_extras_only:
        eligible = list(range(n_a - config.extra_random_arcs, n_a))
    else:
        eligible = list(range(n_a))

    fixed = np.array(instance.fixed_cost)
    capacity = np.array(instance.capacity)
    com_capacity = None if instance.com_capacity is None else np.array(instance.com_capacity)
    volume = total_volume(instance)

    def pick(ratio: float) -> list[int]:
        count = int(ratio * len(eligible))
        return _sample_without_replacement(rng, eligible, count)

    fixed[pick(config.ratio_zero_fix)] = 0.0
    capacity[pick(config.ratio_full_cap)] = volume
    for ratio, value_from in (
        (config.ratio_zero_bnd, None),
        (config.ratio_max_bnd, capacity),
    ):
        if ratio == 0.0:
            continue
        if not instance.use_com_capacity:
            log.warning("commodity-bound tuning requested but bounds are disabled; skipping")
            continue
        chosen = pick(ratio)
        if value_from is None:
            com_capacity[chosen, :] = 0.0
        else:
            com_capacity[chosen, :] = value_from[chosen, None]
    return replace(
        instance, fixed_cost=fixed, capacity=capacity, com_capacity=com_capacity
    )


def tune_design_flow(instance: DetInstance, config: GenConfig) -> DetInstance:
    """Scale fixed costs up and capacities down, re-rounding integers."""
    if config.fix_multiplier < 1.0:
        raise ConfigError(f"fixed cost multiplier must be >= 1, got {config.fix_multiplier}")
    if not 0.0 < config.cap_multiplier <= 1.0:
        raise ConfigError(f"capacity multiplier must be in (0, 1], got {config.cap_multiplier}")
    fixed = instance.fixed_cost * config.fix_multiplier
    capacity = instance.capacity * config.cap_multiplier
    if config.cap_integer:
        capacity = round_half_up(capacity)
    return replace(instance, fixed_cost=fixed, capacity=capacity)


def generate(config: GenConfig, rng: Pcg32, graph_in: Optional[Graph] = None) -> DetInstance:
    """Run the full pipeline and return a validated instance."""
    config.check()
    graph = build_topology(config, rng, graph_in)
    commodities = place_commodities(graph, config, rng)
    instance = sample_arc_parameters(graph, commodities, config, rng)
    instance = tune_random_arcs(instance, config, rng)
    instance = tune_design_flow(instance, config)
    violations = validate(instance)
    if violations:
        raise GenerationError("generated instance failed validation: " + "; ".join(violations))
    return instance
