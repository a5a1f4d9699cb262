"""Data model for deterministic and scenario-based network design instances.

An instance is a directed graph with per-arc fixed costs and capacities,
a set of origin-destination commodities with demands, per-(arc, commodity)
routing costs and, optionally, per-(arc, commodity) flow bounds.

The module also fixes the canonical flattening of randomizable parameters
into a single indexed vector.  Every file format and the scenario engine
share this ordering:

    1. demands, by commodity index
    2. arc capacities, by arc index
    3. commodity capacities, by (arc, commodity) lexicographic
    4. fixed costs, by arc index
    5. variable costs, by (arc, commodity) lexicographic

All types are immutable after construction and all operations are pure.
Node and arc indices are 0-based in memory; file codecs convert to the
1-based convention at the boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import ConfigError


class ParamFamily(enum.IntFlag):
    """Randomizable parameter families; values double as CLI mask bits."""

    DEMAND = 1
    ARC_CAPACITY = 2
    COM_CAPACITY = 4
    FIXED_COST = 8
    VAR_COST = 16


# family order used by the canonical flattening
CANONICAL_FAMILY_ORDER = (
    ParamFamily.DEMAND,
    ParamFamily.ARC_CAPACITY,
    ParamFamily.COM_CAPACITY,
    ParamFamily.FIXED_COST,
    ParamFamily.VAR_COST,
)

FAMILY_CODES = {
    ParamFamily.DEMAND: "D",
    ParamFamily.ARC_CAPACITY: "A",
    ParamFamily.COM_CAPACITY: "B",
    ParamFamily.FIXED_COST: "F",
    ParamFamily.VAR_COST: "C",
}
CODE_FAMILIES = {code: fam for fam, code in FAMILY_CODES.items()}


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """Directed graph; the arc index is the position in ``arcs``.

    ``no_parallel`` records whether duplicate (tail, head) pairs were
    forbidden when the graph was built, so validation can re-check it.
    """

    node_count: int
    arcs: tuple[tuple[int, int], ...]
    no_parallel: bool = False

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple((int(t), int(h)) for t, h in self.arcs))

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    @cached_property
    def tails(self) -> np.ndarray:
        return _frozen_array([a[0] for a in self.arcs]).astype(int)

    @cached_property
    def heads(self) -> np.ndarray:
        return _frozen_array([a[1] for a in self.arcs]).astype(int)


@dataclass(frozen=True)
class Commodity:
    origin: int
    destination: int
    demand: float


@dataclass(frozen=True, eq=False)
class DetInstance:
    """A complete deterministic instance.

    ``var_cost`` and ``com_capacity`` are (arc, commodity)-shaped;
    ``com_capacity`` may be ``None`` when per-commodity bounds are off.
    Equality is exact, field by field.
    """

    graph: Graph
    commodities: tuple[Commodity, ...]
    fixed_cost: np.ndarray
    capacity: np.ndarray
    var_cost: np.ndarray
    com_capacity: Optional[np.ndarray] = None
    use_com_capacity: bool = False

    def __eq__(self, other) -> bool:
        if not isinstance(other, DetInstance):
            return NotImplemented
        if self.com_capacity is None or other.com_capacity is None:
            bounds_equal = (self.com_capacity is None) == (other.com_capacity is None)
        else:
            bounds_equal = np.array_equal(self.com_capacity, other.com_capacity)
        return (
            self.graph == other.graph
            and self.commodities == other.commodities
            and np.array_equal(self.fixed_cost, other.fixed_cost)
            and np.array_equal(self.capacity, other.capacity)
            and np.array_equal(self.var_cost, other.var_cost)
            and bounds_equal
            and self.use_com_capacity == other.use_com_capacity
        )

    def __post_init__(self):
        n_arcs = self.graph.arc_count
        n_com = len(self.commodities)
        object.__setattr__(self, "commodities", tuple(self.commodities))
        object.__setattr__(self, "fixed_cost", _frozen_array(self.fixed_cost, (n_arcs,)))
        object.__setattr__(self, "capacity", _frozen_array(self.capacity, (n_arcs,)))
        object.__setattr__(self, "var_cost", _frozen_array(self.var_cost, (n_arcs, n_com)))
        if self.com_capacity is not None:
            object.__setattr__(
                self, "com_capacity", _frozen_array(self.com_capacity, (n_arcs, n_com))
            )

    @property
    def node_count(self) -> int:
        return self.graph.node_count

    @property
    def arc_count(self) -> int:
        return self.graph.arc_count

    @property
    def commodity_count(self) -> int:
        return len(self.commodities)

    @property
    def demands(self) -> np.ndarray:
        return np.array([c.demand for c in self.commodities])


@dataclass(frozen=True)
class RandomizationSelection:
    """Which parameter families vary across scenarios."""

    families: frozenset[ParamFamily]

    def __post_init__(self):
        object.__setattr__(self, "families", frozenset(ParamFamily(f) for f in self.families))

    @classmethod
    def from_mask(cls, mask: int) -> "RandomizationSelection":
        if mask <= 0 or mask > 31:
            raise ValueError(f"randomization mask must be in [1, 31], got {mask}")
        return cls(frozenset(f for f in CANONICAL_FAMILY_ORDER if mask & int(f)))

    @property
    def mask(self) -> int:
        return sum(int(f) for f in self.families)

    def variable_count(self, instance: DetInstance) -> int:
        n_a, n_k = instance.arc_count, instance.commodity_count
        sizes = {
            ParamFamily.DEMAND: n_k,
            ParamFamily.ARC_CAPACITY: n_a,
            ParamFamily.COM_CAPACITY: n_a * n_k,
            ParamFamily.FIXED_COST: n_a,
            ParamFamily.VAR_COST: n_a * n_k,
        }
        return sum(sizes[f] for f in CANONICAL_FAMILY_ORDER if f in self.families)

    def variable_index(self, instance: DetInstance) -> list[tuple[ParamFamily, tuple[int, ...]]]:
        """Canonically ordered (family, identifying indices) per variable."""
        n_a, n_k = instance.arc_count, instance.commodity_count
        index: list[tuple[ParamFamily, tuple[int, ...]]] = []
        for fam in CANONICAL_FAMILY_ORDER:
            if fam not in self.families:
                continue
            if fam == ParamFamily.DEMAND:
                index.extend((fam, (k,)) for k in range(n_k))
            elif fam in (ParamFamily.ARC_CAPACITY, ParamFamily.FIXED_COST):
                index.extend((fam, (a,)) for a in range(n_a))
            else:
                index.extend((fam, (a, k)) for a in range(n_a) for k in range(n_k))
        return index


@dataclass(frozen=True)
class ScenarioMatrix:
    """Variables-by-scenarios value matrix with scenario probabilities."""

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"values must be a nonempty 2-d matrix, got shape {values.shape}")
        probs = np.array(self.probabilities, dtype=float)
        if probs.shape != (values.shape[1],):
            raise ValueError(
                f"probabilities must have one entry per scenario column "
                f"({values.shape[1]}), got shape {probs.shape}"
            )
        if (probs <= 0).any():
            raise ValueError("scenario probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"scenario probabilities must sum to 1, got {probs.sum()!r}")
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probabilities", probs)

    @property
    def variable_count(self) -> int:
        return self.values.shape[0]

    @property
    def scenario_count(self) -> int:
        return self.values.shape[1]


def node_balance(
    instance: DetInstance, commodity: int, demand_override: Optional[float] = None
) -> np.ndarray:
    """Net outgoing flow required at each node for one commodity.

    Positive demand at the origin, its negation at the destination, zero
    elsewhere; the vector always sums to exactly zero.
    """
    if not 0 <= commodity < instance.commodity_count:
        raise IndexError(
            f"commodity index {commodity} out of range [0, {instance.commodity_count})"
        )
    com = instance.commodities[commodity]
    demand = com.demand if demand_override is None else float(demand_override)
    balance = np.zeros(instance.node_count)
    balance[com.origin] += demand
    balance[com.destination] -= demand
    return balance


def total_volume(instance: DetInstance) -> float:
    """Sum of all commodity demands."""
    return float(sum(c.demand for c in instance.commodities))


def validate(instance: DetInstance) -> list[str]:
    """Every invariant violation of the instance; an empty list means valid."""
    violations: list[str] = []
    g = instance.graph
    if g.node_count < 1:
        violations.append(f"node count must be positive, got {g.node_count}")
    seen: dict[tuple[int, int], int] = {}
    for a, (tail, head) in enumerate(g.arcs):
        if tail == head:
            violations.append(f"self-loop at arc {a}")
        if not (0 <= tail < g.node_count and 0 <= head < g.node_count):
            violations.append(f"node index out of range at arc {a}: ({tail}, {head})")
        if g.no_parallel:
            if (tail, head) in seen:
                violations.append(
                    f"parallel arc at arc {a}: duplicates arc {seen[(tail, head)]}"
                )
            else:
                seen[(tail, head)] = a
    for k, com in enumerate(instance.commodities):
        if com.origin == com.destination:
            violations.append(f"commodity {k} has identical origin and destination")
        if not (0 <= com.origin < g.node_count and 0 <= com.destination < g.node_count):
            violations.append(f"commodity {k} references a node out of range")
        if com.demand < 0:
            violations.append(f"negative demand at commodity {k}: {com.demand}")
    for a in np.flatnonzero(instance.capacity < 0):
        violations.append(f"negative capacity at arc {a}")
    for a in np.flatnonzero(instance.fixed_cost < 0):
        violations.append(f"negative fixed cost at arc {a}")
    for a, k in zip(*np.nonzero(instance.var_cost < 0)):
        violations.append(f"negative variable cost at arc {a}, commodity {k}")
    if instance.use_com_capacity:
        if instance.com_capacity is None:
            violations.append("commodity capacities enabled but absent")
        else:
            for a, k in zip(*np.nonzero(instance.com_capacity < 0)):
                violations.append(f"negative commodity capacity at arc {a}, commodity {k}")
    return violations


def flatten(instance: DetInstance, selection: RandomizationSelection) -> np.ndarray:
    """Base values of the selected parameters in canonical order."""
    if not selection.families:
        raise ConfigError("nothing to randomize: the selection is empty")
    if ParamFamily.COM_CAPACITY in selection.families and not instance.use_com_capacity:
        raise ConfigError(
            "COM_CAPACITY selected but the instance has no commodity capacities"
        )
    parts: list[np.ndarray] = []
    for fam in CANONICAL_FAMILY_ORDER:
        if fam not in selection.families:
            continue
        if fam == ParamFamily.DEMAND:
            parts.append(instance.demands)
        elif fam == ParamFamily.ARC_CAPACITY:
            parts.append(instance.capacity)
        elif fam == ParamFamily.COM_CAPACITY:
            parts.append(instance.com_capacity.ravel())
        elif fam == ParamFamily.FIXED_COST:
            parts.append(instance.fixed_cost)
        else:
            parts.append(instance.var_cost.ravel())
    return np.concatenate(parts)
