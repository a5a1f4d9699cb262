"""Text codecs for every file the toolkit reads or writes.

All formats are whitespace-separated text with LF line endings (readers
accept CRLF) and 1-based node/arc indices.  Reals are printed with
``repr``, the shortest decimal that round-trips the double exactly, so
every writer is byte-deterministic and every reader recovers values
bit-for-bit.

Native instance layout (STD):

    line 1:           |N| |A| |K| useB          (useB 0 or 1)
    next |A| lines:   tail head fixed_cost capacity
    next |K| lines:   origin destination demand
    next |A| lines:   |K| variable costs (arc-major)
    if useB, next |A| lines: |K| commodity capacities

A stochastic file (STOCH) superposes one full STD body per retained
scenario, each preceded by ``SCENARIO <number> <probability>``; the
non-randomized parameters are deliberately repeated so one block is a
complete, self-contained instance.

Model exports: LP is the human-readable format solvers and people both
parse; MPS is the fixed-column section format (NAME/ROWS/COLUMNS/RHS/
BOUNDS/ENDATA) with design variables marked integer between INTORG and
INTEND markers.  Both are write-only.
"""

from __future__ import annotations

import enum
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import ParseError
from .model import (
    Commodity,
    DetInstance,
    Graph,
    RandomizationSelection,
    ScenarioMatrix,
    validate,
)
from .moments import CorrelationMatrix, MomentTargets


class FormatId(enum.Enum):
    STD = "std"
    LP = "lp"
    MPS = "mps"
    GRAPH = "graph"
    MOMENTS = "moments"
    CORR = "corr"
    PROBS = "probs"
    HKWMAT = "hkwmat"
    STOCH = "stoch"


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the double exactly."""
    return repr(float(value))


class _Tokens:
    """Whitespace tokenizer that remembers line numbers for error messages."""

    def __init__(self, text: str):
        self._items: list[tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            for tok in body.split():
                self._items.append((tok, lineno))
        self._pos = 0
        self._last_line = 0

    @property
    def line(self) -> int:
        return self._last_line

    def exhausted(self) -> bool:
        return self._pos >= len(self._items)

    def next(self, what: str) -> str:
        if self._pos >= len(self._items):
            raise ParseError(f"unexpected end of file while reading {what}", self._last_line or 1)
        tok, self._last_line = self._items[self._pos]
        self._pos += 1
        return tok

    def peek(self) -> Optional[str]:
        return self._items[self._pos][0] if self._pos < len(self._items) else None

    def next_int(self, what: str, minimum: Optional[int] = None) -> int:
        tok = self.next(what)
        try:
            value = int(tok)
        except ValueError:
            raise ParseError(f"expected an integer for {what}, got {tok!r}", self.line) from None
        if minimum is not None and value < minimum:
            raise ParseError(f"{what} must be >= {minimum}, got {value}", self.line)
        return value

    def next_real(self, what: str, minimum: Optional[float] = None) -> float:
        tok = self.next(what)
        try:
            value = float(tok)
        except ValueError:
            raise ParseError(f"expected a number for {what}, got {tok!r}", self.line) from None
        if minimum is not None and value < minimum:
            raise ParseError(f"{what} must be >= {minimum}, got {value}", self.line)
        return value


# -- native instance format ---------------------------------------------------


def write_std(instance: DetInstance) -> str:
    g = instance.graph
    use_b = 1 if instance.use_com_capacity else 0
    lines = [f"{g.node_count} {g.arc_count} {instance.commodity_count} {use_b}"]
    for a, (tail, head) in enumerate(g.arcs):
        lines.append(
            f"{tail + 1} {head + 1} {_fmt(instance.fixed_cost[a])} {_fmt(instance.capacity[a])}"
        )
    for com in instance.commodities:
        lines.append(f"{com.origin + 1} {com.destination + 1} {_fmt(com.demand)}")
    for a in range(g.arc_count):
        lines.append(" ".join(_fmt(v) for v in instance.var_cost[a]))
    if use_b:
        for a in range(g.arc_count):
            lines.append(" ".join(_fmt(v) for v in instance.com_capacity[a]))
    return "\n".join(lines) + "\n"


def _read_std_body(tokens: _Tokens) -> DetInstance:
    n_nodes = tokens.next_int("node count", minimum=1)
    n_arcs = tokens.next_int("arc count", minimum=0)
    n_com = tokens.next_int("commodity count", minimum=0)
    use_b = tokens.next_int("commodity-capacity flag")
    if use_b not in (0, 1):
        raise ParseError(f"commodity-capacity flag must be 0 or 1, got {use_b}", tokens.line)

    def node_index(what: str) -> int:
        value = tokens.next_int(what, minimum=1)
        if value > n_nodes:
            raise ParseError(f"{what} {value} exceeds node count {n_nodes}", tokens.line)
        return value - 1

    arcs, fixed, capacity = [], [], []
    for a in range(n_arcs):
        arcs.append((node_index(f"tail of arc {a + 1}"), node_index(f"head of arc {a + 1}")))
        fixed.append(tokens.next_real(f"fixed cost of arc {a + 1}", minimum=0.0))
        capacity.append(tokens.next_real(f"capacity of arc {a + 1}", minimum=0.0))
    commodities = []
    for k in range(n_com):
        origin = node_index(f"origin of commodity {k + 1}")
        dest = node_index(f"destination of commodity {k + 1}")
        demand = tokens.next_real(f"demand of commodity {k + 1}", minimum=0.0)
        commodities.append(Commodity(origin, dest, demand))
    var_cost = np.empty((n_arcs, n_com))
    for a in range(n_arcs):
        for k in range(n_com):
            var_cost[a, k] = tokens.next_real(f"cost of commodity {k + 1} on arc {a + 1}")
    com_capacity = None
    if use_b:
        com_capacity = np.empty((n_arcs, n_com))
        for a in range(n_arcs):
            for k in range(n_com):
                com_capacity[a, k] = tokens.next_real(
                    f"commodity capacity of commodity {k + 1} on arc {a + 1}", minimum=0.0
                )
    return DetInstance(
        graph=Graph(node_count=n_nodes, arcs=tuple(arcs)),
        commodities=tuple(commodities),
        fixed_cost=np.array(fixed),
        capacity=np.array(capacity),
        var_cost=var_cost,
        com_capacity=com_capacity,
        use_com_capacity=bool(use_b),
    )


def read_std(text: str) -> DetInstance:
    tokens = _Tokens(text)
    instance = _read_std_body(tokens)
    if not tokens.exhausted():
        raise ParseError(f"trailing content {tokens.peek()!r}", tokens.line)
    violations = validate(instance)
    if violations:
        raise ParseError("invalid instance: " + "; ".join(violations), tokens.line)
    return instance


# -- model exports ------------------------------------------------------------


def _variable_names(instance: DetInstance) -> tuple[list[str], list[list[str]]]:
    """1-based y/x names; parallel arcs get an occurrence suffix."""
    seen: dict[tuple[int, int], int] = {}
    y_names, x_names = [], []
    for tail, head in instance.graph.arcs:
        count = seen.get((tail, head), 0)
        seen[(tail, head)] = count + 1
        suffix = f"_p{count + 1}" if count else ""
        y_names.append(f"y_{tail + 1}_{head + 1}{suffix}")
        x_names.append(
            [f"x_{tail + 1}_{head + 1}_{k + 1}{suffix}" for k in range(instance.commodity_count)]
        )
    return y_names, x_names


def write_lp(instance: DetInstance) -> str:
    """Human-readable LP model of the full design problem."""
    y, x = _variable_names(instance)
    n_a, n_k = instance.arc_count, instance.commodity_count
    lines = [
        f"\\ fixed-charge multicommodity network design: "
        f"{instance.node_count} nodes, {n_a} arcs, {n_k} commodities",
        "Minimize",
    ]
    terms = [f"{_fmt(instance.fixed_cost[a])} {y[a]}" for a in range(n_a)]
    terms += [
        f"{_fmt(instance.var_cost[a, k])} {x[a][k]}" for a in range(n_a) for k in range(n_k)
    ]
    lines.append(" obj: " + _join_terms(terms))
    lines.append("Subject To")
    for i in range(instance.node_count):
        for k in range(n_k):
            parts = []
            for a, (tail, head) in enumerate(instance.graph.arcs):
                if tail == i:
                    parts.append(f"+ {x[a][k]}")
                if head == i:
                    parts.append(f"- {x[a][k]}")
            com = instance.commodities[k]
            rhs = com.demand if i == com.origin else (-com.demand if i == com.destination else 0.0)
            if not parts:
                if rhs == 0.0:
                    continue
                # isolated node with nonzero balance: keep the (infeasible)
                # row parseable with an explicit zero coefficient
                parts = [f"+ 0 {y[0]}"]
            lines.append(f" flow_{i + 1}_{k + 1}: " + " ".join(parts) + f" = {_fmt(rhs)}")
    for a in range(n_a):
        parts = " + ".join(x[a][k] for k in range(n_k))
        lines.append(f" cap_{a + 1}: {parts} - {_fmt(instance.capacity[a])} {y[a]} <= 0")
    if instance.use_com_capacity:
        for a in range(n_a):
            for k in range(n_k):
                lines.append(
                    f" bnd_{a + 1}_{k + 1}: {x[a][k]} - "
                    f"{_fmt(instance.com_capacity[a, k])} {y[a]} <= 0"
                )
    lines.append("Binaries")
    lines.append(" " + " ".join(y))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _join_terms(terms: list[str], per_line: int = 8) -> str:
    chunks = []
    for i in range(0, len(terms), per_line):
        chunks.append(" + ".join(terms[i : i + per_line]))
    return ("\n   + ").join(chunks)


def _mps_line(fields: Iterable[tuple[int, str]]) -> str:
    """Place fields at classic MPS column starts, degrading gracefully
    to single-space separation when a long name overflows its field."""
    out = ""
    for start, text in fields:
        if len(out) < start:
            out = out.ljust(start)
        elif out:
            out += " "
        out += text
    return out


def write_mps(instance: DetInstance) -> str:
    """Fixed-column MPS model with binary design variables."""
    y, x = _variable_names(instance)
    n_a, n_k = instance.arc_count, instance.commodity_count
    lines = [_mps_line([(0, "NAME"), (14, "MCFND")]), "ROWS"]
    lines.append(_mps_line([(1, "N"), (4, "COST")]))
    flow_rows = []
    for i in range(instance.node_count):
        for k in range(n_k):
            name = f"FLOW_{i + 1}_{k + 1}"
            flow_rows.append(name)
            lines.append(_mps_line([(1, "E"), (4, name)]))
    for a in range(n_a):
        lines.append(_mps_line([(1, "L"), (4, f"CAP_{a + 1}")]))
    if instance.use_com_capacity:
        for a in range(n_a):
            for k in range(n_k):
                lines.append(_mps_line([(1, "L"), (4, f"BND_{a + 1}_{k + 1}")]))

    lines.append("COLUMNS")

    def entry(col: str, row: str, value: float, second: Optional[tuple[str, float]] = None) -> str:
        fields = [(4, col), (14, row), (24, _fmt(value))]
        if second is not None:
            fields += [(39, second[0]), (49, _fmt(second[1]))]
        return _mps_line(fields)

    lines.append(_mps_line([(4, "MARKER"), (14, "'MARKER'"), (39, "'INTORG'")]))
    for a in range(n_a):
        pairs = [("COST", instance.fixed_cost[a]), (f"CAP_{a + 1}", -instance.capacity[a])]
        if instance.use_com_capacity:
            pairs += [
                (f"BND_{a + 1}_{k + 1}", -instance.com_capacity[a, k]) for k in range(n_k)
            ]
        for j in range(0, len(pairs), 2):
            chunk = pairs[j : j + 2]
            lines.append(
                entry(y[a], chunk[0][0], chunk[0][1], chunk[1] if len(chunk) > 1 else None)
            )
    lines.append(_mps_line([(4, "MARKER"), (14, "'MARKER'"), (39, "'INTEND'")]))
    for a, (tail, head) in enumerate(instance.graph.arcs):
        for k in range(n_k):
            pairs = [
                ("COST", instance.var_cost[a, k]),
                (f"FLOW_{tail + 1}_{k + 1}", 1.0),
                (f"FLOW_{head + 1}_{k + 1}", -1.0),
                (f"CAP_{a + 1}", 1.0),
            ]
            if instance.use_com_capacity:
                pairs.append((f"BND_{a + 1}_{k + 1}", 1.0))
            for j in range(0, len(pairs), 2):
                chunk = pairs[j : j + 2]
                lines.append(
                    entry(x[a][k], chunk[0][0], chunk[0][1], chunk[1] if len(chunk) > 1 else None)
                )

    lines.append("RHS")
    for k, com in enumerate(instance.commodities):
        if com.demand == 0.0:
            continue
        lines.append(entry("RHS", f"FLOW_{com.origin + 1}_{k + 1}", com.demand))
        lines.append(entry("RHS", f"FLOW_{com.destination + 1}_{k + 1}", -com.demand))

    lines.append("BOUNDS")
    for a in range(n_a):
        lines.append(_mps_line([(1, "UP"), (4, "BND"), (14, y[a]), (24, "1")]))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


# -- auxiliary matrix and vector formats ---------------------------------------


def write_graph(graph: Graph) -> str:
    lines = [f"{graph.node_count} {graph.arc_count}"]
    lines += [f"{tail + 1} {head + 1}" for tail, head in graph.arcs]
    return "\n".join(lines) + "\n"


def read_graph(text: str) -> Graph:
    tokens = _Tokens(text)
    n_nodes = tokens.next_int("node count", minimum=1)
    n_arcs = tokens.next_int("arc count", minimum=0)
    arcs = []
    for a in range(n_arcs):
        tail = tokens.next_int(f"tail of arc {a + 1}", minimum=1)
        head = tokens.next_int(f"head of arc {a + 1}", minimum=1)
        if tail > n_nodes or head > n_nodes:
            raise ParseError(f"arc {a + 1} references a node beyond {n_nodes}", tokens.line)
        arcs.append((tail - 1, head - 1))
    if not tokens.exhausted():
        raise ParseError(f"trailing content {tokens.peek()!r}", tokens.line)
    return Graph(node_count=n_nodes, arcs=tuple(arcs))


def write_moments(targets: MomentTargets) -> str:
    lines = [f"{targets.variable_count} 4"]
    for row in targets.as_matrix():
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_moments(text: str) -> MomentTargets:
    tokens = _Tokens(text)
    n = tokens.next_int("variable count", minimum=1)
    width = tokens.next_int("moment count")
    if width != 4:
        raise ParseError(f"moment files carry 4 moments per row, got {width}", tokens.line)
    rows = np.empty((n, 4))
    for i in range(n):
        for j, what in enumerate(("mean", "std dev", "skewness", "kurtosis")):
            rows[i, j] = tokens.next_real(f"{what} of variable {i + 1}")
    if not tokens.exhausted():
        raise ParseError(f"trailing content {tokens.peek()!r}", tokens.line)
    try:
        return MomentTargets(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])
    except ValueError as exc:
        raise ParseError(str(exc), tokens.line) from None


def write_corr(corr: CorrelationMatrix) -> str:
    n = corr.size
    lines = [f"{n} {n}"]
    for row in corr.matrix:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_corr(text: str) -> CorrelationMatrix:
    tokens = _Tokens(text)
    rows = tokens.next_int("row count", minimum=1)
    cols = tokens.next_int("column count", minimum=1)
    if rows != cols:
        raise ParseError(f"correlation matrix must be square, got {rows}x{cols}", tokens.line)
    matrix = np.empty((rows, rows))
    for i in range(rows):
        for j in range(rows):
            matrix[i, j] = tokens.next_real(f"correlation ({i + 1}, {j + 1})")
    if not tokens.exhausted():
        raise ParseError(f"trailing content {tokens.peek()!r}", tokens.line)
    if np.abs(matrix - matrix.T).max() > 1e-12:
        raise ParseError("correlation matrix is not symmetric", tokens.line)
    if np.abs(np.diag(matrix) - 1.0).max() > 1e-12:
        raise ParseError("correlation matrix diagonal must be 1", tokens.line)
    # hand exactly symmetric data to the constructor's Cholesky check
    matrix = (matrix + matrix.T) / 2.0
    np.fill_diagonal(matrix, 1.0)
    return CorrelationMatrix(matrix)


def write_probs(probabilities: np.ndarray) -> str:
    lines = [str(len(probabilities))]
    lines += [_fmt(p) for p in probabilities]
    return "\n".join(lines) + "\n"


def read_probs(text: str) -> np.ndarray:
    tokens = _Tokens(text)
    count = tokens.next_int("scenario count", minimum=1)
    probs = np.empty(count)
    for t in range(count):
        probs[t] = tokens.next_real(f"probability of scenario {t + 1}")
    if not tokens.exhausted():
        raise ParseError(f"trailing content {tokens.peek()!r}", tokens.line)
    if (probs <= 0).any():
        raise ParseError("probabilities must be strictly positive", tokens.line)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ParseError(f"probabilities sum to {probs.sum()!r}, expected 1", tokens.line)
    return probs


def write_hkwmat(values: np.ndarray) -> str:
    values = np.asarray(values, dtype=float)
    lines = [f"{values.shape[0]} {values.shape[1]}"]
    for row in values:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_hkwmat(text: str) -> np.ndarray:
    tokens = _Tokens(text)
    rows = tokens.next_int("variable count", minimum=1)
    cols = tokens.next_int("scenario count", minimum=1)
    values = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            values[i, j] = tokens.next_real(f"value ({i + 1}, {j + 1})")
    if not tokens.exhausted():
        raise ParseError(f"trailing content {tokens.peek()!r}", tokens.line)
    return values


# -- stochastic output ----------------------------------------------------------


def write_stochastic(
    base: DetInstance, selection: RandomizationSelection, retained: ScenarioMatrix
) -> str:
    """Superposed per-scenario instances, each under its own header."""
    from .feasibility import scenario_instance  # local import; no cycle at module load

    blocks = []
    for t in range(retained.scenario_count):
        instance = scenario_instance(base, selection, retained.values[:, t])
        blocks.append(f"SCENARIO {t + 1} {_fmt(retained.probabilities[t])}\n")
        blocks.append(write_std(instance))
    return "".join(blocks)


def read_stochastic(text: str) -> list[tuple[int, float, DetInstance]]:
    """Parse a stochastic file into (scenario number, probability, instance)."""
    tokens = _Tokens(text)
    out = []
    while not tokens.exhausted():
        marker = tokens.next("scenario header")
        if marker != "SCENARIO":
            raise ParseError(f"expected a SCENARIO header, got {marker!r}", tokens.line)
        number = tokens.next_int("scenario number", minimum=1)
        probability = tokens.next_real("scenario probability")
        if not 0.0 < probability <= 1.0:
            raise ParseError(f"scenario probability out of range: {probability}", tokens.line)
        out.append((number, probability, _read_std_body(tokens)))
    if not out:
        raise ParseError("no scenarios in file", 1)
    return out


# registry seam: an additional instance format plugs in as another entry
WRITERS: dict[FormatId, Callable] = {
    FormatId.STD: write_std,
    FormatId.LP: write_lp,
    FormatId.MPS: write_mps,
    FormatId.GRAPH: write_graph,
    FormatId.MOMENTS: write_moments,
    FormatId.CORR: write_corr,
    FormatId.PROBS: write_probs,
    FormatId.HKWMAT: write_hkwmat,
    FormatId.STOCH: write_stochastic,
}

READERS: dict[FormatId, Callable] = {
    FormatId.STD: read_std,
    FormatId.GRAPH: read_graph,
    FormatId.MOMENTS: read_moments,
    FormatId.CORR: read_corr,
    FormatId.PROBS: read_probs,
    FormatId.HKWMAT: read_hkwmat,
    FormatId.STOCH: read_stochastic,
}
