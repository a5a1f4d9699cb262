"""Command-line entry points.

Both tools resolve their settings in three layers: built-in defaults,
then ``+F <file>`` configuration files in the order given, then the
remaining command-line flags.  Later layers win per key and the winning
source is remembered, so a run at verbosity >= 1 echoes the effective
configuration with provenance.

Configuration files hold one ``key value`` pair per line (the key is the
flag name without its dash), ``#`` starts a comment.

Exit codes: 0 success, 1 runtime or convergence failure, 2 usage error.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import detgen as dg
from .errors import McfndError, ParseError
from .formats import (
    read_corr,
    read_graph,
    read_hkwmat,
    read_moments,
    read_probs,
    read_std,
    write_corr,
    write_graph,
    write_hkwmat,
    write_lp,
    write_moments,
    write_mps,
    write_std,
    write_stochastic,
)
from .hkw import HkwOptions, generate_scenarios
from .feasibility import filter_scenarios
from .model import (
    CANONICAL_FAMILY_ORDER,
    CODE_FAMILIES,
    FAMILY_CODES,
    RandomizationSelection,
    ScenarioMatrix,
)
from .moments import TargetDistribution, assemble_correlation, assemble_targets
from .prng import DEFAULT_SEED, DEFAULT_STREAM, Pcg32


class UsageError(Exception):
    pass


class _HelpRequested(Exception):
    pass


# -- option machinery ----------------------------------------------------------


def _parse_u64(token: str) -> int:
    value = int(token)
    if not 0 <= value < 2**64:
        raise ValueError("must fit in 64 unsigned bits")
    return value


def _parse_bool01(token: str) -> bool:
    if token not in ("0", "1"):
        raise ValueError("must be 0 or 1")
    return token == "1"


def _parse_ratio(token: str) -> float:
    value = float(token)
    if not 0.0 <= value <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return value


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(token: str) -> str:
        if token not in allowed:
            raise ValueError(f"must be one of {', '.join(allowed)}")
        return token

    return parse


@dataclass(frozen=True)
class Option:
    flag: str
    parse: Callable[[str], object]
    default: object
    help: str
    metavar: str = "VALUE"
    repeatable: bool = False
    switch: bool = False  # present on the command line without a value

    @property
    def key(self) -> str:
        return self.flag.lstrip("-")


@dataclass
class CliConfig:
    """Resolved key -> value map with per-key provenance."""

    values: dict[str, object] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def echo(self, options: list[Option]) -> None:
        print("effective configuration:")
        seen = set()
        for opt in options:
            if opt.key in seen:
                continue
            seen.add(opt.key)
            print(f"  {opt.key} = {self.values[opt.key]!r}  [{self.provenance[opt.key]}]")


def resolve_config(options: list[Option], argv: list[str]) -> CliConfig:
    """Defaults, then each +F file in order, then the remaining flags."""
    by_flag = {opt.flag: opt for opt in options}
    by_key = {opt.key: opt for opt in options}

    files: list[str] = []
    cli_pairs: list[tuple[Option, str]] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token == "-help":
            raise _HelpRequested
        if token == "+F":
            if i + 1 >= len(argv):
                raise UsageError("+F requires a file name")
            files.append(argv[i + 1])
            i += 2
            continue
        opt = by_flag.get(token)
        if opt is None:
            raise UsageError(f"unknown flag {token!r}")
        if opt.switch:
            cli_pairs.append((opt, "1"))
            i += 1
            continue
        if i + 1 >= len(argv):
            raise UsageError(f"{token} requires a value")
        cli_pairs.append((opt, argv[i + 1]))
        i += 2

    config = CliConfig(
        values={opt.key: opt.default for opt in options},
        provenance={opt.key: "DEFAULT" for opt in options},
    )

    def apply(opt: Option, raw: str, source: str) -> None:
        try:
            value = opt.parse(raw)
        except ValueError as exc:
            raise UsageError(f"bad value {raw!r} for {opt.flag}: {exc}") from None
        if opt.repeatable:
            if config.provenance[opt.key] == source:
                config.values[opt.key] = list(config.values[opt.key]) + [value]
            else:
                config.values[opt.key] = [value]
        else:
            config.values[opt.key] = value
        config.provenance[opt.key] = source

    for name in files:
        try:
            text = Path(name).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read configuration file {name!r}: {exc}") from None
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            opt = by_key.get(parts[0])
            if opt is None:
                raise UsageError(f"{name}:{lineno}: unknown configuration key {parts[0]!r}")
            if len(parts) < 2:
                raise UsageError(f"{name}:{lineno}: key {parts[0]!r} has no value")
            for raw in parts[1:]:
                apply(opt, raw, f"FILE({name})")

    for opt, raw in cli_pairs:
        apply(opt, raw, "CLI")
    return config


def _usage(program: str, summary: str, options: list[Option]) -> str:
    lines = [
        f"usage: {program} [+F <config-file>] [flags]",
        summary,
        "",
        "flags (later sources override earlier: defaults < +F files < command line):",
        f"  +F {'FILE':<12} read configuration from FILE (repeatable)",
    ]
    for opt in options:
        meta = "" if opt.switch else f" {opt.metavar}"
        default = "" if opt.default in (None, []) else f" (default {opt.default})"
        lines.append(f"  {opt.flag + meta:<16} {opt.help}{default}")
    lines.append("  -help            show this message and exit")
    return "\n".join(lines)


# -- the deterministic generator tool -------------------------------------------

DETGEN_OPTIONS: list[Option] = [
    Option("-o", str, "instance", "output base name; format extension is appended", "BASE"),
    Option("-fmt", _choice("std", "lp", "mps"), ["std"], "output format, repeatable", "FMT",
           repeatable=True),
    Option("-graphIn", str, None, "read the graph from this file (topology 'file')", "FILE"),
    Option("-graphOut", str, None, "also save the generated graph to this file", "FILE"),
    Option("-seed", _parse_u64, DEFAULT_SEED, "random seed", "U64"),
    Option("-stream", _parse_u64, DEFAULT_STREAM, "random stream", "U64"),
    Option("-topo", _choice("random", "grid", "circular", "file"), "grid", "graph topology",
           "KIND"),
    Option("-gridX", int, 3, "grid width (grid topology)", "INT"),
    Option("-gridY", int, 3, "grid height (grid topology)", "INT"),
    Option("-nbNodes", int, 10, "node count (non-grid topologies)", "INT"),
    Option("-nbCom", int, 5, "commodity count", "INT"),
    Option("-nbArcs", int, 0, "extra random arcs beyond the base topology", "INT"),
    Option("-noParallel", _parse_bool01, True, "forbid parallel arcs", "0|1"),
    Option("-odMode", _choice("single", "shared", "random"), "single",
           "origin/destination mode", "MODE"),
    Option("-srcMin", int, 1, "minimum sources per commodity (random OD mode)", "INT"),
    Option("-srcMax", int, 1, "maximum sources per commodity (random OD mode)", "INT"),
    Option("-snkMin", int, 1, "minimum sinks per commodity (random OD mode)", "INT"),
    Option("-snkMax", int, 1, "maximum sinks per commodity (random OD mode)", "INT"),
    Option("-demMin", float, 10.0, "minimum demand", "REAL"),
    Option("-demMax", float, 100.0, "maximum demand", "REAL"),
    Option("-fixMin", float, 50.0, "minimum fixed cost", "REAL"),
    Option("-fixMax", float, 200.0, "maximum fixed cost", "REAL"),
    Option("-varMin", float, 1.0, "minimum variable cost", "REAL"),
    Option("-varMax", float, 10.0, "maximum variable cost", "REAL"),
    Option("-capMin", float, 50.0, "minimum arc capacity", "REAL"),
    Option("-capMax", float, 200.0, "maximum arc capacity", "REAL"),
    Option("-bndMin", float, 10.0, "minimum commodity capacity", "REAL"),
    Option("-bndMax", float, 100.0, "maximum commodity capacity", "REAL"),
    Option("-capInt", _parse_bool01, False, "round arc capacities to integers", "0|1"),
    Option("-bndInt", _parse_bool01, False, "round commodity capacities to integers", "0|1"),
    Option("-useBnd", _parse_bool01, False, "enable commodity-specific capacities", "0|1"),
    Option("-rZeroFix", _parse_ratio, 0.0, "ratio of arcs whose fixed cost is zeroed", "RATIO"),
    Option("-rFullCap", _parse_ratio, 0.0, "ratio of arcs whose capacity is set to total volume",
           "RATIO"),
    Option("-rZeroBnd", _parse_ratio, 0.0, "ratio of arcs whose commodity capacities are zeroed",
           "RATIO"),
    Option("-rMaxBnd", _parse_ratio, 0.0,
           "ratio of arcs whose commodity capacities are set to the arc capacity", "RATIO"),
    Option("-adjFix", float, 1.0, "uniform upward fixed-cost multiplier (>= 1)", "REAL"),
    Option("-adjCap", float, 1.0, "uniform downward capacity multiplier (in (0, 1])", "REAL"),
    Option("-tuneExtrasOnly", _parse_bool01, False,
           "tuning passes touch only the extra random arcs", "0|1"),
    Option("-V", int, 1, "verbosity (0 silences reports)", "INT"),
]


def _build_gen_config(cfg: CliConfig) -> dg.GenConfig:
    return dg.GenConfig(
        topology=dg.Topology(cfg["topo"]),
        grid_x=cfg["gridX"],
        grid_y=cfg["gridY"],
        node_count=cfg["nbNodes"],
        commodity_count=cfg["nbCom"],
        extra_random_arcs=cfg["nbArcs"],
        allow_parallel=not cfg["noParallel"],
        od_mode=dg.OdMode(cfg["odMode"]),
        src_min=cfg["srcMin"],
        src_max=cfg["srcMax"],
        snk_min=cfg["snkMin"],
        snk_max=cfg["snkMax"],
        dem_min=cfg["demMin"],
        dem_max=cfg["demMax"],
        fix_min=cfg["fixMin"],
        fix_max=cfg["fixMax"],
        var_min=cfg["varMin"],
        var_max=cfg["varMax"],
        cap_min=cfg["capMin"],
        cap_max=cfg["capMax"],
        bnd_min=cfg["bndMin"],
        bnd_max=cfg["bndMax"],
        cap_integer=cfg["capInt"],
        bnd_integer=cfg["bndInt"],
        use_com_capacity=cfg["useBnd"],
        ratio_zero_fix=cfg["rZeroFix"],
        ratio_full_cap=cfg["rFullCap"],
        ratio_zero_bnd=cfg["rZeroBnd"],
        ratio_max_bnd=cfg["rMaxBnd"],
        fix_multiplier=cfg["adjFix"],
        cap_multiplier=cfg["adjCap"],
        tune_extras_only=cfg["tuneExtrasOnly"],
    )


_DETGEN_WRITERS = {"std": write_std, "lp": write_lp, "mps": write_mps}


def run_detgen(argv: list[str]) -> int:
    program = "detgen"
    summary = "generate a deterministic fixed-charge multicommodity network design instance"
    try:
        cfg = resolve_config(DETGEN_OPTIONS, argv)
    except _HelpRequested:
        print(_usage(program, summary, DETGEN_OPTIONS))
        return 0
    except UsageError as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        print(_usage(program, summary, DETGEN_OPTIONS), file=sys.stderr)
        return 2

    try:
        if cfg["V"] >= 1:
            cfg.echo(DETGEN_OPTIONS)
        gen_config = _build_gen_config(cfg)
        graph_in = None
        if gen_config.topology is dg.Topology.FILE:
            if cfg["graphIn"] is None:
                raise UsageError("topology 'file' requires -graphIn")
            graph_in = read_graph(Path(cfg["graphIn"]).read_text())
        rng = Pcg32(cfg["seed"], cfg["stream"])
        instance = dg.generate(gen_config, rng, graph_in)
        if cfg["graphOut"] is not None:
            Path(cfg["graphOut"]).write_text(write_graph(instance.graph))
        written = []
        for fmt in dict.fromkeys(cfg["fmt"]):  # preserve order, drop duplicates
            path = Path(f"{cfg['o']}.{fmt}")
            path.write_text(_DETGEN_WRITERS[fmt](instance))
            written.append(str(path))
        if cfg["V"] >= 1:
            print(
                f"generated {instance.node_count} nodes, {instance.arc_count} arcs, "
                f"{instance.commodity_count} commodities -> {', '.join(written)}"
            )
        return 0
    except UsageError as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        return 2
    except (McfndError, OSError, ValueError) as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        return 1


# -- the stochastic generator tool -----------------------------------------------

_FAMILY_LETTERS = [FAMILY_CODES[f] for f in CANONICAL_FAMILY_ORDER]  # D A B F C


def _block_flag_options() -> list[Option]:
    """One flag per ordered family pair; both orders share a canonical key."""
    options = []
    for p in _FAMILY_LETTERS:
        for q in _FAMILY_LETTERS:
            rank_p, rank_q = _FAMILY_LETTERS.index(p), _FAMILY_LETTERS.index(q)
            canonical = f"X{p}{q}" if rank_p <= rank_q else f"X{q}{p}"
            options.append(
                _BlockOption(
                    flag=f"-X{p}{q}",
                    parse=float,
                    default=None,
                    help=f"target correlation for the {p}{q} block, in (-1, 1)",
                    metavar="REAL",
                    canonical=canonical,
                )
            )
    return options


@dataclass(frozen=True)
class _BlockOption(Option):
    canonical: str = ""

    @property
    def key(self) -> str:
        return self.canonical


STOGEN_OPTIONS: list[Option] = [
    Option("-I", str, None, "input deterministic instance file", "FILE"),
    Option("-F", _choice("S"), "S", "input format code (S = native STD)", "CODE"),
    Option("-O", str, "out.stoch", "output stochastic instance file", "FILE"),
    Option("-S", int, 1,
           "randomization mask: 1 demand, 2 arc capacity, 4 commodity capacity, "
           "8 fixed cost, 16 variable cost (sum to combine)", "MASK"),
    Option("-G", _parse_bool01, False,
           "generate target moments and correlations (otherwise read them)", switch=True),
    Option("-T", _choice("U", "T"), "U", "target distribution: U uniform, T triangular", "U|T"),
    Option("-A", float, 0.25, "spread below the base value (alpha)", "REAL"),
    Option("-B", float, 0.25, "spread above the base value (beta)", "REAL"),
    *_block_flag_options(),
    Option("-N", int, 100, "number of scenarios", "INT"),
    Option("-EM", float, 1e-3, "maximum moment-matching error (variance-1 scale)", "REAL"),
    Option("-EC", float, 1e-3, "maximum correlation-matching error", "REAL"),
    Option("-V", int, 1, "verbosity (0 silent, 2 per-iteration detail)", "INT"),
    Option("-MT", int, 10, "maximum scenario-construction trials", "INT"),
    Option("-MI", int, 100, "maximum iterations per trial", "INT"),
    Option("-seed", _parse_u64, DEFAULT_SEED, "random seed", "U64"),
    Option("-stream", _parse_u64, DEFAULT_STREAM, "random stream", "U64"),
    Option("-P", str, None, "scenario probability file (absent: equiprobable)", "FILE"),
    Option("-MO", str, None, "moments file: written under -G, read otherwise", "FILE"),
    Option("-CO", str, None, "correlations file: written under -G, read otherwise", "FILE"),
    Option("-HO", str, None, "write the constructed scenario matrix here", "FILE"),
    Option("-HI", str, None, "read starting scenario values from this matrix file", "FILE"),
]


def run_stogen(argv: list[str]) -> int:
    program = "stogen"
    summary = "synthesize a two-stage stochastic instance from a deterministic one"
    try:
        cfg = resolve_config(STOGEN_OPTIONS, argv)
    except _HelpRequested:
        print(_usage(program, summary, STOGEN_OPTIONS))
        return 0
    except UsageError as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        print(_usage(program, summary, STOGEN_OPTIONS), file=sys.stderr)
        return 2

    verbosity = cfg["V"]
    try:
        if cfg["I"] is None:
            raise UsageError("an input instance is required (-I)")
        if not 1 <= cfg["S"] <= 31:
            raise UsageError(f"randomization mask must be in [1, 31], got {cfg['S']}")
        if not cfg["G"] and (cfg["MO"] is None or cfg["CO"] is None):
            raise UsageError("without -G, target files -MO and -CO must be supplied")
        if verbosity >= 1:
            cfg.echo(STOGEN_OPTIONS)

        base = read_std(Path(cfg["I"]).read_text())
        selection = RandomizationSelection.from_mask(cfg["S"])
        n_vars = selection.variable_count(base)
        if verbosity >= 1:
            families = ", ".join(
                f.name for f in CANONICAL_FAMILY_ORDER if f in selection.families
            )
            print(f"randomizing {n_vars} parameters ({families})")

        if cfg["G"]:
            dist = (
                TargetDistribution.UNIFORM if cfg["T"] == "U" else TargetDistribution.TRIANGULAR
            )
            targets = assemble_targets(base, selection, dist, cfg["A"], cfg["B"])
            blocks = {}
            for p in _FAMILY_LETTERS:
                for q in _FAMILY_LETTERS:
                    key = f"X{p}{q}"
                    if key in cfg.values and cfg.values[key] is not None:
                        blocks[(CODE_FAMILIES[p], CODE_FAMILIES[q])] = cfg.values[key]
            corr = assemble_correlation(base, selection, blocks)
            if cfg["MO"] is not None:
                Path(cfg["MO"]).write_text(write_moments(targets))
            if cfg["CO"] is not None:
                Path(cfg["CO"]).write_text(write_corr(corr))
        else:
            targets = read_moments(Path(cfg["MO"]).read_text())
            corr = read_corr(Path(cfg["CO"]).read_text())
            if targets.variable_count != n_vars:
                raise UsageError(
                    f"moments file has {targets.variable_count} rows but the selection "
                    f"randomizes {n_vars} parameters"
                )
            if corr.size != n_vars:
                raise UsageError(
                    f"correlation file is {corr.size}x{corr.size} but the selection "
                    f"randomizes {n_vars} parameters"
                )

        probs = None
        if cfg["P"] is not None:
            probs = read_probs(Path(cfg["P"]).read_text())
            if len(probs) != cfg["N"]:
                raise UsageError(
                    f"probability file has {len(probs)} entries for {cfg['N']} scenarios"
                )
        start_matrix = None
        if cfg["HI"] is not None:
            values = read_hkwmat(Path(cfg["HI"]).read_text())
            start_probs = probs if probs is not None else np.full(cfg["N"], 1.0 / cfg["N"])
            start_matrix = ScenarioMatrix(values, start_probs)

        opts = HkwOptions(
            scenario_count=cfg["N"],
            moment_tol=cfg["EM"],
            corr_tol=cfg["EC"],
            max_iterations=cfg["MI"],
            max_trials=cfg["MT"],
            verbosity=verbosity,
            start_matrix=start_matrix,
        )
        rng = Pcg32(cfg["seed"], cfg["stream"])
        scenarios = generate_scenarios(targets, corr, opts, rng, probs)
        if cfg["HO"] is not None:
            Path(cfg["HO"]).write_text(write_hkwmat(scenarios.values))
        if verbosity >= 1:
            negative = int((scenarios.values < 0).sum())
            if negative:
                print(f"warning: {negative} negative realized parameter value(s)")

        retained, report = filter_scenarios(base, selection, scenarios, verbosity=verbosity)
        Path(cfg["O"]).write_text(write_stochastic(base, selection, retained))
        if verbosity >= 1:
            print(f"wrote {retained.scenario_count} scenario(s) to {cfg['O']}")
        return 0
    except UsageError as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        return 2
    except (McfndError, OSError, ValueError) as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        return 1


def main_detgen() -> None:
    sys.exit(run_detgen(sys.argv[1:]))


def main_stogen() -> None:
    sys.exit(run_stogen(sys.argv[1:]))
