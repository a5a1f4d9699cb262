"""Generators for deterministic and two-stage stochastic fixed-charge
multicommodity network design instances.

The package splits into a deterministic instance generator (graph
topology, commodities, costs, capacities, tuning passes), a stochastic
layer that builds scenario sets matching first-four-moment and block
correlation targets, an exact LP feasibility screen, and text codecs for
every file involved.  The ``detgen``, ``stogen`` and ``scenreport``
console scripts wrap these pieces.
"""

from .detgen import GenConfig, OdMode, Topology, generate
from .errors import (
    ConfigError,
    ConvergenceError,
    CorrelationError,
    GenerationError,
    McfndError,
    NoFeasibleScenarioError,
    ParseError,
    RankError,
    SolverStallError,
    TransformFailure,
)
from .feasibility import (
    FeasibilityReport,
    build_feasibility_lp,
    check_feasible,
    filter_scenarios,
    scenario_instance,
)
from .hkw import HkwOptions, generate_scenarios, match_errors
from .model import (
    Commodity,
    DetInstance,
    Graph,
    ParamFamily,
    RandomizationSelection,
    ScenarioMatrix,
    flatten,
    node_balance,
    total_volume,
    validate,
)
from .moments import (
    CorrelationMatrix,
    MomentTargets,
    TargetDistribution,
    assemble_correlation,
    assemble_targets,
    triangular_targets,
    uniform_targets,
)
from .prng import Pcg32
from .simplex import LpProblem, LpSolution

__version__ = "0.1.0"

__all__ = [
    "Commodity",
    "ConfigError",
    "ConvergenceError",
    "CorrelationError",
    "CorrelationMatrix",
    "DetInstance",
    "FeasibilityReport",
    "GenConfig",
    "GenerationError",
    "Graph",
    "HkwOptions",
    "LpProblem",
    "LpSolution",
    "McfndError",
    "MomentTargets",
    "NoFeasibleScenarioError",
    "OdMode",
    "ParamFamily",
    "ParseError",
    "Pcg32",
    "RandomizationSelection",
    "RankError",
    "ScenarioMatrix",
    "SolverStallError",
    "TargetDistribution",
    "Topology",
    "TransformFailure",
    "assemble_correlation",
    "assemble_targets",
    "build_feasibility_lp",
    "check_feasible",
    "filter_scenarios",
    "flatten",
    "generate",
    "generate_scenarios",
    "match_errors",
    "node_balance",
    "scenario_instance",
    "total_volume",
    "triangular_targets",
    "uniform_targets",
    "validate",
]
