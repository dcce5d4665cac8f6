"""Multi-echelon, multi-objective supply-chain simulation and optimisation.

Modules: :mod:`~echelon.scenario` (network definitions), :mod:`~echelon.demand`
(seeded demand traces), :mod:`~echelon.env` (the period-by-period simulator),
:mod:`~echelon.horizon` (whole-horizon evaluation), :mod:`~echelon.metrics`
(Pareto filtering and indicators), :mod:`~echelon.nsga2`,
:mod:`~echelon.policy` (policy search) and :mod:`~echelon.experiment`.
"""

from .demand import DemandTrace, sample_trace
from .env import reset, rollout, step
from .metrics import Front, ParetoArchive, das_dennis, hypervolume, pareto_filter
from .scenario import ScenarioConfig, builtin_scenario, load_scenario, validate_scenario

__version__ = "0.1.0"

__all__ = [
    "DemandTrace",
    "Front",
    "ParetoArchive",
    "ScenarioConfig",
    "builtin_scenario",
    "das_dennis",
    "hypervolume",
    "load_scenario",
    "pareto_filter",
    "reset",
    "rollout",
    "sample_trace",
    "step",
    "validate_scenario",
]
