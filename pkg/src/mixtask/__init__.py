"""Mixed-initiative task allocation between a capability-limited robot and a
human collaborator, in a deterministic gridworld with a full experiment
harness and live-session server."""

__version__ = "0.1.0"

from .allocation import AllocationProblem, AllocationResult, Constraint, solve
from .dialog import DialogAct, DialogEvent, PHelpEstimate, classify_incoming, update_p_help
from .metrics import Metrics, compute_metrics
from .scenarios import TaskScenario, builtin_scenario, builtin_scenarios, load_scenario
from .trial import TrialConfig, run_trial
from .world import GridWorld, PhysicalPrimitive, SymbolicState, apply_effect

__all__ = [
    "AllocationProblem",
    "AllocationResult",
    "Constraint",
    "DialogAct",
    "DialogEvent",
    "GridWorld",
    "Metrics",
    "PHelpEstimate",
    "PhysicalPrimitive",
    "SymbolicState",
    "TaskScenario",
    "TrialConfig",
    "apply_effect",
    "builtin_scenario",
    "builtin_scenarios",
    "classify_incoming",
    "compute_metrics",
    "load_scenario",
    "run_trial",
    "solve",
    "update_p_help",
]
