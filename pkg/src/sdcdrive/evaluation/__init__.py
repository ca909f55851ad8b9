from .metrics import (
    DEFAULT_PENALTIES,
    INFRACTION_TYPES,
    InfractionEvent,
    RouteResult,
    driving_score,
    infraction_penalty,
    route_completion,
    task_metrics,
)
from .simulator import SimState, SimParams, simulate_step
from .expert import ExpertAgent, expert_policy
from .closed_loop import run_closed_loop, load_route_file, save_route_file

__all__ = [
    "DEFAULT_PENALTIES",
    "INFRACTION_TYPES",
    "InfractionEvent",
    "RouteResult",
    "driving_score",
    "infraction_penalty",
    "route_completion",
    "task_metrics",
    "SimState",
    "SimParams",
    "simulate_step",
    "ExpertAgent",
    "expert_policy",
    "run_closed_loop",
    "load_route_file",
    "save_route_file",
]
