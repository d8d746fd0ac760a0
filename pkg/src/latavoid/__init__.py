"""Task graph toolkit for latency hiding by communication avoidance.

Graphs, local-computation covers, the l0..l5 communication-avoiding split,
blocked macro-steps, a phase-model simulator with an event-driven oracle,
and strong-scaling sweeps.
"""

from .avoid import (
    AvoidSplit,
    MacroStepPlan,
    ProcSplit,
    blocked_transform,
    communicated_volume,
    plan_redundancy,
    redundancy,
    split,
    verify_well_formed,
)
from .cover import (
    CoverReport,
    LevelCover,
    bases_of_cover,
    check_overlap_condition,
    granularity,
    independent_executability,
    validate_cover,
)
from .errors import LatavoidError
from .generators import per_level_cover, random_dag, stencil_1d
from .graph import Task, TaskGraph, base, build_graph, pred_closure, sync_points, topological_levels
from .oracle import event_sim_oracle, phase_schedule
from .simulate import (
    CostModel,
    PhaseTrace,
    Scenario,
    SweepTable,
    format_trace,
    parallel_time,
    simulate_blocked,
    simulate_naive,
    strong_scaling_sweep,
    transfer_schedule,
)

__version__ = "0.1.0"
