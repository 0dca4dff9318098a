"""
Explicit plan-chain planner over direction channels and its compilation
into DRC weights.
"""

from .channels import MIN_CHANNELS, ChannelMap, default_channel_map
from .compile import (
    COMPILED_CHANNELS,
    COMPILED_LATENCY,
    compile_to_weights,
    compiled_layout,
    compiled_trajectory,
    run_compiled,
    state_to_grid,
)
from .experiments import (
    BacktrackResult,
    PreferenceResult,
    SteeringOutcome,
    backtracking_experiment,
    count_value_activations,
    largest_solved,
    path_preference_experiment,
    propagation_reach,
    run_static,
    seed_corridor,
    steer_gains,
    wta_convergence_ticks,
    zigzag_steering,
)
from .grid import Horizon, Plan, PlanArrow, PlanGrid, TraceEvent, TraceKind, decode_plan, refresh_entities
from .mechanisms import (
    COMPILED_MECHANISMS,
    ENGINE_MECHANISMS,
    Mechanism,
    force_abs_spec,
    init_plan,
    seed_mask,
    stop_mask,
    tick_plan,
    transfer_long_to_short,
)
from .readout import Readout, apply_transition_update, fallback_action, readout_action
from .runner import Episode, run_planner

__all__ = [
    "BacktrackResult",
    "COMPILED_CHANNELS",
    "COMPILED_LATENCY",
    "COMPILED_MECHANISMS",
    "ChannelMap",
    "ENGINE_MECHANISMS",
    "Episode",
    "Horizon",
    "MIN_CHANNELS",
    "Mechanism",
    "Plan",
    "PlanArrow",
    "PlanGrid",
    "PreferenceResult",
    "Readout",
    "SteeringOutcome",
    "TraceEvent",
    "TraceKind",
    "apply_transition_update",
    "backtracking_experiment",
    "compile_to_weights",
    "compiled_layout",
    "compiled_trajectory",
    "count_value_activations",
    "decode_plan",
    "default_channel_map",
    "force_abs_spec",
    "fallback_action",
    "init_plan",
    "largest_solved",
    "path_preference_experiment",
    "propagation_reach",
    "readout_action",
    "refresh_entities",
    "run_compiled",
    "run_planner",
    "run_static",
    "seed_corridor",
    "seed_mask",
    "state_to_grid",
    "steer_gains",
    "stop_mask",
    "tick_plan",
    "transfer_long_to_short",
    "wta_convergence_ticks",
    "zigzag_steering",
]
