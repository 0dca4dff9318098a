"""
Planner experiments: propagation reach and gain steering, value-like
activations, path-length preference, backtracking and WTA convergence.
"""

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..config import MechanismGains
from ..drc.weights import WeightSet
from ..sokoban.generators import backtrack_landmarks, backtrack_level, path_preference_level, zigzag_level
from ..sokoban.level import Action, Level, Pos, parse_level, shift
from .channels import ChannelMap, default_channel_map
from .compile import COMPILED_LATENCY, run_compiled
from .grid import PlanGrid, TraceKind, decode_plan
from .mechanisms import (
    COMPILED_MECHANISMS,
    ENGINE_MECHANISMS,
    Mechanism,
    force_abs_spec,
    init_plan,
    seed_mask,
    tick_plan,
)
from .runner import run_planner

WTA_CONVERGENCE_LIMIT = 10
STEERING_SIZES = (8, 9, 10, 11, 12)
SEED_SQUARE = (1, 2)


def steer_gains(gains: MechanismGains, factor: float) -> MechanismGains:
    """Scale both extension gains, the engine analogue of scaling recurrent weights."""
    return gains.model_copy(update={"lpe_gain": gains.lpe_gain * factor, "tpe_gain": gains.tpe_gain * factor})


def seed_corridor(length: int) -> Level:
    """
    One-high corridor with the agent and box at its left end and ``length``
    empty squares to the right. The target sits walled in on row 3, so the
    box's Right seed is the only seed on the level.
    """
    if length < 4:
        raise ValueError("seed corridor needs at least 4 squares")
    width = length + 4
    rows = [
        "#" * width,
        "#@$" + " " * length + "#",
        "#" * width,
        "#.#" + "#" * (width - 3),
        "#" * width,
    ]
    return parse_level("\n".join(rows), level_id=f"corridor-run-{length}")


def propagation_reach(
    gains: MechanismGains,
    length: int = 30,
    ticks: Optional[int] = None,
    weights: Optional[WeightSet] = None,
    channel_map: Optional[ChannelMap] = None,
) -> int:
    """
    Squares beyond the box's Right seed that reach the threshold.

    Runs the engine without backtracking, or the compiled ``weights`` when
    given (after the network's perception latency).

    Returns:
        Length of the contiguous run of active squares after the seed
    """
    if channel_map is None:
        channel_map = default_channel_map(weights.channels) if weights is not None else default_channel_map()
    level = seed_corridor(length)
    n_ticks = length + 5 if ticks is None else ticks
    if weights is not None:
        grid = run_compiled(weights, level, channel_map, gains, COMPILED_LATENCY + n_ticks)
    else:
        grid = init_plan(level, channel_map, gains, mechanisms=COMPILED_MECHANISMS)
        for _ in range(n_ticks):
            grid, _ = tick_plan(grid, level, channel_map, gains, COMPILED_MECHANISMS)
    right = grid.channel(channel_map.index("box_short", Action.RIGHT))
    reach = 0
    square = shift(SEED_SQUARE, Action.RIGHT)
    while level.is_open(square) and right[square] >= gains.threshold:
        reach += 1
        square = shift(square, Action.RIGHT)
    return reach


@dataclass
class SteeringOutcome:
    factor: float
    size: int
    reach: int
    solved: bool
    n_steps: int
    n_actions: int


def zigzag_steering(
    factors: Sequence[float] = (1.0, 1.2),
    sizes: Sequence[int] = STEERING_SIZES,
    gains: Optional[MechanismGains] = None,
    max_steps: int = 300,
) -> List[SteeringOutcome]:
    """
    Solve zigzag levels of each size under each extension-gain factor,
    acting only once the decoded plan connects the box to the target.
    """
    gains = gains or MechanismGains()
    outcomes = []
    for factor in factors:
        steered = steer_gains(gains, factor)
        reach = propagation_reach(steered)
        for size in sizes:
            episode = run_planner(
                zigzag_level(size), max_steps=max_steps, gains=steered, require_connected=True, record_grids=False
            )
            outcomes.append(
                SteeringOutcome(
                    factor=factor,
                    size=size,
                    reach=reach,
                    solved=episode.solved,
                    n_steps=episode.n_steps,
                    n_actions=episode.n_actions,
                )
            )
    return outcomes


def largest_solved(outcomes: Sequence[SteeringOutcome], factor: float) -> int:
    """Largest zigzag size solved under ``factor``; 0 when none was."""
    return max((o.size for o in outcomes if o.factor == factor and o.solved), default=0)


def count_value_activations(before: PlanGrid, after: PlanGrid, channel_map: ChannelMap, threshold: float) -> int:
    """Squares whose strongest short-term activation is active and grew over the tick."""
    short = list(channel_map.box_short)
    old = before.acts[:, :, short].max(axis=2)
    new = after.acts[:, :, short].max(axis=2)
    return int(np.count_nonzero((new >= threshold) & (new > old + 1e-9)))


def route(size: int, first: Action) -> List[Tuple[Pos, Action]]:
    """Push arrows from the box to the target on the path-preference level, turning once."""
    box = (2, 2)
    target = (size - 3, size - 3)
    second = Action.DOWN if first is Action.RIGHT else Action.RIGHT
    arrows = []
    square = box
    for action in (first, second):
        while True:
            nxt = shift(square, action)
            if (action is Action.RIGHT and nxt[1] > target[1]) or (action is Action.DOWN and nxt[0] > target[0]):
                break
            arrows.append((square, action))
            square = nxt
    return arrows


@dataclass
class PreferenceResult:
    winner: Optional[Action]
    right_strength: float
    down_strength: float
    ticks: int


def path_preference_experiment(
    strength_right: float,
    strength_down: float,
    length_right: int,
    length_down: int,
    size: int = 8,
    gains: Optional[MechanismGains] = None,
    ticks: int = 20,
) -> PreferenceResult:
    """
    Seed two partial routes from the box, right-then-down and
    down-then-right, and report which direction holds the box square.

    Each partial route is seeded from the box along its first ``length``
    arrows with a seed whose fresh activation is the route's strength. The
    target's backward seeds stay; the box gets no other seed.

    Args:
        strength_right: Seeded activation along the right-first route
        strength_down: Seeded activation along the down-first route
        length_right: Arrows of the right-first route that are seeded
        length_down: Arrows of the down-first route that are seeded
        size: Side of the path-preference room
        gains: Mechanism gains
        ticks: Ticks to run

    Returns:
        PreferenceResult with the surviving direction (None if neither)
    """
    gains = gains or MechanismGains()
    channel_map = default_channel_map()
    level = path_preference_level(size)
    seeds = np.array(seed_mask(level, forward=False))
    partials = ((Action.RIGHT, strength_right, length_right), (Action.DOWN, strength_down, length_down))
    for first, strength, length in partials:
        for (r, c), action in route(size, first)[:length]:
            seeds[r, c, action.value] = max(seeds[r, c, action.value], _seed_for(strength, gains))
    grid = init_plan(level, channel_map, gains, seeds=seeds)
    for _ in range(ticks):
        grid, _ = tick_plan(grid, level, channel_map, gains, seeds=seeds)
    arrow = decode_plan(grid, channel_map, gains.threshold).get((2, 2))
    right = grid.acts[2, 2, channel_map.index("box_short", Action.RIGHT)]
    down = grid.acts[2, 2, channel_map.index("box_short", Action.DOWN)]
    return PreferenceResult(
        winner=arrow.direction if arrow is not None else None,
        right_strength=float(right),
        down_strength=float(down),
        ticks=ticks,
    )


def _seed_for(strength: float, gains: MechanismGains) -> float:
    """Seed-mask value whose fresh activation is ``strength``."""
    ceiling = gains.a_max * np.tanh(1.0)
    ratio = float(np.clip(strength / ceiling, 0.0, 1.0 - 1e-9))
    return float(np.arctanh(ratio) / gains.seed_drive)


def branch_arrows(size: int) -> List[Tuple[Pos, Action]]:
    """(square, direction) pairs of the dead-end arm of the backtrack level, fork included."""
    marks = backtrack_landmarks(size)
    fork, d2, d3 = marks["D1"], marks["D2"], marks["D3"]
    arrows = [((2, c), Action.RIGHT) for c in range(fork[1], d2[1])]
    arrows += [((r, d2[1]), Action.DOWN) for r in range(d2[0], d3[0])]
    return arrows


@dataclass
class BacktrackResult:
    """Per-tick strongest activation on the dead-end arm and dead-end events."""

    branch_peaks: List[float] = field(default_factory=list)
    dead_end_events: int = 0
    negative_at_dead_end: bool = False
    dead_end_tick: Optional[int] = None
    suppressed_at: Optional[int] = None
    fork_direction: Optional[Action] = None


def backtracking_experiment(
    size: int = 20,
    ticks: int = 30,
    force: bool = False,
    gains: Optional[MechanismGains] = None,
    mechanisms: FrozenSet[Mechanism] = ENGINE_MECHANISMS,
) -> BacktrackResult:
    """
    Let the box's forward chain explore the dead-end arm of the backtrack
    level and follow what happens to the arm.

    The box is placed just before the fork and only forward seeds are used,
    so straight on through the fork is the chain's strongest way on. With
    ``force`` the short-term activations at the dead end are replaced by
    their absolute value each tick.

    Returns:
        BacktrackResult; ``dead_end_tick`` is the first tick the dead end
        went negative, ``suppressed_at`` the first tick every arm unit fell
        below threshold after one had reached it, and ``fork_direction`` the
        decoded arrow at the fork after the last tick
    """
    gains = gains or MechanismGains()
    channel_map = default_channel_map()
    marks = backtrack_landmarks(size)
    fork, d3 = marks["D1"], marks["D3"]
    base = backtrack_level(size)
    level = base.with_positions((2, fork[1] - 2), [(2, fork[1] - 1)])
    seeds = seed_mask(level, backward=False)
    interventions = [force_abs_spec([d3], channel_map)] if force else []
    arm = branch_arrows(size)

    result = BacktrackResult()
    grid = init_plan(level, channel_map, gains, seeds=seeds, mechanisms=mechanisms)
    was_active = False
    for tick in range(ticks):
        grid, events = tick_plan(grid, level, channel_map, gains, mechanisms, interventions, seeds=seeds)
        result.dead_end_events += sum(1 for e in events if e.kind is TraceKind.BACKTRACK and e.square == d3)
        peak = max(grid.acts[sq[0], sq[1], channel_map.index("box_short", a)] for sq, a in arm)
        result.branch_peaks.append(float(peak))
        d3_values = grid.acts[d3[0], d3[1], list(channel_map.box_short)]
        if (d3_values < 0).any():
            result.negative_at_dead_end = True
            if result.dead_end_tick is None:
                result.dead_end_tick = tick + 1
        if peak >= gains.threshold:
            was_active = True
        elif was_active and result.suppressed_at is None:
            result.suppressed_at = tick + 1
    arrow = decode_plan(grid, channel_map, gains.threshold).get(fork)
    result.fork_direction = arrow.direction if arrow is not None else None
    return result


def wta_convergence_ticks(
    grid: PlanGrid,
    level: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
    limit: int = WTA_CONVERGENCE_LIMIT,
    mechanisms: FrozenSet[Mechanism] = ENGINE_MECHANISMS,
) -> Optional[int]:
    """
    Ticks until no square holds two short-term directions at or above the
    threshold; None when that does not happen within ``limit`` ticks.
    """
    short = list(channel_map.box_short)
    for tick in range(limit + 1):
        if ((grid.acts[:, :, short] >= gains.threshold).sum(axis=2) <= 1).all():
            return tick
        grid, _ = tick_plan(grid, level, channel_map, gains, mechanisms)
    return None


def junction_directions(grid: PlanGrid, square: Pos, channel_map: ChannelMap, threshold: float) -> List[Action]:
    """Short-term directions at ``square`` at or above the threshold."""
    return [
        action
        for action in Action
        if grid.acts[square[0], square[1], channel_map.index("box_short", action)] >= threshold
    ]


def run_static(
    level: Level,
    ticks: int,
    gains: Optional[MechanismGains] = None,
    mechanisms: FrozenSet[Mechanism] = ENGINE_MECHANISMS,
    channel_map: Optional[ChannelMap] = None,
    seeds: Optional[np.ndarray] = None,
) -> PlanGrid:
    """Tick the plan on a level that never changes."""
    gains = gains or MechanismGains()
    channel_map = channel_map or default_channel_map()
    grid = init_plan(level, channel_map, gains, seeds=seeds, mechanisms=mechanisms)
    for _ in range(ticks):
        grid, _ = tick_plan(grid, level, channel_map, gains, mechanisms, seeds=seeds)
    return grid

