"""
The plan mechanisms: seeding, extension, stopping, backtracking,
winner-takes-all, long->short transfer and the agent approach wavefront.

Short-term box channels follow the ConvLSTM cell of the compiled network,
with the forget gate shut and the input gate open so nothing but the gates
carries over a tick:

    X  = seed_drive·seed + linear taps + turn taps      (positive parts only)
    j  = sigmoid(J_OPEN + 60·stop_gain·stop - 100·wta_inhibit·beaten)
    c' = F·c + j                h = tanh(X)·tanh(c')     a = a_max·h

``beaten`` counts the directions at the same square whose comparator fired
on the previous tick. A comparator fires when its direction was driven
harder, was not stopped and carried any drive at all; equal drives go to the
earlier direction in Up, Down, Left, Right order. Every tick is synchronous.

Backtracking sits on top of the gated update. A dead end (wall ahead, both
turns stopped) that receives support turns negative, and a unit whose every
continuation is stopped or negative, with at least one negative, copies the
most negative one scaled by backtrack_gain. Negative values never feed
extension or comparators.
"""

from enum import Enum
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..config import OPEN_GATE_OUTPUT, MechanismGains
from ..drc.conv import sigmoid
from ..sokoban.level import ACTIONS, Action, Level, Pos, shift
from ..specs import InterventionMode, InterventionSpec
from .channels import ChannelMap
from .grid import PlanGrid, TraceEvent, TraceKind, refresh_entities

# Gate constants shared with the compiled network
GATE_HOLD = 30.0
J_OPEN = 30.0
STOP_GATE_SCALE = 60.0
WTA_GATE_SCALE = 100.0
COMPARATOR_GAIN = 4e9
TIE_MARGIN = 1e-8
RIVAL_STOP = 1e11

FORGET = float(sigmoid(np.float64(-GATE_HOLD)))
INPUT = float(np.tanh(GATE_HOLD))
BACKWARD_SEED_SPAN = 3


class Mechanism(Enum):
    LPE = "lpe"
    TPE = "tpe"
    STOP = "stop"
    BACKTRACK = "backtrack"
    WTA = "wta"
    TRANSFER = "transfer"
    AGENT = "agent"


ENGINE_MECHANISMS: FrozenSet[Mechanism] = frozenset(Mechanism)
# Mechanisms the compiled single-layer network realizes
COMPILED_MECHANISMS: FrozenSet[Mechanism] = frozenset(
    {Mechanism.LPE, Mechanism.TPE, Mechanism.STOP, Mechanism.WTA}
)


def read_neighbor(x: np.ndarray, action: Action) -> np.ndarray:
    """y[s] = x[s + delta(action)], zero outside the grid."""
    dr, dc = action.delta
    height, width = x.shape[:2]
    pad = ((1, 1), (1, 1)) + ((0, 0),) * (x.ndim - 2)
    padded = np.pad(x, pad)
    return padded[1 + dr : 1 + dr + height, 1 + dc : 1 + dc + width]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=512)
def free_mask(level: Level) -> np.ndarray:
    """(H, W) ones on open squares without a box."""
    mask = np.zeros((level.height, level.width))
    for r in range(level.height):
        for c in range(level.width):
            mask[r, c] = 1.0 if level.is_free((r, c)) else 0.0
    return _frozen(mask)


@lru_cache(maxsize=512)
def stop_mask(level: Level) -> np.ndarray:
    """
    (H, W, 4) ones where pushing a box from the square in that direction is
    impossible: the square is a wall or an open target, the agent side is a
    wall, or the square ahead is a wall or holds a box.
    """
    mask = np.zeros((level.height, level.width, 4))
    open_targets = level.open_targets
    for r in range(level.height):
        for c in range(level.width):
            square = (r, c)
            for action in ACTIONS:
                ahead = shift(square, action)
                behind = shift(square, action.opposite)
                if (
                    not level.is_open(square)
                    or square in open_targets
                    or not level.is_free(ahead)
                    or not level.is_open(behind)
                ):
                    mask[r, c, action.value] = 1.0
    return _frozen(mask)


@lru_cache(maxsize=512)
def dead_end_mask(level: Level) -> np.ndarray:
    """
    (H, W, 4) ones on dead ends: an open square that is not a target, with a
    wall straight ahead and both turns stopped.
    """
    stop = stop_mask(level)
    mask = np.zeros_like(stop)
    for r in range(level.height):
        for c in range(level.width):
            square = (r, c)
            if not level.is_open(square) or square in level.targets:
                continue
            for action in ACTIONS:
                if level.is_open(shift(square, action)):
                    continue
                turns = [other for other in ACTIONS if action.is_orthogonal(other)]
                if all(stop[r, c, other.value] for other in turns):
                    mask[r, c, action.value] = 1.0
    return _frozen(mask)


@lru_cache(maxsize=512)
def seed_mask(level: Level, forward: bool = True, backward: bool = True, local: bool = False) -> np.ndarray:
    """
    (H, W, 4) seed indicators.

    Forward seeds mark each unplaced box in every direction it can be pushed
    from a square the agent can reach. With ``local`` the agent's reach is
    replaced by what a 3×3 neighbourhood shows: the square behind is free
    and the square ahead is free and not the agent. Backward seeds mark, for
    every open target and direction d, up to three open squares lying
    against d from it.
    """
    mask = np.zeros((level.height, level.width, 4))
    reachable = level.reachable()
    for box in level.unplaced_boxes if forward else ():
        for action in ACTIONS:
            ahead = shift(box, action)
            behind = shift(box, action.opposite)
            if local:
                legal = level.is_free(ahead) and ahead != level.agent_pos and level.is_free(behind)
            else:
                legal = level.is_free(ahead) and behind in reachable
            if legal:
                mask[box[0], box[1], action.value] = 1.0
    for target in level.open_targets if backward else ():
        for action in ACTIONS:
            for k in range(1, BACKWARD_SEED_SPAN + 1):
                square = shift(target, action.opposite, k)
                if not level.is_open(square):
                    break
                mask[square[0], square[1], action.value] = 1.0
    return _frozen(mask)


def extension_drive(
    h: np.ndarray, gains: MechanismGains, mechanisms: FrozenSet[Mechanism]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear and turn drives (H, W, 4) from box outputs h = a/a_max.

    Linear taps read the same direction one square behind and one ahead.
    Turn taps read each orthogonal direction one square behind along it
    (the chain turns into d here) and one square ahead along d (the chain
    turns off after the move).
    """
    positive = np.maximum(h, 0.0)
    linear = np.zeros_like(h)
    turn = np.zeros_like(h)
    for action in ACTIONS:
        d = action.value
        if Mechanism.LPE in mechanisms:
            own = positive[:, :, d]
            linear[:, :, d] = gains.linear_weight * (
                read_neighbor(own, action.opposite) + read_neighbor(own, action)
            )
        if Mechanism.TPE in mechanisms:
            for other in ACTIONS:
                if not action.is_orthogonal(other):
                    continue
                channel = positive[:, :, other.value]
                turn[:, :, d] += gains.turn_weight * (
                    read_neighbor(channel, other.opposite) + read_neighbor(channel, action)
                )
    return linear, turn


def tie_matrix() -> np.ndarray:
    """(4, 4) margin [rival, direction]: positive when the rival comes first."""
    margin = np.zeros((4, 4))
    for rival in range(4):
        for target in range(4):
            if rival != target:
                margin[rival, target] = TIE_MARGIN if rival < target else -TIE_MARGIN
    return margin


def compare_directions(
    drive: np.ndarray, strength: np.ndarray, stop: np.ndarray, previous: np.ndarray
) -> np.ndarray:
    """
    Comparator cells (H, W, 4, 4) indexed [rival, direction].

    The comparator for (rival, d) is a ConvLSTM unit whose input gate is
    tanh(K·strength[rival]) and whose j gate is
    sigmoid(K·(drive[rival] - drive[d] + tie) - RIVAL_STOP·stop[rival]).
    """
    margin = tie_matrix()
    cells = np.zeros_like(previous)
    for rival in range(4):
        i = np.tanh(COMPARATOR_GAIN * strength[:, :, rival])
        for d in range(4):
            if rival == d:
                continue
            pre = (
                COMPARATOR_GAIN * (drive[:, :, rival] - drive[:, :, d])
                + COMPARATOR_GAIN * margin[rival, d]
                - RIVAL_STOP * stop[:, :, rival]
            )
            cells[:, :, rival, d] = FORGET * previous[:, :, rival, d] + i * sigmoid(pre)
    return cells


def box_gate(
    stop: np.ndarray, rivals: np.ndarray, gains: MechanismGains, mechanisms: FrozenSet[Mechanism]
) -> np.ndarray:
    """j gate (H, W, 4) of the box units from the stop mask and last tick's comparator cells."""
    pre = J_OPEN + STOP_GATE_SCALE * gains.stop_gain * stop
    if Mechanism.WTA in mechanisms:
        beaten = np.tanh(rivals).sum(axis=2) / OPEN_GATE_OUTPUT
        pre = pre - WTA_GATE_SCALE * gains.wta_inhibit * beaten
    return sigmoid(pre)


def init_plan(
    level: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
    seeds: Optional[np.ndarray] = None,
    mechanisms: FrozenSet[Mechanism] = ENGINE_MECHANISMS,
) -> PlanGrid:
    """
    Fresh grid with entity channels set and seeded squares at seed_gain.

    This is the seeding tick run on an empty grid: only the seed drive
    reaches the box units and no comparator has fired yet.

    Args:
        level: Level the plan is for
        channel_map: Channel layout
        gains: Mechanism gains
        seeds: Optional (H, W, 4) seed mask replacing the level-derived one
        mechanisms: Mechanisms whose masks apply

    Returns:
        PlanGrid at tick 0
    """
    grid = PlanGrid.empty(level.height, level.width, channel_map.channels)
    grid = refresh_entities(grid, level, channel_map)
    mask = seed_mask(level) if seeds is None else seeds
    stop = stop_mask(level) if Mechanism.STOP in mechanisms else np.zeros_like(mask)
    drive = gains.seed_drive * mask
    box_short = list(channel_map.box_short)
    cells = INPUT * box_gate(stop, grid.rivals, gains, frozenset())
    grid.cells[:, :, box_short] = cells
    grid.acts[:, :, box_short] = gains.a_max * np.tanh(drive) * np.tanh(cells)
    grid.drive = drive
    if Mechanism.WTA in mechanisms:
        grid.rivals = compare_directions(drive, drive, stop, grid.rivals)
    return grid


def force_abs_spec(squares: Sequence[Pos], channel_map: ChannelMap) -> InterventionSpec:
    """Intervention replacing short-term box activations by their absolute value."""
    return InterventionSpec(
        target="plan",
        channels=tuple(channel_map.box_short),
        squares=tuple(squares),
        mode=InterventionMode.ABS,
    )


def split_interventions(
    interventions: Sequence[InterventionSpec], channel_map: ChannelMap
) -> Tuple[List[InterventionSpec], List[InterventionSpec]]:
    """(grid-stage, readout-stage) plan interventions; readout ones address GNA/PNA only."""
    readout_channels = set(channel_map.gna) | set(channel_map.pna)
    grid_stage: List[InterventionSpec] = []
    readout_stage: List[InterventionSpec] = []
    for spec in interventions:
        if spec.target != "plan":
            continue
        if spec.channels and set(spec.channels) <= readout_channels:
            readout_stage.append(spec)
        else:
            grid_stage.append(spec)
    return grid_stage, readout_stage


def dead_branches(
    h: np.ndarray,
    drive: np.ndarray,
    level: Level,
    gains: MechanismGains,
    mechanisms: FrozenSet[Mechanism],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Negative values (H, W, 4) and the mask of units holding one.

    Args:
        h: Box outputs a/a_max from the previous tick
        drive: Drive the box units received on the previous tick
        level: Current level
        gains: Mechanism gains
        mechanisms: Enabled mechanisms; extension taps decide what arrives

    Returns:
        (values, mask) where values are only meaningful under the mask
    """
    stop = stop_mask(level)
    sources = dead_end_mask(level) > 0
    arriving = np.tanh(np.maximum(drive, 0.0))
    support = np.zeros_like(h)
    for action in ACTIONS:
        d = action.value
        if Mechanism.LPE in mechanisms:
            support[:, :, d] += gains.linear_weight * read_neighbor(arriving[:, :, d], action.opposite)
        if Mechanism.TPE in mechanisms:
            for other in ACTIONS:
                if action.is_orthogonal(other):
                    support[:, :, d] += gains.turn_weight * read_neighbor(arriving[:, :, other.value], other.opposite)
    latched = np.minimum(h, 0.0)
    source_values = np.minimum(latched, -OPEN_GATE_OUTPUT * np.tanh(gains.dead_end_gain * support))

    values = np.zeros_like(h)
    propagated = np.zeros_like(h, dtype=bool)
    for action in ACTIONS:
        d = action.value
        continuations = [action] + [other for other in ACTIONS if action.is_orthogonal(other)]
        ahead = np.stack([read_neighbor(h[:, :, k.value], action) for k in continuations], axis=-1)
        ahead_stop = np.stack([read_neighbor(stop[:, :, k.value], action) for k in continuations], axis=-1)
        blocked = (ahead_stop > 0) | (ahead < 0)
        dead = blocked.all(axis=-1) & (ahead < 0).any(axis=-1) & (stop[:, :, d] == 0)
        propagated[:, :, d] = dead
        values[:, :, d] = np.maximum(-OPEN_GATE_OUTPUT, gains.backtrack_gain * ahead.min(axis=-1))

    values = np.where(sources, source_values, values)
    mask = (sources & (source_values < 0)) | propagated
    return values, mask


def agent_update(acts: np.ndarray, level: Level, channel_map: ChannelMap, gains: MechanismGains) -> np.ndarray:
    """
    New agent_short activations (H, W, 4).

    Each box square's short-term activation for d is copied one square
    against d, onto the square the agent pushes from. From there a
    max-wavefront spreads over free squares, attenuated by agent_decay per
    square; agent_short[d] at x holds the value of stepping d from x.
    """
    box_short = np.maximum(acts[:, :, list(channel_map.box_short)], 0.0)
    agent = acts[:, :, list(channel_map.agent_short)]
    value = np.maximum(agent.max(axis=2), 0.0)
    free = free_mask(level)

    out = np.zeros_like(agent)
    for action in ACTIONS:
        d = action.value
        out[:, :, d] = gains.agent_decay * read_neighbor(value * free, action) * free
    for box in level.boxes:
        for action in ACTIONS:
            push_from = shift(box, action.opposite)
            if level.is_free(push_from):
                r, c = push_from
                out[r, c, action.value] = max(out[r, c, action.value], box_short[box[0], box[1], action.value])
    return out


def transfer_long_to_short(
    grid: PlanGrid,
    channel_map: ChannelMap,
    gains: MechanismGains,
    executed: Optional[Tuple[Pos, Action]] = None,
) -> Tuple[PlanGrid, List[Tuple[Pos, int]]]:
    """
    Move long-term activations into the short-term channel where nothing
    else holds the square.

    A long-term activation at or above threshold stays put while another
    short-term direction at that square is active. Once that square's short
    channels are all below threshold, the long value becomes the short value
    and leaves the long channel.

    Args:
        grid: Grid to update
        channel_map: Channel layout
        gains: Mechanism gains
        executed: (square, direction) whose short activation was just used up

    Returns:
        (updated grid, list of (square, short channel) that received a transfer)
    """
    out = grid.copy()
    short_idx = list(channel_map.box_short)
    long_idx = list(channel_map.box_long)
    if executed is not None:
        (r, c), action = executed
        out.acts[r, c, short_idx[action.value]] = 0.0

    moved: List[Tuple[Pos, int]] = []
    long = out.acts[:, :, long_idx]
    if not (long >= gains.threshold).any():
        return out, moved
    short = out.acts[:, :, short_idx]
    for r, c, d in zip(*np.nonzero(long >= gains.threshold)):
        rivals = [k for k in range(4) if k != d]
        if (short[r, c, rivals] >= gains.threshold).any():
            continue
        value = long[r, c, d]
        if value > short[r, c, d]:
            out.acts[r, c, short_idx[d]] = value
        out.acts[r, c, long_idx[d]] = 0.0
        moved.append(((int(r), int(c)), short_idx[d]))
    return out, moved


def tick_plan(
    grid: PlanGrid,
    level: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
    mechanisms: FrozenSet[Mechanism] = ENGINE_MECHANISMS,
    interventions: Sequence[InterventionSpec] = (),
    seeds: Optional[np.ndarray] = None,
) -> Tuple[PlanGrid, List[TraceEvent]]:
    """
    One synchronous update of every plan channel.

    Handles:
    - Seed drive, linear and turn extension into each short-term box unit
    - Stopping by closing the j gate where a push is illegal
    - Winner-takes-all through comparators fired on the previous tick
    - Backtracking from dead ends along chains with no live continuation
    - Long-term decay and long->short transfer
    - The agent approach wavefront
    - Grid-stage plan interventions (for example force-abs) after the update

    Returns:
        (new grid, trace events for every short-term change of at least
        half the threshold and every unit that just turned negative)
    """
    box_short = list(channel_map.box_short)
    box_long = list(channel_map.box_long)
    tick = grid.tick_index
    grid = refresh_entities(grid, level, channel_map)
    before = grid.acts[:, :, box_short].copy()
    h = before / gains.a_max

    seed = seed_mask(level) if seeds is None else seeds
    stop = stop_mask(level) if Mechanism.STOP in mechanisms else np.zeros_like(h)
    seed_drive = gains.seed_drive * seed
    linear, turn = extension_drive(h, gains, mechanisms)
    drive = seed_drive + linear + turn

    j = box_gate(stop, grid.rivals, gains, mechanisms)
    cells = FORGET * grid.cells[:, :, box_short] + INPUT * j
    outputs = np.tanh(drive) * np.tanh(cells)

    dead = np.zeros_like(h, dtype=bool)
    if Mechanism.BACKTRACK in mechanisms and Mechanism.STOP in mechanisms:
        values, dead = dead_branches(h, grid.drive, level, gains, mechanisms)
        outputs = np.where(dead, values, outputs)

    out = grid.copy()
    out.cells[:, :, box_short] = cells
    out.acts[:, :, box_short] = gains.a_max * outputs
    out.drive = drive
    if Mechanism.WTA in mechanisms:
        strength = np.where(dead, 0.0, drive)
        out.rivals = compare_directions(drive, strength, stop, grid.rivals)

    if Mechanism.AGENT in mechanisms:
        out.acts[:, :, list(channel_map.agent_short)] = agent_update(grid.acts, level, channel_map, gains)

    transferred: List[Tuple[Pos, int]] = []
    if Mechanism.TRANSFER in mechanisms:
        out.acts[:, :, box_long] = gains.long_decay * grid.acts[:, :, box_long]
        out, transferred = transfer_long_to_short(out, channel_map, gains)

    grid_stage, _ = split_interventions(interventions, channel_map)
    if grid_stage:
        for spec in grid_stage:
            if spec.applies("plan", 0, tick):
                out.acts = spec.apply(out.acts)
        plan_channels = box_short + box_long
        out.acts[:, :, plan_channels] = np.clip(out.acts[:, :, plan_channels], -gains.a_max, gains.a_max)

    out.tick_index = tick + 1
    contributions = {
        TraceKind.SEED: seed_drive,
        TraceKind.EXTEND_LINEAR: linear,
        TraceKind.EXTEND_TURN: turn,
    }
    beaten = j < 0.5
    events = _attribute(
        before,
        out.acts[:, :, box_short],
        contributions,
        stop,
        beaten,
        dead,
        transferred,
        channel_map,
        gains,
        tick,
    )
    return out, events


def _attribute(
    before: np.ndarray,
    after: np.ndarray,
    contributions: Dict[TraceKind, np.ndarray],
    stop: np.ndarray,
    closed: np.ndarray,
    dead: np.ndarray,
    transferred: List[Tuple[Pos, int]],
    channel_map: ChannelMap,
    gains: MechanismGains,
    tick: int,
) -> List[TraceEvent]:
    """One event per short-term change of at least threshold/2 or new negative value."""
    delta = after - before
    turned_negative = (after < 0) & (before >= 0)
    moved = {(square, channel) for square, channel in transferred}
    kinds = list(contributions)
    stacked = np.stack([contributions[kind] for kind in kinds], axis=-1)
    events: List[TraceEvent] = []
    for r, c, d in zip(*np.nonzero((np.abs(delta) >= gains.threshold / 2.0) | turned_negative)):
        square = (int(r), int(c))
        channel = channel_map.box_short[d]
        if (square, channel) in moved:
            kind = TraceKind.TRANSFER
        elif turned_negative[r, c, d] or (dead[r, c, d] and after[r, c, d] < 0):
            kind = TraceKind.BACKTRACK
        elif stop[r, c, d] > 0:
            kind = TraceKind.STOP
        elif delta[r, c, d] < 0 and closed[r, c, d]:
            kind = TraceKind.WTA_SUPPRESS
        elif delta[r, c, d] > 0:
            kind = kinds[int(np.argmax(stacked[r, c, d]))]
        else:
            kind = TraceKind.EXTEND_LINEAR
        events.append(TraceEvent(kind=kind, square=square, channel=channel, tick=tick))
    return events
