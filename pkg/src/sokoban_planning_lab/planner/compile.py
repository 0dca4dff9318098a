"""
Compile the extension, stopping and winner-takes-all mechanisms into a
single-layer DRC(1, N) that plans from the raw observation.

The encoder turns each pixel into four affine colour features. Binary
units (input and output gates held open, forget gate shut) threshold them
into wall, target, agent and blocked channels, and 3×3 Wh2 taps build the
stop, push, backward-reach and seed masks from those over four ticks. A
READY chain of four units keeps the box units closed until the seeds are
valid. From then on the box_short units and the twelve comparator units
follow the engine's gated update exactly, one engine tick per network tick:

    compiled state after COMPILED_LATENCY + k ticks == engine after k ticks

for the engine started with ``seed_mask(level, local=True)`` and run with
COMPILED_MECHANISMS on a level enclosed by walls.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..config import OPEN_GATE_OUTPUT, DrcConfig, MechanismGains
from ..drc.network import LayerState, drc_forward, zero_state
from ..drc.weights import GateKernels, WeightSet
from ..errors import CompilationError
from ..sokoban.level import ACTIONS, Action, Level
from ..sokoban.render import render_rgb
from ..specs import InterventionSpec
from .channels import MIN_CHANNELS, ChannelMap
from .grid import PlanGrid, refresh_entities
from .mechanisms import (
    COMPARATOR_GAIN,
    GATE_HOLD,
    J_OPEN,
    RIVAL_STOP,
    STOP_GATE_SCALE,
    WTA_GATE_SCALE,
    tie_matrix,
)

COMPILE_SCOPES = ("extension_stopping_wta",)
COMPILED_LATENCY = 5
COMPILED_PLAN_TICKS = 8
COMPILED_CHANNELS = 64

COLOUR_GAIN = 1000.0
MASK_GAIN = 100.0
READY_CLOSE = 100.0
READY_VETO = 1e11
MIN_GATE_MARGIN = 20.0

Delta = Tuple[int, int]
CENTRE: Delta = (0, 0)

# Encoder features as (R, G, B) weights and an offset, in 1/255 colour units.
# wall: black only; blocked: wall or box; target: any target square; agent: the agent
FEATURES: Tuple[Tuple[str, Tuple[float, float, float], float], ...] = (
    ("wall", (-1.0, -1.0, -1.0), 150.0),
    ("blocked", (0.0, -1.0, -1.0), 214.0),
    ("target", (1.0, 0.0, -0.5), -160.0),
    ("agent", (0.0, 1.0, -1.0), -100.0),
)


@dataclass(frozen=True)
class CompiledLayout:
    """Channels of the compiled network beyond the planner's own layout."""

    wall: int
    target: int
    box: int
    agent: int
    blocked: int
    stop: Tuple[int, int, int, int]
    push: Tuple[int, int, int, int]
    reach1: Tuple[int, int, int, int]
    reach2: Tuple[int, int, int, int]
    seed: Tuple[int, int, int, int]
    ready: Tuple[int, int, int, int]
    # (rival, direction) -> channel
    comparators: Tuple[Tuple[Tuple[int, int], int], ...]

    def comparator(self, rival: int, direction: int) -> int:
        return dict(self.comparators)[(rival, direction)]

    @property
    def comparator_channels(self) -> List[int]:
        return [channel for _, channel in self.comparators]


def _four(spare: List[int]) -> Tuple[int, int, int, int]:
    return (spare.pop(0), spare.pop(0), spare.pop(0), spare.pop(0))


def compiled_layout(channel_map: ChannelMap) -> CompiledLayout:
    """
    Assign the perception, mask, READY and comparator channels from the spare range.

    Raises:
        CompilationError: When the map has too few spare channels
    """
    needed = 1 + 4 * 6 + 12
    spare = channel_map.spare
    if len(spare) < needed:
        raise CompilationError(
            f"Compilation needs {MIN_CHANNELS + needed} channels ({needed} spare), map has {channel_map.channels}"
        )
    blocked = spare.pop(0)
    stop, push, reach1, reach2, seed, ready = (_four(spare) for _ in range(6))
    pairs = [(rival, d) for d in range(4) for rival in range(4) if rival != d]
    comparators = tuple((pair, spare.pop(0)) for pair in pairs)
    return CompiledLayout(
        wall=channel_map.entity("wall"),
        target=channel_map.entity("target"),
        box=channel_map.entity("box"),
        agent=channel_map.entity("agent"),
        blocked=blocked,
        stop=stop,
        push=push,
        reach1=reach1,
        reach2=reach2,
        seed=seed,
        ready=ready,
        comparators=comparators,
    )


def _tap(kernel: np.ndarray, delta: Delta, in_channel: int, out_channel: int, value: float) -> None:
    """Add ``value`` to the Wh2 tap reading the input at s + delta."""
    dr, dc = delta
    kernel[1 + dr, 1 + dc, in_channel, out_channel] += value


def _binary_unit(gates: Dict[str, GateKernels], channel: int, bias: float) -> None:
    """Memoryless unit whose output is κ when its j pre-activation is positive and 0 otherwise."""
    gates["i"].bias[channel] = GATE_HOLD
    gates["f"].bias[channel] = -GATE_HOLD
    gates["o"].bias[channel] = GATE_HOLD
    gates["j"].bias[channel] = MASK_GAIN * bias


def _read(gates: Dict[str, GateKernels], terms: Sequence[Tuple[float, int, Delta]], out: int) -> None:
    """Add MASK_GAIN·weight·b(s + delta) to the j gate of ``out`` for each term, with b = h/κ."""
    for weight, channel, delta in terms:
        _tap(gates["j"].Wh2, delta, channel, out, MASK_GAIN * weight / OPEN_GATE_OUTPUT)


def _drive_taps(kernel: np.ndarray, layout: CompiledLayout, box_short: Sequence[int], action: Action,
                out: int, gains: MechanismGains, scale: float = 1.0) -> None:
    """Taps that sum the engine's drive X for ``action`` into ``out``, times ``scale``."""
    d = action.value
    _tap(kernel, CENTRE, layout.seed[d], out, scale * gains.seed_drive / OPEN_GATE_OUTPUT)
    _tap(kernel, action.opposite.delta, box_short[d], out, scale * gains.linear_weight)
    _tap(kernel, action.delta, box_short[d], out, scale * gains.linear_weight)
    for other in ACTIONS:
        if action.is_orthogonal(other):
            _tap(kernel, other.opposite.delta, box_short[other.value], out, scale * gains.turn_weight)
            _tap(kernel, action.delta, box_short[other.value], out, scale * gains.turn_weight)


def _check_gains(gains: MechanismGains) -> None:
    stop_drive = STOP_GATE_SCALE * gains.stop_gain
    if stop_drive > -(J_OPEN + MIN_GATE_MARGIN):
        raise CompilationError(
            f"stop_gain {gains.stop_gain} gives a gate drive of {stop_drive:.1f}; at most "
            f"{-(J_OPEN + MIN_GATE_MARGIN) / STOP_GATE_SCALE:.3f} is needed to close the gates"
        )
    inhibition = WTA_GATE_SCALE * gains.wta_inhibit
    if 0.0 < inhibition < J_OPEN + MIN_GATE_MARGIN:
        raise CompilationError(
            f"wta_inhibit {gains.wta_inhibit} cannot close a beaten unit; use 0 or at least "
            f"{(J_OPEN + MIN_GATE_MARGIN) / WTA_GATE_SCALE:.3f}"
        )


def _encoder(weights: WeightSet) -> Dict[str, int]:
    """Centre-tap encoder writing the colour features into e channels 0..3."""
    index = {}
    for k, (name, rgb, offset) in enumerate(FEATURES):
        weights.enc_w1[1, 1, :, k] = rgb
        weights.enc_b1[k] = offset / 255.0
        weights.enc_w2[2, 2, k, k] = 1.0
        index[name] = k
    return index


def compile_to_weights(
    channel_map: ChannelMap,
    gains: MechanismGains,
    scope: str = "extension_stopping_wta",
) -> WeightSet:
    """
    Emit DRC(1, N) weights whose box_short channels follow the engine's
    seeding, LPE, TPE, STOP and WTA update.

    Args:
        channel_map: Channel layout; needs 37 spare channels
        gains: Mechanism gains to compile
        scope: Mechanism scope; only "extension_stopping_wta"

    Returns:
        WeightSet without a head, ticking COMPILED_LATENCY + COMPILED_PLAN_TICKS per step

    Raises:
        CompilationError: Unknown scope, too few spare channels, or a
            stop_gain or wta_inhibit too weak to close the gates
    """
    if scope not in COMPILE_SCOPES:
        raise CompilationError(f"Unknown compile scope '{scope}'. Expected one of: {', '.join(COMPILE_SCOPES)}")
    layout = compiled_layout(channel_map)
    _check_gains(gains)

    config = DrcConfig(layers=1, ticks=COMPILED_LATENCY + COMPILED_PLAN_TICKS, channels=channel_map.channels)
    weights = WeightSet.zeros(config, with_head=False)
    gates = weights.layers[0].gates
    features = _encoder(weights)

    # colour thresholds, valid after one tick
    for name, channel in (("wall", layout.wall), ("target", layout.target), ("agent", layout.agent),
                          ("blocked", layout.blocked)):
        _binary_unit(gates, channel, 0.0)
        gates["j"].We[1, 1, features[name], channel] = COLOUR_GAIN

    W, T, B, A = layout.wall, layout.target, layout.blocked, layout.agent
    _binary_unit(gates, layout.box, -0.5)
    _read(gates, [(1.0, B, CENTRE), (-1.0, W, CENTRE)], layout.box)

    for action in ACTIONS:
        d = action.value
        ahead, behind = action.delta, action.opposite.delta

        _binary_unit(gates, layout.stop[d], -1.5)
        _read(gates, [(3.0, W, CENTRE), (2.0, T, CENTRE), (-1.0, B, CENTRE), (3.0, B, ahead), (3.0, W, behind)],
              layout.stop[d])

        _binary_unit(gates, layout.push[d], -0.5)
        _read(gates, [(1.0, B, CENTRE), (-1.0, W, CENTRE), (-1.0, T, CENTRE), (-1.0, B, ahead), (-1.0, A, ahead),
                      (-1.0, B, behind)], layout.push[d])

        # open square with an open target up to one, two or three squares ahead
        _binary_unit(gates, layout.reach1[d], -0.5)
        _read(gates, [(-1.0, W, CENTRE), (1.0, T, ahead), (-1.0, B, ahead)], layout.reach1[d])
        _binary_unit(gates, layout.reach2[d], -0.5)
        _read(gates, [(-3.0, W, CENTRE), (1.0, T, ahead), (-1.0, B, ahead), (2.0, layout.reach1[d], ahead)],
              layout.reach2[d])
        _binary_unit(gates, layout.seed[d], -0.5)
        _read(gates, [(3.0, layout.push[d], CENTRE), (-3.0, W, CENTRE), (1.0, T, ahead), (-1.0, B, ahead),
                      (2.0, layout.reach2[d], ahead)], layout.seed[d])

    _binary_unit(gates, layout.ready[0], 0.5)
    for k in range(1, 4):
        _binary_unit(gates, layout.ready[k], -0.5)
        _read(gates, [(1.0, layout.ready[k - 1], CENTRE)], layout.ready[k])
    ready = layout.ready[3]

    box_short = channel_map.box_short
    for action in ACTIONS:
        d = action.value
        out = box_short[d]
        gates["i"].bias[out] = GATE_HOLD
        gates["f"].bias[out] = -GATE_HOLD
        _drive_taps(gates["o"].Wh2, layout, box_short, action, out, gains)
        gates["j"].bias[out] = J_OPEN - READY_CLOSE
        _tap(gates["j"].Wh2, CENTRE, ready, out, READY_CLOSE / OPEN_GATE_OUTPUT)
        _tap(gates["j"].Wh2, CENTRE, layout.stop[d], out, STOP_GATE_SCALE * gains.stop_gain / OPEN_GATE_OUTPUT)
        for rival in ACTIONS:
            if rival is not action:
                _tap(gates["j"].Wh2, CENTRE, layout.comparator(rival.value, d), out,
                     -WTA_GATE_SCALE * gains.wta_inhibit / OPEN_GATE_OUTPUT)

    margin = tie_matrix()
    for (rival, d), out in layout.comparators:
        gates["f"].bias[out] = -GATE_HOLD
        gates["o"].bias[out] = GATE_HOLD
        _drive_taps(gates["i"].Wh2, layout, box_short, ACTIONS[rival], out, gains, scale=COMPARATOR_GAIN)
        _drive_taps(gates["j"].Wh2, layout, box_short, ACTIONS[rival], out, gains, scale=COMPARATOR_GAIN)
        _drive_taps(gates["j"].Wh2, layout, box_short, ACTIONS[d], out, gains, scale=-COMPARATOR_GAIN)
        _tap(gates["j"].Wh2, CENTRE, layout.stop[rival], out, -RIVAL_STOP / OPEN_GATE_OUTPUT)
        _tap(gates["j"].Wh2, CENTRE, ready, out, READY_VETO / OPEN_GATE_OUTPUT)
        gates["j"].bias[out] = COMPARATOR_GAIN * margin[rival, d] - READY_VETO
    return weights


def state_to_grid(
    state: LayerState,
    level: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
    tick_index: int = 0,
) -> PlanGrid:
    """PlanGrid view of a compiled network state: box_short scaled by a_max, comparator cells as rivals."""
    layout = compiled_layout(channel_map)
    grid = PlanGrid.empty(level.height, level.width, channel_map.channels)
    box_short = list(channel_map.box_short)
    grid.acts[:, :, box_short] = gains.a_max * state.h[:, :, box_short]
    grid.cells[:, :, box_short] = state.c[:, :, box_short]
    for (rival, d), channel in layout.comparators:
        grid.rivals[:, :, rival, d] = state.c[:, :, channel]
    grid.tick_index = tick_index
    return refresh_entities(grid, level, channel_map)


def compiled_trajectory(
    weights: WeightSet,
    level: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
    ticks: int,
    interventions: Sequence[InterventionSpec] = (),
) -> List[PlanGrid]:
    """
    Plan grids after COMPILED_LATENCY, COMPILED_LATENCY + 1, ... ``ticks``
    ticks from the zero state; entry k lines up with engine tick k.
    """
    if ticks < COMPILED_LATENCY:
        raise ValueError(f"ticks must be at least {COMPILED_LATENCY}, got {ticks}")
    states = zero_state(1, weights.channels, level.height, level.width)
    result = drc_forward(states, render_rgb(level), weights, ticks=ticks, interventions=interventions, record=True)
    grids = []
    for record in result.records[COMPILED_LATENCY - 1 :]:
        state = LayerState(h=record.h, c=record.c)
        grids.append(state_to_grid(state, level, channel_map, gains, tick_index=record.tick + 1 - COMPILED_LATENCY))
    return grids


def run_compiled(
    weights: WeightSet,
    level: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
    ticks: int,
    interventions: Sequence[InterventionSpec] = (),
) -> PlanGrid:
    """Run compiled weights for ``ticks`` ticks from the zero state and return the plan grid."""
    if ticks < 1:
        raise ValueError("ticks must be at least 1")
    states = zero_state(1, weights.channels, level.height, level.width)
    result = drc_forward(states, render_rgb(level), weights, ticks=ticks, interventions=interventions)
    return state_to_grid(result.states[0], level, channel_map, gains, tick_index=max(ticks - COMPILED_LATENCY, 0))
