"""
Action readout from the plan grid and the grid update after an action.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..config import MechanismGains
from ..errors import InconsistentTransition
from ..sokoban.engine import step
from ..sokoban.level import ACTIONS, Action, Level
from ..specs import InterventionSpec
from .channels import ChannelMap
from .grid import PlanGrid, refresh_entities
from .mechanisms import split_interventions, transfer_long_to_short

FALLBACK_ACTION = Action.UP


def fallback_action(level: Level) -> Action:
    """The first action in Up, Down, Left, Right order that leaves the level unchanged, else Up."""
    for action in ACTIONS:
        if not step(level, action).moved:
            return action
    return FALLBACK_ACTION


@dataclass(frozen=True)
class Readout:
    action: Action
    no_plan: bool
    pna: Tuple[float, float, float, float]


def readout_action(
    grid: PlanGrid,
    channel_map: ChannelMap,
    level: Level,
    gains: MechanismGains,
    interventions: Sequence[InterventionSpec] = (),
) -> Tuple[Readout, PlanGrid]:
    """
    Pick the next action.

    GNA[d] is (agent_short[d] - box_short[d]) at the agent square and
    -box_short[d] everywhere else, with box values clipped at zero, so only
    the agent's own move survives. PNA[d] is the max of GNA[d] over all
    squares. The action is the PNA argmax, earlier directions winning ties.
    When no PNA value reaches the threshold a harmless fallback (see
    fallback_action) is returned with ``no_plan`` set.

    Interventions addressing only GNA/PNA channels are applied after the
    respective channels are computed.
    """
    out = grid.copy()
    _, readout_stage = split_interventions(interventions, channel_map)
    gna_idx = list(channel_map.gna)
    pna_idx = list(channel_map.pna)

    agent_mask = np.zeros((level.height, level.width, 1))
    agent_mask[level.agent_pos[0], level.agent_pos[1], 0] = 1.0
    agent = out.acts[:, :, list(channel_map.agent_short)]
    box = np.maximum(out.acts[:, :, list(channel_map.box_short)], 0.0)
    out.acts[:, :, gna_idx] = (agent - box) * agent_mask - box * (1.0 - agent_mask)

    tick = grid.tick_index
    for spec in readout_stage:
        if spec.applies("plan", 0, tick) and set(spec.channels) <= set(gna_idx):
            out.acts = spec.apply(out.acts)

    out.acts[:, :, pna_idx] = out.acts[:, :, gna_idx].max(axis=(0, 1))
    for spec in readout_stage:
        if spec.applies("plan", 0, tick) and not set(spec.channels) <= set(gna_idx):
            out.acts = spec.apply(out.acts)

    pna = out.acts[:, :, pna_idx].max(axis=(0, 1))
    best = int(np.argmax(pna))
    no_plan = bool(pna[best] < gains.threshold)
    action = fallback_action(level) if no_plan else ACTIONS[best]
    values = tuple(float(v) for v in pna)
    return Readout(action=action, no_plan=no_plan, pna=values), out  # type: ignore[arg-type]


def apply_transition_update(
    grid: PlanGrid,
    level_before: Level,
    action: Action,
    level_after: Level,
    channel_map: ChannelMap,
    gains: MechanismGains,
) -> PlanGrid:
    """
    Update the grid after ``action`` took ``level_before`` to ``level_after``.

    Handles:
    - Entity channels are refreshed from the new level
    - A push cancels the executed box arrow and clears the agent channels
    - A plain move cancels the agent arrow it used
    - A blocked action leaves the plan untouched

    Raises:
        InconsistentTransition: When the action does not produce level_after
    """
    outcome = step(level_before, action)
    if outcome.level != level_after:
        raise InconsistentTransition(
            f"Action {action.name} does not take the level to the given successor"
        )
    out = refresh_entities(grid, level_after, channel_map)
    if not outcome.moved:
        return out
    if outcome.moved_box is not None:
        out, _ = transfer_long_to_short(out, channel_map, gains, executed=outcome.moved_box)
        out.acts[:, :, list(channel_map.agent_short)] = 0.0
        return out
    r, c = level_before.agent_pos
    out.acts[r, c, channel_map.index("agent_short", action)] = 0.0
    return out
