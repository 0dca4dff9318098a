"""
Closed-loop episodes driven by the mechanism engine.
"""

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence

from loguru import logger

from ..config import MechanismGains
from ..sokoban.engine import step
from ..sokoban.level import Action, Level, actions_to_str
from ..specs import InterventionSpec
from .channels import ChannelMap, default_channel_map
from .grid import PlanGrid, TraceEvent, TraceKind, decode_plan, refresh_entities
from .mechanisms import ENGINE_MECHANISMS, Mechanism, init_plan, tick_plan
from .readout import Readout, apply_transition_update, readout_action


@dataclass
class Episode:
    """
    Record of one run.

    ``levels`` starts with the initial level and gains one entry per executed
    action. ``grids`` holds the grid after each step's readout, preceded by
    the grid at the end of the thinking phase; ``contexts`` holds each step's
    grid before its ticks. Steps where the planner had no usable plan are
    counted in ``n_steps`` and execute the readout's fallback action, which
    leaves the level unchanged. With ``require_connected`` a step whose plan
    does not reach a target executes nothing and ``acted`` is False there.
    """

    level: Level
    levels: List[Level] = field(default_factory=list)
    actions: List[Action] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    grids: List[PlanGrid] = field(default_factory=list)
    events: List[TraceEvent] = field(default_factory=list)
    readouts: List[Readout] = field(default_factory=list)
    contexts: List[PlanGrid] = field(default_factory=list)
    acted: List[bool] = field(default_factory=list)
    n_steps: int = 0
    solved: bool = False

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def idle_steps(self) -> int:
        return self.n_steps - self.n_actions

    @property
    def total_reward(self) -> float:
        return round(sum(self.rewards), 6)

    @property
    def action_string(self) -> str:
        return actions_to_str(self.actions)

    @property
    def final_level(self) -> Level:
        return self.levels[-1] if self.levels else self.level

    def events_of(self, kind: TraceKind) -> List[TraceEvent]:
        return [event for event in self.events if event.kind is kind]


def run_planner(
    level: Level,
    max_steps: int = 120,
    ticks_per_step: int = 3,
    thinking_steps: int = 0,
    gains: Optional[MechanismGains] = None,
    channel_map: Optional[ChannelMap] = None,
    mechanisms: FrozenSet[Mechanism] = ENGINE_MECHANISMS,
    interventions: Sequence[InterventionSpec] = (),
    require_connected: bool = False,
    record_grids: bool = True,
) -> Episode:
    """
    Play a level with the mechanism engine.

    Each step refreshes the entity channels, runs ``ticks_per_step`` ticks,
    reads out an action and, when a plan exists, executes it and applies the
    transition update. ``thinking_steps`` rounds of ticks run before the
    first step.

    Args:
        level: Starting level
        max_steps: Step limit, idle steps included
        ticks_per_step: Ticks before each readout
        thinking_steps: Extra tick rounds before the first action
        gains: Mechanism gains; defaults when omitted
        channel_map: Channel layout; the 32-channel default when omitted
        mechanisms: Mechanisms enabled in tick_plan
        interventions: Plan interventions applied every tick
        require_connected: Only act once a decoded box plan reaches a target
        record_grids: Keep a grid per step in the episode

    Returns:
        Episode, solved when every box ended on a target
    """
    gains = gains or MechanismGains()
    channel_map = channel_map or default_channel_map()
    episode = Episode(level=level, levels=[level])
    grid = init_plan(level, channel_map, gains)

    for _ in range(thinking_steps * ticks_per_step):
        grid, events = tick_plan(grid, level, channel_map, gains, mechanisms, interventions)
        episode.events.extend(events)
    if record_grids:
        episode.grids.append(grid)

    current = level
    while episode.n_steps < max_steps and not current.is_solved:
        grid = refresh_entities(grid, current, channel_map)
        if record_grids:
            episode.contexts.append(grid)
        for _ in range(ticks_per_step):
            grid, events = tick_plan(grid, current, channel_map, gains, mechanisms, interventions)
            episode.events.extend(events)
        readout, grid = readout_action(grid, channel_map, current, gains, interventions)
        episode.readouts.append(readout)
        episode.n_steps += 1
        if record_grids:
            episode.grids.append(grid)

        idle = False
        if require_connected:
            idle = readout.no_plan or not decode_plan(grid, channel_map, gains.threshold).connects(current)
        episode.acted.append(not idle)
        if idle:
            continue

        agent = current.agent_pos
        episode.events.append(
            TraceEvent(
                kind=TraceKind.READOUT,
                square=agent,
                channel=channel_map.index("pna", readout.action),
                tick=grid.tick_index,
            )
        )
        outcome = step(current, readout.action)
        grid = apply_transition_update(grid, current, readout.action, outcome.level, channel_map, gains)
        current = outcome.level
        episode.actions.append(readout.action)
        episode.rewards.append(outcome.reward)
        episode.levels.append(current)

    episode.solved = current.is_solved
    logger.debug(
        f"Episode {level.level_id or '<level>'}: solved={episode.solved} "
        f"actions={episode.n_actions} steps={episode.n_steps}"
    )
    return episode
