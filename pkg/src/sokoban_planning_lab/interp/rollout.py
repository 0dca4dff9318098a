"""
Closed-loop episodes driven by DRC weights.

Weights with an MLP head act by the policy-logit argmax. Compiled planner
weights carry no head: every step starts from the zero state on the current
observation, the box_short channels are read into a plan grid, the agent
wavefront is run to a fixed point and the planner readout picks the action.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from ..config import MechanismGains
from ..drc.network import ForwardResult, LayerState, Replacements, drc_forward, zero_state
from ..drc.weights import WeightSet
from ..errors import AblationSourceError, SolverMismatch
from ..planner.channels import ChannelMap, default_channel_map
from ..planner.compile import state_to_grid
from ..planner.grid import PlanGrid
from ..planner.mechanisms import agent_update
from ..planner.readout import Readout, readout_action
from ..planner.runner import Episode
from ..sokoban.engine import step
from ..sokoban.level import ACTIONS, Level
from ..sokoban.render import render_rgb
from ..specs import AblationMode, AblationSpec, InterventionSpec


class DrcPolicy:
    """Acting wrapper around a WeightSet."""

    def __init__(
        self,
        weights: WeightSet,
        gains: Optional[MechanismGains] = None,
        channel_map: Optional[ChannelMap] = None,
        ticks: Optional[int] = None,
    ):
        self.weights = weights
        self.gains = gains or MechanismGains()
        self.ticks = weights.config.ticks if ticks is None else ticks
        self.channel_map = None
        if self.compiled:
            self.channel_map = channel_map or default_channel_map(weights.channels)
            if self.channel_map.channels != weights.channels or len(weights.layers) != 1:
                raise SolverMismatch(
                    f"Headless weights act through the plan readout and need one layer with "
                    f"{self.channel_map.channels} channels; got {len(weights.layers)} layers of {weights.channels}"
                )

    @property
    def compiled(self) -> bool:
        return self.weights.head is None

    def initial_state(self, level: Level) -> List[LayerState]:
        return zero_state(len(self.weights.layers), self.weights.channels, level.height, level.width)

    def prepare(self, states: List[LayerState], level: Level) -> List[LayerState]:
        """State to start a step on ``level`` from."""
        if self.compiled:
            return self.initial_state(level)
        return states

    def forward(
        self,
        states: List[LayerState],
        level: Level,
        interventions: Sequence[InterventionSpec] = (),
        replacements: Optional[Replacements] = None,
        record: bool = False,
    ) -> ForwardResult:
        return drc_forward(
            states,
            render_rgb(level),
            self.weights,
            ticks=self.ticks,
            interventions=interventions,
            replacements=replacements,
            record=record,
        )

    def plan_grid(self, result: ForwardResult, level: Level) -> PlanGrid:
        """Plan grid of a compiled forward pass, agent channels at their fixed point."""
        grid = state_to_grid(result.states[0], level, self.channel_map, self.gains)
        agent = list(self.channel_map.agent_short)
        for _ in range(level.height * level.width):
            new = agent_update(grid.acts, level, self.channel_map, self.gains)
            if np.array_equal(new, grid.acts[:, :, agent]):
                break
            grid.acts[:, :, agent] = new
        return grid

    def choose(self, result: ForwardResult, level: Level, interventions: Sequence[InterventionSpec] = ()) -> Readout:
        if not self.compiled:
            logits = result.logits
            best = int(np.argmax(logits))
            return Readout(action=ACTIONS[best], no_plan=False, pna=tuple(float(v) for v in logits))
        readout, _ = readout_action(self.plan_grid(result, level), self.channel_map, level, self.gains, interventions)
        return readout


@dataclass
class DrcStep:
    """One step: the state it started from, the state it ended in and what was done."""

    level: Level
    context: List[LayerState]
    states: List[LayerState]
    readout: Readout
    acted: bool
    action_index: int


@dataclass
class DrcEpisode:
    episode: Episode
    steps: List[DrcStep] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.episode.solved


def cache_state(policy: DrcPolicy, previous: Level, replacements: Optional[Replacements] = None) -> List[LayerState]:
    """State after one full step from the initial state on the previous observation."""
    return policy.forward(policy.initial_state(previous), previous, replacements=replacements).states


def _apply_cache(states: List[LayerState], cached: List[LayerState], spec: AblationSpec) -> List[LayerState]:
    if spec.tensor not in ("h", "c"):
        raise AblationSourceError(f"cache_1step replaces h or c, not '{spec.tensor}'")
    if not 0 <= spec.layer < len(states):
        raise AblationSourceError(f"Layer {spec.layer} out of range 0..{len(states) - 1}")
    out = [state.copy() for state in states]
    channels = list(spec.channels) if spec.channels else slice(None)
    target = getattr(out[spec.layer], spec.tensor)
    target[:, :, channels] = getattr(cached[spec.layer], spec.tensor)[:, :, channels]
    return out


def run_drc(
    policy: DrcPolicy,
    level: Level,
    max_steps: int = 120,
    thinking_steps: int = 0,
    interventions: Sequence[InterventionSpec] = (),
    replacements: Optional[Replacements] = None,
    cache: Optional[AblationSpec] = None,
    record_states: bool = True,
) -> DrcEpisode:
    """
    Play a level with DRC weights.

    The first observation is fed ``thinking_steps`` times before acting.
    With a cache_1step ``cache`` spec the targeted channels are overwritten,
    from the second step on, with the state of a one-step rerun on the
    previous observation. A step without a plan executes the readout's
    fallback action, which leaves the level unchanged.

    Args:
        policy: Weights wrapped for acting
        level: Starting level
        max_steps: Step limit, idle steps included
        thinking_steps: Steps on the first observation before the first action
        interventions: Edits applied on every step
        replacements: Tensor replacements (mean ablation) keyed by (tensor, layer, tick in step)
        cache: cache_1step ablation spec
        record_states: Keep per-step states

    Returns:
        DrcEpisode wrapping the planner-style Episode
    """
    if cache is not None and cache.mode is not AblationMode.CACHE_1STEP:
        raise AblationSourceError(f"run_drc takes cache_1step specs only, got {cache.mode.value}")
    result = DrcEpisode(episode=Episode(level=level, levels=[level]))
    episode = result.episode
    states = policy.initial_state(level)
    for _ in range(thinking_steps):
        states = policy.forward(states, level, interventions, replacements).states

    current, previous = level, None
    while episode.n_steps < max_steps and not current.is_solved:
        states = policy.prepare(states, current)
        if cache is not None and previous is not None:
            states = _apply_cache(states, cache_state(policy, previous, replacements), cache)
        context = states
        forward = policy.forward(states, current, interventions, replacements)
        states = forward.states
        readout = policy.choose(forward, current, interventions)
        episode.readouts.append(readout)
        episode.n_steps += 1
        acted = True
        episode.acted.append(acted)
        if record_states:
            result.steps.append(
                DrcStep(
                    level=current,
                    context=context,
                    states=states,
                    readout=readout,
                    acted=acted,
                    action_index=episode.n_actions,
                )
            )
        previous = current
        outcome = step(current, readout.action)
        current = outcome.level
        episode.actions.append(readout.action)
        episode.rewards.append(outcome.reward)
        episode.levels.append(current)

    episode.solved = current.is_solved
    logger.debug(
        f"DRC episode {level.level_id or '<level>'}: solved={episode.solved} "
        f"actions={episode.n_actions} steps={episode.n_steps}"
    )
    return result
