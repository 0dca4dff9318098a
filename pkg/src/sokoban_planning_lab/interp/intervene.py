"""
Causal interventions on single transitions and their success rate over a
transition dataset.

A transition is a step context (the plan grid before the step's ticks, or
the DRC state before the step) plus the action taken without edits. An
intervention protocol turns a transition into edits and the action the
edits should produce.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..config import MechanismGains
from ..drc.network import LayerState
from ..errors import EmptyDatasetError
from ..planner.channels import ChannelMap, default_channel_map
from ..planner.grid import PlanGrid
from ..planner.mechanisms import ENGINE_MECHANISMS, tick_plan
from ..planner.readout import readout_action
from ..planner.runner import run_planner
from ..sokoban.level import ACTIONS, Action, Level, Pos, shift
from ..specs import InterventionSpec
from .rollout import DrcPolicy, run_drc
from .stats import ConfidenceInterval, bootstrap_ci

MIN_TRANSITIONS = 100
PROTOCOL_GROUPS = ("pna", "gna", "agent", "box", "box_agent")

# Reference success rates (%) reported for a trained DRC(3, 3); report metadata only.
TRAINED_REFERENCE = {"pna": 99.7, "gna": 98.8, "agent": 75.0, "box": 69.3, "box_agent": 92.2}


@dataclass
class Transition:
    level: Level
    action: Action
    grid: Optional[PlanGrid] = None
    states: Optional[List[LayerState]] = None


@dataclass
class InterventionOutcome:
    action: Action
    baseline: Action
    target: Optional[Action] = None

    @property
    def changed(self) -> bool:
        return self.action is not self.baseline

    @property
    def hit(self) -> bool:
        return self.target is not None and self.action is self.target


class EngineContext:
    """Replays an engine step from its recorded context."""

    def __init__(
        self,
        gains: Optional[MechanismGains] = None,
        channel_map: Optional[ChannelMap] = None,
        ticks_per_step: int = 3,
        mechanisms=ENGINE_MECHANISMS,
    ):
        self.gains = gains or MechanismGains()
        self.channel_map = channel_map or default_channel_map()
        self.ticks_per_step = ticks_per_step
        self.mechanisms = mechanisms

    def act(self, transition: Transition, interventions: Sequence[InterventionSpec] = ()) -> Action:
        grid = transition.grid
        for _ in range(self.ticks_per_step):
            grid, _ = tick_plan(grid, transition.level, self.channel_map, self.gains, self.mechanisms, interventions)
        readout, _ = readout_action(grid, self.channel_map, transition.level, self.gains, interventions)
        return readout.action


class DrcContext:
    """Replays a DRC step from its recorded state."""

    def __init__(self, policy: DrcPolicy):
        self.policy = policy

    def act(self, transition: Transition, interventions: Sequence[InterventionSpec] = ()) -> Action:
        result = self.policy.forward(transition.states, transition.level, interventions)
        return self.policy.choose(result, transition.level, interventions).action


Protocol = Callable[[Transition], Optional[Tuple[List[InterventionSpec], Action]]]


def causal_intervene(
    context,
    transition: Transition,
    interventions: Sequence[InterventionSpec],
    target: Optional[Action] = None,
) -> InterventionOutcome:
    """Replay ``transition`` with the edits and compare the action to the unedited one."""
    baseline = context.act(transition)
    action = context.act(transition, interventions) if interventions else baseline
    return InterventionOutcome(action=action, baseline=baseline, target=target)


def collect_engine_transitions(
    levels: Sequence[Level],
    gains: Optional[MechanismGains] = None,
    channel_map: Optional[ChannelMap] = None,
    ticks_per_step: int = 3,
    max_steps: int = 120,
    limit: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> List[Transition]:
    """
    Transitions where the engine acted on a plan, from episodes on ``levels``.

    With ``limit`` a uniform sample without replacement is kept, in the
    original order.
    """
    gains = gains or MechanismGains()
    channel_map = channel_map or default_channel_map()
    transitions = []
    for level in levels:
        episode = run_planner(
            level, max_steps=max_steps, ticks_per_step=ticks_per_step, gains=gains, channel_map=channel_map
        )
        executed = 0
        for t, acted in enumerate(episode.acted):
            readout = episode.readouts[t]
            if acted and not readout.no_plan:
                transitions.append(
                    Transition(level=episode.levels[executed], action=readout.action, grid=episode.contexts[t])
                )
            executed += int(acted)
    return _sample(transitions, limit, rng)


def collect_drc_transitions(
    policy: DrcPolicy,
    levels: Sequence[Level],
    max_steps: int = 120,
    limit: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> List[Transition]:
    transitions = []
    for level in levels:
        episode = run_drc(policy, level, max_steps=max_steps)
        for record in episode.steps:
            if record.acted and not record.readout.no_plan:
                transitions.append(Transition(level=record.level, action=record.readout.action, states=record.context))
    return _sample(transitions, limit, rng)


def _sample(
    transitions: List[Transition], limit: Optional[int], rng: Optional[np.random.Generator]
) -> List[Transition]:
    if limit is None or len(transitions) <= limit:
        return transitions
    rng = rng if rng is not None else np.random.default_rng(0)
    keep = np.sort(rng.choice(len(transitions), size=limit, replace=False))
    return [transitions[i] for i in keep]


def alternate_action(transition: Transition) -> Action:
    """First action after the taken one, cyclically: the protocol's target."""
    return ACTIONS[(transition.action.value + 1) % len(ACTIONS)]


def _set(channels: Sequence[int], value: float, squares: Sequence[Pos] = ()) -> InterventionSpec:
    return InterventionSpec(target="plan", channels=tuple(channels), squares=tuple(squares), alpha=0.0, c=value)


def first_step(level: Level, goal: Pos) -> Optional[Action]:
    """First move of a shortest walk from the agent to ``goal``, earlier directions winning ties."""
    start = level.agent_pos
    if goal == start:
        return None
    first = {start: None}
    frontier = deque([start])
    while frontier:
        pos = frontier.popleft()
        for action in ACTIONS:
            nxt = shift(pos, action)
            if nxt in first or not level.is_free(nxt):
                continue
            first[nxt] = action if pos == start else first[pos]
            if nxt == goal:
                return first[nxt]
            frontier.append(nxt)
    return None


def reroute_target(level: Level, exclude: Action) -> Optional[Tuple[Pos, Action, Action]]:
    """
    (box, push direction, agent action) for a push the agent can walk to,
    whose first agent action differs from ``exclude``.

    Boxes are tried nearest to the agent first (Manhattan distance, then
    row-major order) and directions in action order.
    """
    ar, ac = level.agent_pos
    boxes = sorted(level.unplaced_boxes or level.boxes, key=lambda b: (abs(b[0] - ar) + abs(b[1] - ac), b))
    for box in boxes:
        for push in ACTIONS:
            push_from = shift(box, push.opposite)
            if not level.is_free(shift(box, push)):
                continue
            if push_from == level.agent_pos:
                action = push
            elif level.is_free(push_from):
                action = first_step(level, push_from)
            else:
                continue
            if action is not None and action is not exclude:
                return box, push, action
    return None


def group_protocol(group: str, channel_map: ChannelMap, gains: MechanismGains) -> Protocol:
    """
    Edits that should make the engine take an alternate action.

    - pna: the target PNA channel set high, the rest low
    - gna: the target GNA channel high at the agent square, the rest low
    - agent: agent_short high for the target at the agent square, the rest low there
    - box: one box arrow for a push the agent can walk to, other box arrows cleared
    - box_agent: the box edit plus the agent edit for the walk's first action
    """
    if group not in PROTOCOL_GROUPS:
        raise ValueError(f"Unknown protocol group '{group}'. Expected one of: {', '.join(PROTOCOL_GROUPS)}")
    high = gains.a_max

    def directional(name: str, target: Action, squares: Sequence[Pos], other_squares: Sequence[Pos]):
        own = channel_map.index(name, target)
        others = [channel_map.index(name, a) for a in ACTIONS if a is not target]
        return [_set([own], high, squares), _set(others, -high, other_squares)]

    def protocol(transition: Transition) -> Optional[Tuple[List[InterventionSpec], Action]]:
        agent = transition.level.agent_pos
        if group == "pna":
            target = alternate_action(transition)
            return directional("pna", target, (), ()), target
        if group == "gna":
            target = alternate_action(transition)
            return directional("gna", target, (agent,), ()), target
        if group == "agent":
            target = alternate_action(transition)
            return directional("agent_short", target, (agent,), (agent,)), target

        reroute = reroute_target(transition.level, exclude=transition.action)
        if reroute is None:
            return None
        box, push, target = reroute
        own = channel_map.index("box_short", push)
        others = [channel_map.index("box_short", a) for a in ACTIONS if a is not push]
        specs = [_set([own], high, (box,)), _set(others, 0.0)]
        if group == "box_agent":
            specs += directional("agent_short", target, (agent,), (agent,))
        return specs, target

    return protocol


@dataclass
class InterventionScore:
    """Percentage of applicable transitions where the edit produced its target action."""

    group: str
    n: int
    n_skipped: int
    percent: ConfidenceInterval
    reference: Optional[float] = None
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "n": self.n,
            "n_skipped": self.n_skipped,
            "percent": self.percent.estimate,
            "ci_low": self.percent.low,
            "ci_high": self.percent.high,
            "trained_reference": self.reference,
            "flags": ";".join(self.flags),
        }


def intervention_score(
    context,
    transitions: Sequence[Transition],
    protocol: Protocol,
    group: str = "custom",
    min_transitions: int = MIN_TRANSITIONS,
    rng: Optional[np.random.Generator] = None,
) -> InterventionScore:
    """
    Run ``protocol`` on every transition and score target-action hits with a
    bootstrap interval (1000 resamples).

    Raises:
        EmptyDatasetError: Fewer than ``min_transitions`` transitions
    """
    if len(transitions) < min_transitions:
        raise EmptyDatasetError(f"Intervention scoring needs {min_transitions} transitions, got {len(transitions)}")
    hits: List[float] = []
    skipped = 0
    for transition in transitions:
        planned = protocol(transition)
        if planned is None:
            skipped += 1
            continue
        specs, target = planned
        hits.append(100.0 * causal_intervene(context, transition, specs, target).hit)
    flags = []
    if not hits:
        raise EmptyDatasetError(f"Protocol '{group}' applies to none of {len(transitions)} transitions")
    if skipped:
        flags.append(f"skipped={skipped}")
    score = InterventionScore(
        group=group,
        n=len(hits),
        n_skipped=skipped,
        percent=bootstrap_ci(hits, rng=rng),
        reference=TRAINED_REFERENCE.get(group),
        flags=flags,
    )
    logger.info(f"Intervention {group}: {score.percent.estimate:.1f}% over {score.n} transitions")
    return score
