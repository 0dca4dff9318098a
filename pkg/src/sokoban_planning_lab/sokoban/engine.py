"""
Deterministic Sokoban transition function and reward model.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from ..errors import ActionReplayError
from .level import Action, Level, Pos, shift

STEP_PENALTY = -0.1
BOX_ON_REWARD = 1.0
BOX_OFF_PENALTY = -1.0
SOLVE_BONUS = 10.0


@dataclass(frozen=True)
class StepOutcome:
    """Result of applying one action."""

    level: Level
    reward: float
    solved: bool
    moved: bool
    moved_box: Optional[Tuple[Pos, Action]] = None  # (square before the push, direction)


def step(level: Level, action: Action) -> StepOutcome:
    """
    Apply an action.

    The agent moves onto a free square, or pushes a box when the square
    beyond it is free. Anything else is a no-op that still costs the
    step penalty.
    """
    target = shift(level.agent_pos, action)
    reward = STEP_PENALTY

    if not level.is_open(target):
        return StepOutcome(level=level, reward=reward, solved=level.is_solved, moved=False)

    if target not in level.boxes:
        moved = level.with_positions(target, level.boxes)
        return StepOutcome(level=moved, reward=reward, solved=moved.is_solved, moved=True)

    beyond = shift(target, action)
    if not level.is_free(beyond):
        return StepOutcome(level=level, reward=reward, solved=level.is_solved, moved=False)

    boxes = (level.boxes - {target}) | {beyond}
    pushed = level.with_positions(target, boxes)
    if beyond in level.targets:
        reward += BOX_ON_REWARD
    if target in level.targets:
        reward += BOX_OFF_PENALTY
    if pushed.is_solved:
        reward += SOLVE_BONUS
    return StepOutcome(
        level=pushed,
        reward=round(reward, 6),
        solved=pushed.is_solved,
        moved=True,
        moved_box=(target, action),
    )


@dataclass
class ReplayResult:
    levels: List[Level] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)

    @property
    def final(self) -> Level:
        return self.levels[-1]

    @property
    def total_reward(self) -> float:
        return round(sum(self.rewards), 6)

    @property
    def solved(self) -> bool:
        return self.final.is_solved


def replay(level: Level, actions: Sequence[Action], strict: bool = False) -> ReplayResult:
    """
    Apply a sequence of actions, keeping every intermediate level.

    Args:
        level: Starting level
        actions: Actions to apply in order
        strict: Raise ActionReplayError on the first no-op move

    Returns:
        ReplayResult whose levels list starts with the input level
    """
    result = ReplayResult(levels=[level])
    current = level
    for index, action in enumerate(actions):
        outcome = step(current, action)
        if strict and not outcome.moved:
            raise ActionReplayError(f"Action {index} ({action.name}) is blocked at {current.agent_pos}")
        result.levels.append(outcome.level)
        result.rewards.append(outcome.reward)
        current = outcome.level
    return result
