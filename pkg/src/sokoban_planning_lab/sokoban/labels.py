"""
Ground-truth future-movement labels derived from replaying an action sequence.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ActionReplayError
from .engine import step
from .level import Action, Level, Pos


@dataclass
class LabelGrid:
    """
    Per-square movement records.

    box_moves[square] maps a step index t to the direction a box left that
    square at step t; agent_moves does the same for the agent.
    """

    height: int
    width: int
    n_steps: int = 0
    box_moves: Dict[Pos, Dict[int, Action]] = field(default_factory=dict)
    agent_moves: Dict[Pos, Dict[int, Action]] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not self.box_moves and not self.agent_moves

    def box_events(self) -> List[Tuple[int, Pos, Action]]:
        """(t, square, direction) for every box move, in step order."""
        events = [(t, square, action) for square, moves in self.box_moves.items() for t, action in moves.items()]
        return sorted(events, key=lambda event: event[0])

    def box_move_tensor(self) -> np.ndarray:
        """Boolean array (T, H, W, 4): a box leaves the square in that direction at step t."""
        return self._to_tensor(self.box_moves)

    def agent_move_tensor(self) -> np.ndarray:
        return self._to_tensor(self.agent_moves)

    def _to_tensor(self, moves: Dict[Pos, Dict[int, Action]]) -> np.ndarray:
        tensor = np.zeros((self.n_steps, self.height, self.width, 4), dtype=bool)
        for (r, c), by_step in moves.items():
            for t, action in by_step.items():
                tensor[t, r, c, action.value] = True
        return tensor


def future_move_labels(level: Level, actions: Sequence[Action], strict: bool = False) -> LabelGrid:
    """
    Replay actions and record where the agent and any pushed box moved.

    Blocked moves leave no label. With strict=True they raise
    ActionReplayError instead, for sequences that should replay cleanly.
    """
    labels = LabelGrid(height=level.height, width=level.width, n_steps=len(actions))
    current = level
    for t, action in enumerate(actions):
        outcome = step(current, action)
        if not outcome.moved:
            if not strict:
                current = outcome.level
                continue
            raise ActionReplayError(f"Action {t} ({action.name}) is blocked at {current.agent_pos}")
        labels.agent_moves.setdefault(current.agent_pos, {})[t] = action
        if outcome.moved_box is not None:
            square, direction = outcome.moved_box
            labels.box_moves.setdefault(square, {})[t] = direction
        current = outcome.level
    return labels
