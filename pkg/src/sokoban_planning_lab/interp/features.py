"""
Recorded activations and the square-level features they are regressed on.

Base features (5): agent, floor, box not on target, box on target, empty
target. Future features (12), per direction: a box leaves the square in
that direction later in the episode, the agent does, and the next action is
that direction (broadcast over the grid).
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import EmptyDatasetError, ShapeMismatch
from ..planner.channels import ChannelMap
from ..planner.runner import Episode
from ..sokoban.labels import LabelGrid, future_move_labels
from ..sokoban.level import ACTIONS, Action, Level, Tile
from .rollout import DrcEpisode

BASE_FEATURES = ("agent", "floor", "box_off_target", "box_on_target", "empty_target")
FUTURE_FEATURES = tuple(
    f"{kind}_{action.name.lower()}" for action in ACTIONS for kind in ("box_move", "agent_move", "next_action")
)
N_BASE = len(BASE_FEATURES)
N_FUTURE = len(FUTURE_FEATURES)


@dataclass
class RecordedStep:
    """Activations (H×W×K) on one step, with the actions executed from that step on."""

    level: Level
    activations: np.ndarray
    future: Sequence[Action] = ()
    episode: int = 0
    _labels: Optional[LabelGrid] = field(default=None, repr=False, compare=False)

    @property
    def labels(self) -> LabelGrid:
        if self._labels is None:
            self._labels = future_move_labels(self.level, self.future)
        return self._labels


def base_features(level: Level) -> np.ndarray:
    out = np.zeros((level.height, level.width, N_BASE))
    for r in range(level.height):
        for c in range(level.width):
            tile = level.tile((r, c))
            out[r, c, 0] = float(tile.has_agent)
            out[r, c, 1] = float(tile is not Tile.WALL)
            out[r, c, 2] = float(tile is Tile.BOX)
            out[r, c, 3] = float(tile is Tile.BOX_ON_TARGET)
            out[r, c, 4] = float(tile in (Tile.TARGET, Tile.AGENT_ON_TARGET))
    return out


def future_features(step: RecordedStep) -> np.ndarray:
    level = step.level
    out = np.zeros((level.height, level.width, N_FUTURE))
    labels = step.labels
    box = labels.box_move_tensor().any(axis=0) if labels.n_steps else np.zeros((level.height, level.width, 4), bool)
    agent = labels.agent_move_tensor().any(axis=0) if labels.n_steps else np.zeros_like(box)
    for action in ACTIONS:
        d = action.value
        out[:, :, 3 * d] = box[:, :, d]
        out[:, :, 3 * d + 1] = agent[:, :, d]
        out[:, :, 3 * d + 2] = float(bool(step.future) and step.future[0] is action)
    return out


@dataclass
class FeatureSet:
    """Per-step base (H×W×5) and future (H×W×12) feature grids."""

    base: List[np.ndarray]
    future: List[np.ndarray]

    def __len__(self) -> int:
        return len(self.base)

    def full(self, index: int) -> np.ndarray:
        return np.concatenate([self.base[index], self.future[index]], axis=2)

    @property
    def names(self):
        return BASE_FEATURES + FUTURE_FEATURES


def build_features(steps: Sequence[RecordedStep]) -> FeatureSet:
    if not steps:
        raise EmptyDatasetError("No recorded steps to build features from")
    for step in steps:
        if step.activations.shape[:2] != (step.level.height, step.level.width):
            raise ShapeMismatch(
                f"Activations {step.activations.shape[:2]} do not match level {step.level.height}x{step.level.width}"
            )
    return FeatureSet(base=[base_features(s.level) for s in steps], future=[future_features(s) for s in steps])


def steps_from_episode(
    episode: Episode,
    channel_map: ChannelMap,
    group: str = "box_short",
    index: int = 0,
) -> List[RecordedStep]:
    """
    Recorded steps of an engine episode, reading one channel group, tagged
    with episode number ``index``.

    Needs an episode run with record_grids; grids[t + 1] is step t's grid.
    """
    if len(episode.grids) != episode.n_steps + 1:
        raise EmptyDatasetError("Episode was run without record_grids")
    channels = list(channel_map.group(group))
    steps = []
    executed = 0
    for t, acted in enumerate(episode.acted):
        steps.append(
            RecordedStep(
                level=episode.levels[executed],
                activations=episode.grids[t + 1].acts[:, :, channels],
                future=episode.actions[executed:],
                episode=index,
            )
        )
        executed += int(acted)
    return steps


def steps_from_drc(episode: DrcEpisode, layer: int = -1, tensor: str = "h", index: int = 0) -> List[RecordedStep]:
    """Recorded steps of a DRC episode, reading one layer's h or c after the step."""
    actions = episode.episode.actions
    return [
        RecordedStep(
            level=record.level,
            activations=getattr(record.states[layer], tensor),
            future=actions[record.action_index :],
            episode=index,
        )
        for record in episode.steps
    ]
