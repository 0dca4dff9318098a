"""
Plan grid state, decoded plans and trace events.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..sokoban.level import ACTIONS, Action, Level, Pos, shift
from .channels import ChannelMap


class Horizon(Enum):
    SHORT = "short"
    LONG = "long"


class TraceKind(Enum):
    SEED = "seed"
    EXTEND_LINEAR = "extend_linear"
    EXTEND_TURN = "extend_turn"
    STOP = "stop"
    BACKTRACK = "backtrack"
    WTA_SUPPRESS = "wta_suppress"
    TRANSFER = "transfer"
    READOUT = "readout"


@dataclass(frozen=True)
class TraceEvent:
    kind: TraceKind
    square: Pos
    channel: int
    tick: int

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "square": list(self.square), "channel": self.channel, "tick": self.tick}


@dataclass
class PlanGrid:
    """
    Activations of every channel over the level, plus the gate state behind
    the short-term box channels.

    ``acts`` holds what analyses read (H×W×C). ``cells`` holds the ConvLSTM
    cell of each box_short unit, ``drive`` the extension drive it received
    on the last tick (H×W×4) and ``rivals`` the cells of the direction
    comparators, indexed [row, col, rival, direction]. The other channels
    store their value directly.
    """

    acts: np.ndarray
    cells: np.ndarray
    drive: np.ndarray
    rivals: np.ndarray
    tick_index: int = 0

    @classmethod
    def empty(cls, height: int, width: int, channels: int) -> "PlanGrid":
        return cls(
            acts=np.zeros((height, width, channels)),
            cells=np.zeros((height, width, channels)),
            drive=np.zeros((height, width, 4)),
            rivals=np.zeros((height, width, 4, 4)),
        )

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.acts.shape  # type: ignore[return-value]

    def copy(self) -> "PlanGrid":
        return PlanGrid(
            acts=self.acts.copy(),
            cells=self.cells.copy(),
            drive=self.drive.copy(),
            rivals=self.rivals.copy(),
            tick_index=self.tick_index,
        )

    def channel(self, index: int) -> np.ndarray:
        return self.acts[:, :, index]


def refresh_entities(grid: PlanGrid, level: Level, channel_map: ChannelMap) -> PlanGrid:
    """Overwrite the entity channels so they match the level exactly."""
    out = grid.copy()
    wall, target, box, agent = (channel_map.entity(n) for n in ("wall", "target", "box", "agent"))
    out.acts[:, :, [wall, target, box, agent]] = 0.0
    for r, c in level.walls:
        out.acts[r, c, wall] = 1.0
    for r, c in level.targets:
        out.acts[r, c, target] = 1.0
    for r, c in level.boxes:
        out.acts[r, c, box] = 1.0
    out.acts[level.agent_pos[0], level.agent_pos[1], agent] = 1.0
    return out


@dataclass(frozen=True)
class PlanArrow:
    direction: Action
    horizon: Horizon
    strength: float


@dataclass
class Plan:
    """Decoded per-square arrows; squares without an entry carry no plan."""

    arrows: Dict[Pos, PlanArrow] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.arrows)

    @property
    def is_empty(self) -> bool:
        return not self.arrows

    def get(self, square: Pos) -> Optional[PlanArrow]:
        return self.arrows.get(square)

    def short_arrows(self) -> Dict[Pos, Action]:
        return {sq: arrow.direction for sq, arrow in self.arrows.items() if arrow.horizon is Horizon.SHORT}

    def follow(self, start: Pos, limit: int = 1000) -> List[Pos]:
        """
        Squares visited by following short-term arrows from ``start``.

        Stops at a square without an arrow, on a repeat, or after ``limit``
        moves. The start square is always included.
        """
        arrows = self.short_arrows()
        path = [start]
        seen = {start}
        square = start
        while square in arrows and len(path) <= limit:
            square = shift(square, arrows[square])
            if square in seen:
                break
            path.append(square)
            seen.add(square)
        return path

    def connects(self, level: Level) -> bool:
        """True when the arrows lead some unplaced box onto an open target."""
        targets = level.open_targets
        return any(self.follow(box)[-1] in targets for box in level.unplaced_boxes)

    def render(self, level: Level) -> str:
        """Level text with arrows drawn over planned squares (lower case for long-term)."""
        glyphs = {Action.UP: "^", Action.DOWN: "v", Action.LEFT: "<", Action.RIGHT: ">"}
        rows = []
        for r in range(level.height):
            row = []
            for c in range(level.width):
                arrow = self.arrows.get((r, c))
                if arrow is None or (r, c) in level.walls:
                    row.append(level.tile((r, c)).value)
                elif arrow.horizon is Horizon.LONG:
                    row.append(arrow.direction.letter.lower())
                else:
                    row.append(glyphs[arrow.direction])
            rows.append("".join(row))
        return "\n".join(rows)


def decode_plan(grid: PlanGrid, channel_map: ChannelMap, threshold: float) -> Plan:
    """
    Per square, the short-term direction with the largest activation if it
    reaches ``threshold``, else the strongest long-term direction if that
    does. Ties go to the earlier direction.
    """
    short = grid.acts[:, :, list(channel_map.box_short)]
    long = grid.acts[:, :, list(channel_map.box_long)]
    arrows: Dict[Pos, PlanArrow] = {}
    height, width = short.shape[:2]
    for r in range(height):
        for c in range(width):
            best = int(np.argmax(short[r, c]))
            if short[r, c, best] >= threshold:
                arrows[(r, c)] = PlanArrow(ACTIONS[best], Horizon.SHORT, float(short[r, c, best]))
                continue
            best = int(np.argmax(long[r, c]))
            if long[r, c, best] >= threshold:
                arrows[(r, c)] = PlanArrow(ACTIONS[best], Horizon.LONG, float(long[r, c, best]))
    return Plan(arrows=arrows)
