"""
Immutable Sokoban level model and the text format used to read and write it.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from ..errors import (
    BoxTargetMismatch,
    MultipleAgents,
    NoAgent,
    NoBoxes,
    RaggedLevel,
    UnknownCharacter,
)

Pos = Tuple[int, int]


class Tile(Enum):
    """The seven square kinds. Box/agent occupancy and target marking are encoded jointly."""

    WALL = "#"
    FLOOR = " "
    TARGET = "."
    BOX = "$"
    BOX_ON_TARGET = "*"
    AGENT = "@"
    AGENT_ON_TARGET = "+"

    @property
    def is_target(self) -> bool:
        return self in (Tile.TARGET, Tile.BOX_ON_TARGET, Tile.AGENT_ON_TARGET)

    @property
    def has_box(self) -> bool:
        return self in (Tile.BOX, Tile.BOX_ON_TARGET)

    @property
    def has_agent(self) -> bool:
        return self in (Tile.AGENT, Tile.AGENT_ON_TARGET)


_CHAR_TO_TILE: Dict[str, Tile] = {tile.value: tile for tile in Tile}


class Action(Enum):
    """The four moves. Enum order is the tie-break order used throughout."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def delta(self) -> Pos:
        return _DELTAS[self]

    @property
    def opposite(self) -> "Action":
        return _OPPOSITE[self]

    @property
    def letter(self) -> str:
        return self.name[0]

    def is_orthogonal(self, other: "Action") -> bool:
        return self is not other and self is not other.opposite

    @classmethod
    def from_letter(cls, letter: str) -> "Action":
        for action in cls:
            if action.letter == letter.upper():
                return action
        raise ValueError(f"Unknown action letter '{letter}'")


_DELTAS: Dict[Action, Pos] = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}
_OPPOSITE: Dict[Action, Action] = {
    Action.UP: Action.DOWN,
    Action.DOWN: Action.UP,
    Action.LEFT: Action.RIGHT,
    Action.RIGHT: Action.LEFT,
}

ACTIONS: Tuple[Action, ...] = tuple(Action)


def shift(pos: Pos, action: Action, steps: int = 1) -> Pos:
    dr, dc = action.delta
    return (pos[0] + dr * steps, pos[1] + dc * steps)


def actions_to_str(actions: Iterable[Action]) -> str:
    return "".join(action.letter for action in actions)


def actions_from_str(text: str) -> List[Action]:
    return [Action.from_letter(ch) for ch in text.strip() if not ch.isspace()]


@dataclass(frozen=True)
class Level:
    """
    A Sokoban state.

    Walls and targets never change; boxes and the agent move. Positions are
    (row, col) with (0, 0) at the top left.
    """

    height: int
    width: int
    walls: FrozenSet[Pos]
    targets: FrozenSet[Pos]
    boxes: FrozenSet[Pos]
    agent_pos: Pos
    level_id: Optional[str] = field(default=None, compare=False)

    def tile(self, pos: Pos) -> Tile:
        if pos in self.walls:
            return Tile.WALL
        on_target = pos in self.targets
        if pos in self.boxes:
            return Tile.BOX_ON_TARGET if on_target else Tile.BOX
        if pos == self.agent_pos:
            return Tile.AGENT_ON_TARGET if on_target else Tile.AGENT
        return Tile.TARGET if on_target else Tile.FLOOR

    @property
    def tiles(self) -> List[List[Tile]]:
        return [[self.tile((r, c)) for c in range(self.width)] for r in range(self.height)]

    def in_bounds(self, pos: Pos) -> bool:
        return 0 <= pos[0] < self.height and 0 <= pos[1] < self.width

    def is_open(self, pos: Pos) -> bool:
        """Inside the grid and not a wall."""
        return self.in_bounds(pos) and pos not in self.walls

    def is_free(self, pos: Pos) -> bool:
        """Open and not holding a box."""
        return self.is_open(pos) and pos not in self.boxes

    @property
    def is_solved(self) -> bool:
        return self.boxes <= self.targets

    @property
    def unplaced_boxes(self) -> FrozenSet[Pos]:
        return self.boxes - self.targets

    @property
    def open_targets(self) -> FrozenSet[Pos]:
        return self.targets - self.boxes

    def key(self) -> Tuple[Pos, Tuple[Pos, ...]]:
        """Hashable (agent, sorted boxes) state key used by the search code."""
        return (self.agent_pos, tuple(sorted(self.boxes)))

    def with_positions(self, agent_pos: Pos, boxes: Iterable[Pos]) -> "Level":
        return replace(self, agent_pos=agent_pos, boxes=frozenset(boxes))

    def reachable(self) -> FrozenSet[Pos]:
        """Squares the agent can walk to without pushing anything."""
        seen = {self.agent_pos}
        frontier = [self.agent_pos]
        while frontier:
            pos = frontier.pop()
            for action in ACTIONS:
                nxt = shift(pos, action)
                if nxt not in seen and self.is_free(nxt):
                    seen.add(nxt)
                    frontier.append(nxt)
        return frozenset(seen)

    def __str__(self) -> str:
        return format_level(self)


def parse_level(text: str, level_id: Optional[str] = None, first_line: int = 1, path: Optional[str] = None) -> Level:
    """
    Parse a character grid into a Level.

    Args:
        text: Grid lines, optionally preceded by a "; id" header line
        level_id: Id to use when the text has no header
        first_line: Line number of the first text line, for error messages
        path: Source file, for error messages

    Returns:
        Level satisfying all level invariants
    """
    lines = text.split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    offset = 0
    while lines and not lines[0].strip():
        lines.pop(0)
        offset += 1
    if lines and lines[0].startswith(";"):
        level_id = lines[0][1:].strip() or level_id
        lines.pop(0)
        offset += 1
    if not lines:
        raise NoAgent("Empty level block", line=first_line, path=path)

    width = len(lines[0])
    walls, targets, boxes, agents = set(), set(), set(), []
    for r, row in enumerate(lines):
        line_no = first_line + offset + r
        if len(row) != width:
            raise RaggedLevel(f"Row has {len(row)} characters, expected {width}", line=line_no, path=path)
        for c, ch in enumerate(row):
            tile = _CHAR_TO_TILE.get(ch)
            if tile is None:
                raise UnknownCharacter(f"Unknown character {ch!r} at column {c}", line=line_no, path=path)
            if tile is Tile.WALL:
                walls.add((r, c))
            if tile.is_target:
                targets.add((r, c))
            if tile.has_box:
                boxes.add((r, c))
            if tile.has_agent:
                agents.append((r, c))

    if not agents:
        raise NoAgent("Level has no agent", line=first_line + offset, path=path)
    if len(agents) > 1:
        raise MultipleAgents(f"Level has {len(agents)} agents", line=first_line + offset, path=path)
    if not boxes:
        raise NoBoxes("Level has no boxes", line=first_line + offset, path=path)
    if len(boxes) != len(targets):
        raise BoxTargetMismatch(
            f"Level has {len(boxes)} boxes but {len(targets)} targets", line=first_line + offset, path=path
        )

    return Level(
        height=len(lines),
        width=width,
        walls=frozenset(walls),
        targets=frozenset(targets),
        boxes=frozenset(boxes),
        agent_pos=agents[0],
        level_id=level_id,
    )


def format_level(level: Level, with_header: bool = False) -> str:
    """Render a Level in the text format read by parse_level."""
    rows = ["".join(level.tile((r, c)).value for c in range(level.width)) for r in range(level.height)]
    if with_header and level.level_id is not None:
        rows.insert(0, f"; {level.level_id}")
    return "\n".join(rows)


def border_is_wall(level: Level) -> bool:
    for r in range(level.height):
        for c in range(level.width):
            on_border = r in (0, level.height - 1) or c in (0, level.width - 1)
            if on_border and (r, c) not in level.walls:
                return False
    return True
