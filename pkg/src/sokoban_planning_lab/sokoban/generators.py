"""
Deterministic case-study level generators.

Every generator carves open squares out of a solid wall block, so the
border is always wall and the output is byte-stable for a given size.
"""

from typing import Callable, Dict, Iterable, Optional, Set, Tuple

from ..errors import GeneratorRangeError
from .level import Level, Pos

SIZE_RANGES: Dict[str, Tuple[int, int]] = {
    "zigzag": (8, 48),
    "backtrack": (20, 48),
    "two_paths": (5, 5),
    "corridor": (5, 48),
    "turn": (6, 48),
    "two_box": (6, 48),
    "path_preference": (6, 16),
}

DEFAULT_SIZES: Dict[str, int] = {
    "zigzag": 16,
    "backtrack": 20,
    "two_paths": 5,
    "corridor": 8,
    "turn": 8,
    "two_box": 8,
    "path_preference": 8,
}

# row of the backtrack level target, four squares below the fork
SHAFT_END = 6


def _build(
    height: int,
    width: int,
    open_squares: Iterable[Pos],
    agent: Pos,
    boxes: Iterable[Pos],
    targets: Iterable[Pos],
    level_id: str,
) -> Level:
    opened: Set[Pos] = set(open_squares) | {agent} | set(boxes) | set(targets)
    walls = {(r, c) for r in range(height) for c in range(width) if (r, c) not in opened}
    return Level(
        height=height,
        width=width,
        walls=frozenset(walls),
        targets=frozenset(targets),
        boxes=frozenset(boxes),
        agent_pos=agent,
        level_id=level_id,
    )


def corridor_level(size: int) -> Level:
    """Box right of the agent in a one-high corridor, target at the far end."""
    row = 1
    squares = [(row, c) for c in range(1, size - 1)]
    return _build(3, size, squares, (row, 1), [(row, 2)], [(row, size - 2)], f"corridor-{size}")


def turn_level(size: int) -> Level:
    """Box pushed right along a corridor, then down a shaft to the target."""
    corner = size - 3
    squares = [(2, c) for c in range(1, corner + 1)]
    squares += [(1, corner - 1), (1, corner)]
    squares += [(r, corner) for r in range(3, size - 2)]
    return _build(size, size, squares, (2, 1), [(2, 2)], [(size - 3, corner)], f"turn-{size}")


def two_box_level(size: int) -> Level:
    """Two parallel corridors joined by a walkway on the left, one box in each."""
    squares = [(row, c) for row in (1, 3) for c in range(1, size - 1)]
    squares.append((2, 1))
    boxes = [(1, 2), (3, 2)]
    targets = [(1, size - 2), (3, size - 2)]
    return _build(5, size, squares, (2, 1), boxes, targets, f"two-box-{size}")


def two_paths_level(size: int = 5) -> Level:
    """
    Box with two equal-length routes to the target.

        #####
        #@  #
        # $ #
        #  .#
        #####
    """
    squares = [(r, c) for r in range(1, 4) for c in range(1, 4)]
    return _build(5, 5, squares, (1, 1), [(2, 2)], [(3, 3)], "two-paths")


def path_preference_level(size: int) -> Level:
    """Open room: the box can go right-then-down or down-then-right to the target."""
    squares = [(r, c) for r in range(1, size - 1) for c in range(1, size - 1)]
    target = (size - 3, size - 3)
    return _build(size, size, squares, (1, 1), [(2, 2)], [target], f"path-preference-{size}")


def zigzag_level(size: int) -> Level:
    """
    Box pushed through alternating one-high alleys joined by short shafts.

    Alleys sit on rows 2, 5, 8, ... between columns 2 and size-3. Every turn
    has a two-square pocket so the agent can get behind the box.
    """
    left, right = 2, size - 3
    rows = list(range(2, size - 2, 3))
    squares: Set[Pos] = {(2, 1)}
    for index, r in enumerate(rows):
        squares.update((r, c) for c in range(left, right + 1))
        last = index == len(rows) - 1
        going_right = index % 2 == 0
        corner = right if going_right else left
        inward = -1 if going_right else 1
        if not last:
            squares.update((r + k, corner) for k in (1, 2))
            # pocket above the corner for the downward push
            squares.update({(r - 1, corner), (r - 1, corner + inward)})
            # pocket beside the next alley's first square for the sideways push
            squares.update({(r + 2, corner - inward), (r + 3, corner - inward)})
    final_row = rows[-1]
    target = (final_row, right) if (len(rows) - 1) % 2 == 0 else (final_row, left)
    return _build(size, size, squares, (2, 1), [(2, 2)], [target], f"zigzag-{size}")


def backtrack_level(size: int) -> Level:
    """
    Box in a corridor that forks at D1.

    Straight on, the corridor runs to D2, turns down and ends at the dead end
    D3. Turning down at D1 leads down a short shaft to the target. The box
    starts five squares before the fork.
    """
    fork = size // 2
    d2 = fork + 3
    squares: Set[Pos] = {(2, c) for c in range(fork - 6, d2 + 1)}
    squares.update({(1, fork - 1), (1, fork)})
    squares.update({(1, d2 - 1), (1, d2)})
    squares.update((r, d2) for r in range(3, 6))
    squares.update((r, fork) for r in range(3, SHAFT_END))
    target = (SHAFT_END, fork)
    return _build(size, size, squares, (2, fork - 6), [(2, fork - 5)], [target], f"backtrack-{size}")


def backtrack_landmarks(size: int) -> Dict[str, Pos]:
    """Decision squares of backtrack_level: D1 fork, D2 turn, D3 dead end."""
    fork = size // 2
    d2 = fork + 3
    return {"D1": (2, fork), "D2": (2, d2), "D3": (5, d2)}


_GENERATORS: Dict[str, Callable[[int], Level]] = {
    "zigzag": zigzag_level,
    "backtrack": backtrack_level,
    "two_paths": two_paths_level,
    "corridor": corridor_level,
    "turn": turn_level,
    "two_box": two_box_level,
    "path_preference": path_preference_level,
}

CASE_KINDS = tuple(_GENERATORS)


def generate_case_level(kind: str, size: Optional[int] = None) -> Level:
    """
    Build a case-study level.

    Args:
        kind: One of CASE_KINDS
        size: Side length in squares; the kind's default when omitted

    Returns:
        Deterministic Level for (kind, size)
    """
    if kind not in _GENERATORS:
        raise ValueError(f"Unknown case level kind '{kind}'. Expected one of: {', '.join(CASE_KINDS)}")
    if size is None:
        size = DEFAULT_SIZES[kind]
    low, high = SIZE_RANGES[kind]
    if not low <= size <= high:
        raise GeneratorRangeError(f"{kind} size {size} outside {low}..{high}")
    return _GENERATORS[kind](size)
