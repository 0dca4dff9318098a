"""
Exhaustive Sokoban solvers used as ground truth.

Handles:
- Breadth-first search for a minimum-move solution under a node budget
- An independent iterative-deepening search for cross-checks
- Enumeration of every minimum-move solution
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

from loguru import logger

from .level import ACTIONS, Action, Level, Pos, shift

DEFAULT_NODE_BUDGET = 5_000_000

State = Tuple[Pos, Tuple[Pos, ...]]


class SolveStatus(Enum):
    SOLVED = "solved"
    UNSOLVABLE = "unsolvable"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class OracleResult:
    """Outcome of an oracle search."""

    status: SolveStatus
    solution: Optional[List[Action]] = None
    nodes_expanded: int = 0

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED

    @property
    def length(self) -> Optional[int]:
        return None if self.solution is None else len(self.solution)


class _Board:
    """Static walls/targets with a fast successor function over state keys."""

    def __init__(self, level: Level):
        self.level = level
        self.targets: FrozenSet[Pos] = level.targets

    def is_goal(self, boxes: Tuple[Pos, ...]) -> bool:
        return all(box in self.targets for box in boxes)

    def successors(self, state: State) -> Iterator[Tuple[Action, State]]:
        agent, boxes = state
        box_set = set(boxes)
        for action in ACTIONS:
            nxt = shift(agent, action)
            if not self.level.is_open(nxt):
                continue
            if nxt in box_set:
                beyond = shift(nxt, action)
                if not self.level.is_open(beyond) or beyond in box_set:
                    continue
                moved = tuple(sorted((box_set - {nxt}) | {beyond}))
                yield action, (nxt, moved)
            else:
                yield action, (nxt, boxes)


def solve_oracle(level: Level, node_budget: int = DEFAULT_NODE_BUDGET) -> OracleResult:
    """
    Breadth-first search over (agent, sorted boxes) states.

    Args:
        level: Level to solve
        node_budget: Maximum number of states to expand

    Returns:
        OracleResult with a minimum-length solution, or the reason there is none
    """
    board = _Board(level)
    start = level.key()
    if board.is_goal(start[1]):
        return OracleResult(status=SolveStatus.SOLVED, solution=[], nodes_expanded=0)

    parents: Dict[State, Tuple[Optional[State], Optional[Action]]] = {start: (None, None)}
    queue = deque([start])
    expanded = 0
    while queue:
        if expanded >= node_budget:
            logger.warning(f"Oracle budget of {node_budget} nodes exhausted on level {level.level_id}")
            return OracleResult(status=SolveStatus.BUDGET_EXHAUSTED, nodes_expanded=expanded)
        state = queue.popleft()
        expanded += 1
        for action, nxt in board.successors(state):
            if nxt in parents:
                continue
            parents[nxt] = (state, action)
            if board.is_goal(nxt[1]):
                return OracleResult(
                    status=SolveStatus.SOLVED,
                    solution=_unwind(parents, nxt),
                    nodes_expanded=expanded,
                )
            queue.append(nxt)

    return OracleResult(status=SolveStatus.UNSOLVABLE, nodes_expanded=expanded)


def _unwind(parents: Dict[State, Tuple[Optional[State], Optional[Action]]], state: State) -> List[Action]:
    actions: List[Action] = []
    current: Optional[State] = state
    while current is not None:
        prev, action = parents[current]
        if action is not None:
            actions.append(action)
        current = prev
    actions.reverse()
    return actions


def solve_iddfs(level: Level, max_depth: int = 200) -> Optional[List[Action]]:
    """
    Iterative-deepening depth-first search, sharing no code path with the BFS.

    A state is only re-expanded when reached with more depth left than before,
    which keeps the search exact while bounding repeated work.
    """
    start_boxes = frozenset(level.boxes)
    if start_boxes <= level.targets:
        return []

    for limit in range(1, max_depth + 1):
        best_remaining: Dict[Tuple[Pos, FrozenSet[Pos]], int] = {}
        path: List[Action] = []
        if _dls(level, level.agent_pos, start_boxes, limit, path, best_remaining):
            return path
    return None


def _dls(
    level: Level,
    agent: Pos,
    boxes: FrozenSet[Pos],
    remaining: int,
    path: List[Action],
    best_remaining: Dict[Tuple[Pos, FrozenSet[Pos]], int],
) -> bool:
    if boxes <= level.targets:
        return True
    if remaining == 0:
        return False
    key = (agent, boxes)
    if best_remaining.get(key, -1) >= remaining:
        return False
    best_remaining[key] = remaining

    for action in ACTIONS:
        dr, dc = action.delta
        nxt = (agent[0] + dr, agent[1] + dc)
        if nxt in level.walls or not level.in_bounds(nxt):
            continue
        new_boxes = boxes
        if nxt in boxes:
            beyond = (nxt[0] + dr, nxt[1] + dc)
            if beyond in level.walls or beyond in boxes or not level.in_bounds(beyond):
                continue
            new_boxes = (boxes - {nxt}) | {beyond}
        path.append(action)
        if _dls(level, nxt, new_boxes, remaining - 1, path, best_remaining):
            return True
        path.pop()
    return False


@dataclass
class SolutionSet:
    """All minimum-length solutions found (up to a limit)."""

    length: Optional[int] = None
    solutions: List[List[Action]] = field(default_factory=list)
    truncated: bool = False


def enumerate_min_solutions(level: Level, limit: int = 100, node_budget: int = DEFAULT_NODE_BUDGET) -> SolutionSet:
    """
    Enumerate distinct minimum-length action sequences.

    Runs a layered BFS to the first goal layer, keeps only states that lie on
    some shortest path, then walks them depth-first.
    """
    board = _Board(level)
    start = level.key()
    if board.is_goal(start[1]):
        return SolutionSet(length=0, solutions=[[]])

    layers: List[Set[State]] = [{start}]
    seen: Set[State] = {start}
    edges: Dict[State, List[Tuple[Action, State]]] = {}
    goal_layer: Set[State] = set()
    expanded = 0
    while not goal_layer:
        frontier = layers[-1]
        next_layer: Set[State] = set()
        for state in frontier:
            expanded += 1
            if expanded > node_budget:
                logger.warning("Solution enumeration ran out of node budget")
                return SolutionSet(truncated=True)
            out = []
            for action, nxt in board.successors(state):
                if nxt in seen and nxt not in next_layer:
                    continue
                out.append((action, nxt))
                next_layer.add(nxt)
            edges[state] = out
        if not next_layer:
            return SolutionSet()
        seen |= next_layer
        layers.append(next_layer)
        goal_layer = {state for state in next_layer if board.is_goal(state[1])}

    depth = len(layers) - 1
    useful: Set[State] = set(goal_layer)
    for layer_index in range(depth - 1, -1, -1):
        for state in layers[layer_index]:
            if any(nxt in useful for _, nxt in edges.get(state, [])):
                useful.add(state)

    result = SolutionSet(length=depth)
    path: List[Action] = []

    def walk(state: State, level_index: int) -> None:
        if len(result.solutions) >= limit:
            result.truncated = True
            return
        if level_index == depth:
            if state in goal_layer:
                result.solutions.append(list(path))
            return
        for action, nxt in edges.get(state, []):
            if nxt in useful and nxt in layers[level_index + 1]:
                path.append(action)
                walk(nxt, level_index + 1)
                path.pop()

    walk(start, 0)
    return result
