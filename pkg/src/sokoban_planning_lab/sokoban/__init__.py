"""
Sokoban rules engine, level formats, case-study generators and oracle solvers.
"""

from .boxoban import load_boxoban_dir, load_levels, parse_level_file, write_level_file
from .engine import ReplayResult, StepOutcome, replay, step
from .generators import CASE_KINDS, backtrack_landmarks, generate_case_level
from .labels import LabelGrid, future_move_labels
from .level import (
    ACTIONS,
    Action,
    Level,
    Pos,
    Tile,
    actions_from_str,
    actions_to_str,
    border_is_wall,
    format_level,
    parse_level,
    shift,
)
from .oracle import (
    OracleResult,
    SolutionSet,
    SolveStatus,
    enumerate_min_solutions,
    solve_iddfs,
    solve_oracle,
)
from .render import PALETTE, classify_image, classify_pixel, render_rgb

__all__ = [
    "ACTIONS",
    "Action",
    "CASE_KINDS",
    "LabelGrid",
    "Level",
    "OracleResult",
    "PALETTE",
    "Pos",
    "ReplayResult",
    "SolutionSet",
    "SolveStatus",
    "StepOutcome",
    "Tile",
    "actions_from_str",
    "actions_to_str",
    "backtrack_landmarks",
    "border_is_wall",
    "classify_image",
    "classify_pixel",
    "enumerate_min_solutions",
    "format_level",
    "future_move_labels",
    "generate_case_level",
    "load_boxoban_dir",
    "load_levels",
    "parse_level",
    "parse_level_file",
    "render_rgb",
    "replay",
    "shift",
    "solve_iddfs",
    "solve_oracle",
    "step",
    "write_level_file",
]
