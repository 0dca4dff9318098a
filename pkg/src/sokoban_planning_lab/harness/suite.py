"""
The bundled 50-level evaluation suite.

The suite ships as suite.txt in Boxoban format next to this module. It was
produced from SUITE_SPEC, a fixed list of (kind, size) case levels, and
suite_levels rebuilds the same levels from the generators.
"""

from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

from loguru import logger

from ..sokoban.boxoban import parse_level_file, write_level_file
from ..sokoban.generators import generate_case_level
from ..sokoban.level import Level

SUITE_FILE = "suite.txt"
SUITE_PATH = Path(__file__).parent / SUITE_FILE

SUITE_SPEC: Tuple[Tuple[str, int], ...] = (
    tuple(("corridor", size) for size in range(5, 19))
    + tuple(("turn", size) for size in range(6, 20))
    + tuple(("two_box", size) for size in range(6, 21))
    + tuple(("zigzag", size) for size in range(8, 13))
    + (("two_paths", 5), ("backtrack", 20))
)


def suite_levels() -> List[Level]:
    """Rebuild the suite from SUITE_SPEC."""
    levels = []
    for index, (kind, size) in enumerate(SUITE_SPEC):
        level = generate_case_level(kind, size)
        levels.append(replace(level, level_id=f"suite-{index:02d}-{kind}-{size}"))
    return levels


def write_suite(out_dir: Union[str, Path]) -> Path:
    """Write the suite as one level file under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / SUITE_FILE
    write_level_file(load_suite(), path)
    logger.info(f"Wrote {len(SUITE_SPEC)} suite levels to {path}")
    return path


def load_suite(path: Optional[Union[str, Path]] = None) -> List[Level]:
    """Read a suite file or a directory holding one; the bundled suite when no path is given."""
    if path is None:
        return parse_level_file(SUITE_PATH)
    path = Path(path)
    return parse_level_file(path / SUITE_FILE if path.is_dir() else path)
