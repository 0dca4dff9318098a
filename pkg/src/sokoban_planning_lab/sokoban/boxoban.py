"""
Boxoban-format corpus ingestion.

A file holds blocks of "; id" followed by grid lines, separated by blank
lines. The same format is used for the bundled suite.
"""

from pathlib import Path
from typing import Iterable, List, Tuple

from loguru import logger

from ..errors import LevelParseError
from .level import Level, format_level, parse_level


def _split_blocks(text: str) -> List[Tuple[int, str]]:
    """(first line number, block text) for every level block."""
    blocks: List[Tuple[int, str]] = []
    current: List[str] = []
    start = 1
    for number, line in enumerate(text.splitlines(), start=1):
        is_header = line.startswith(";")
        if (not line.strip() or is_header) and current and any(not row.startswith(";") for row in current):
            blocks.append((start, "\n".join(current)))
            current = []
        if not line.strip():
            continue
        if not current:
            start = number
        current.append(line)
    if current:
        blocks.append((start, "\n".join(current)))
    return blocks


def parse_level_file(path: Path) -> List[Level]:
    """
    Parse every level block in a file.

    Blocks without a header get their index within the file as id.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LevelParseError(f"Cannot read level file: {exc}", path=str(path)) from exc

    levels = []
    for index, (first_line, block) in enumerate(_split_blocks(text)):
        levels.append(parse_level(block, level_id=str(index), first_line=first_line, path=str(path)))
    return levels


def load_boxoban_dir(path: Path) -> List[Level]:
    """
    Load every *.txt level file in a directory, in sorted file order.

    Args:
        path: Directory of Boxoban-format files

    Returns:
        All levels, per-file ordering preserved
    """
    path = Path(path)
    if not path.is_dir():
        raise LevelParseError("Not a directory", path=str(path))
    levels: List[Level] = []
    files = sorted(p for p in path.iterdir() if p.suffix == ".txt")
    for file in files:
        levels.extend(parse_level_file(file))
    logger.info(f"Loaded {len(levels)} levels from {len(files)} files in {path}")
    return levels


def load_levels(path: Path) -> List[Level]:
    """Load a single level file or a directory of them."""
    path = Path(path)
    if path.is_dir():
        return load_boxoban_dir(path)
    return parse_level_file(path)


def write_level_file(levels: Iterable[Level], path: Path) -> None:
    """Write levels with "; id" headers, separated by blank lines."""
    blocks = []
    for index, level in enumerate(levels):
        level_id = level.level_id if level.level_id is not None else str(index)
        blocks.append(f"; {level_id}\n{format_level(level)}")
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
