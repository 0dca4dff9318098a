"""
Pytest configuration and shared fixtures.
"""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from sokoban_planning_lab.config import DrcConfig
from sokoban_planning_lab.drc.weights import WeightSet
from sokoban_planning_lab.log import setup_logging
from sokoban_planning_lab.sokoban.generators import corridor_level, two_paths_level
from sokoban_planning_lab.sokoban.level import parse_level

SMALL_LEVEL = """\
#######
#@ $ .#
#     #
#######"""


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield Path(tmp_dir)


@pytest.fixture
def small_level():
    """One box, one target, a two-row room."""
    return parse_level(SMALL_LEVEL, level_id="small")


@pytest.fixture
def corridor():
    """Eight-wide one-high corridor level."""
    return corridor_level(8)


@pytest.fixture
def two_paths():
    """The 5x5 two-route level."""
    return two_paths_level()


@pytest.fixture
def small_config():
    """Two layers of four channels on a 5x5 grid."""
    return DrcConfig(layers=2, ticks=2, channels=4, height=5, width=5, mlp_hidden=8)


@pytest.fixture
def small_weights(small_config):
    """Seeded random weights with a head for the 5x5 grid."""
    return WeightSet.random(small_config, np.random.default_rng(7), scale=0.3)


@pytest.fixture
def headless_weights(small_config):
    """Seeded random weights without a head."""
    return WeightSet.random(small_config, np.random.default_rng(11), scale=0.3, with_head=False)


@pytest.fixture(autouse=True)
def reset_logging():
    """Put the log sink back on the real stderr after tests that reconfigure it."""
    yield
    setup_logging("WARNING")
