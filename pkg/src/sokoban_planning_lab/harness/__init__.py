"""
Batch evaluation, output writers, run manifests and the bundled suite.
"""

from .dump import (
    diverging_rgb,
    dump_heatmap,
    export_drc_episode,
    export_episode,
    read_channel_csv,
    read_ppm,
    write_channel_csv,
    write_jsonl,
    write_ppm,
    write_rows,
)
from .evaluate import Evaluator, LevelOutcome, SolverKind, SolveStats, evaluate
from .manifest import RunManifest
from .suite import SUITE_SPEC, load_suite, suite_levels, write_suite

__all__ = [
    "Evaluator",
    "LevelOutcome",
    "RunManifest",
    "SUITE_SPEC",
    "SolveStats",
    "SolverKind",
    "diverging_rgb",
    "dump_heatmap",
    "evaluate",
    "export_drc_episode",
    "export_episode",
    "load_suite",
    "read_channel_csv",
    "read_ppm",
    "suite_levels",
    "write_channel_csv",
    "write_jsonl",
    "write_ppm",
    "write_rows",
    "write_suite",
]
