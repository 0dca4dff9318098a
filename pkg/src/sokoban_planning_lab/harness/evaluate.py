"""
Batch evaluation of a solver over a level set.

Levels are solved on worker threads under a capacity limit; each result is
stored at its level's index, so the output order is the input order.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import anyio
import numpy as np
from loguru import logger

from ..config import LabConfig
from ..drc.weights import WeightSet
from ..errors import EmptyDatasetError, SolverMismatch
from ..interp.rollout import DrcPolicy, run_drc
from ..interp.stats import ConfidenceInterval, bootstrap_ci
from ..planner.channels import ChannelMap
from ..planner.runner import run_planner
from ..sokoban.level import Level, actions_to_str
from ..sokoban.oracle import solve_oracle


class SolverKind(Enum):
    SYNTHETIC = "synthetic"
    DRC = "drc"
    ORACLE = "oracle"


@dataclass
class LevelOutcome:
    index: int
    level_id: Optional[str]
    solved: bool
    n_steps: int
    n_actions: int
    actions: str

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "level_id": self.level_id or "",
            "solved": int(self.solved),
            "n_steps": self.n_steps,
            "n_actions": self.n_actions,
            "actions": self.actions,
        }


@dataclass
class SolveStats:
    """Aggregate over a level set; the interval is a 1000-resample bootstrap of the solve rate."""

    solver: SolverKind
    outcomes: List[LevelOutcome] = field(default_factory=list)
    ci: Optional[ConfidenceInterval] = None

    @property
    def n_levels(self) -> int:
        return len(self.outcomes)

    @property
    def n_solved(self) -> int:
        return sum(1 for o in self.outcomes if o.solved)

    @property
    def solve_rate(self) -> float:
        return self.n_solved / self.n_levels if self.outcomes else 0.0

    @property
    def mean_steps(self) -> float:
        return float(np.mean([o.n_steps for o in self.outcomes])) if self.outcomes else 0.0

    def to_dict(self) -> dict:
        return {
            "solver": self.solver.value,
            "n_levels": self.n_levels,
            "n_solved": self.n_solved,
            "solve_rate": self.solve_rate,
            "mean_steps": self.mean_steps,
            "ci_low": self.ci.low if self.ci else None,
            "ci_high": self.ci.high if self.ci else None,
        }


class Evaluator:
    """Solves single levels with one solver kind."""

    def __init__(
        self,
        solver: SolverKind,
        config: Optional[LabConfig] = None,
        weights: Optional[WeightSet] = None,
        channel_map: Optional[ChannelMap] = None,
    ):
        self.solver = solver
        self.config = config or LabConfig()
        if solver is SolverKind.DRC and weights is None:
            raise SolverMismatch("The drc solver needs weights")
        if solver is not SolverKind.DRC and weights is not None:
            raise SolverMismatch(f"The {solver.value} solver takes no weights")
        self.policy = None
        if weights is not None:
            self.policy = DrcPolicy(weights, gains=self.config.gains, channel_map=channel_map)
        self.channel_map = channel_map

    def solve_one(self, index: int, level: Level) -> LevelOutcome:
        cfg = self.config
        if self.solver is SolverKind.ORACLE:
            result = solve_oracle(level, node_budget=cfg.node_budget)
            actions = result.solution or []
            n = len(actions)
            return LevelOutcome(index, level.level_id, result.solved, n, n, actions_to_str(actions))
        if self.solver is SolverKind.SYNTHETIC:
            episode = run_planner(
                level,
                max_steps=cfg.max_steps,
                ticks_per_step=cfg.ticks_per_step,
                thinking_steps=cfg.thinking_steps,
                gains=cfg.gains,
                channel_map=self.channel_map,
                require_connected=cfg.require_connected,
                record_grids=False,
            )
        else:
            episode = run_drc(
                self.policy, level, max_steps=cfg.max_steps, thinking_steps=cfg.thinking_steps, record_states=False
            ).episode
        return LevelOutcome(
            index, level.level_id, episode.solved, episode.n_steps, episode.n_actions, episode.action_string
        )

    async def evaluate_async(self, levels: Sequence[Level]) -> SolveStats:
        if not levels:
            raise EmptyDatasetError("Nothing to evaluate: the level set is empty")
        limiter = anyio.CapacityLimiter(self.config.workers)
        outcomes: List[Optional[LevelOutcome]] = [None] * len(levels)

        async def run(index: int, level: Level) -> None:
            outcomes[index] = await anyio.to_thread.run_sync(self.solve_one, index, level, limiter=limiter)

        async with anyio.create_task_group() as tg:
            for index, level in enumerate(levels):
                tg.start_soon(run, index, level)

        stats = SolveStats(solver=self.solver, outcomes=[o for o in outcomes if o is not None])
        stats.ci = bootstrap_ci(
            [float(o.solved) for o in stats.outcomes], rng=np.random.default_rng(self.config.seed)
        )
        logger.info(f"{self.solver.value}: solved {stats.n_solved}/{stats.n_levels} ({stats.solve_rate:.1%})")
        return stats


def evaluate(
    solver: SolverKind,
    levels: Sequence[Level],
    config: Optional[LabConfig] = None,
    weights: Optional[WeightSet] = None,
    channel_map: Optional[ChannelMap] = None,
) -> SolveStats:
    """
    Solve every level and aggregate.

    Args:
        solver: synthetic, drc or oracle
        levels: Non-empty level set
        config: Step limits, thinking steps, workers and seed
        weights: Required for drc, refused otherwise
        channel_map: Channel layout for the synthetic planner or headless weights

    Returns:
        SolveStats with outcomes in input order

    Raises:
        EmptyDatasetError: No levels
        SolverMismatch: Weights missing for drc or given to another solver
    """
    evaluator = Evaluator(solver, config=config, weights=weights, channel_map=channel_map)
    return anyio.run(evaluator.evaluate_async, levels)
