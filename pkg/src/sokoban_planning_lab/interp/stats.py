"""
Bootstrap confidence intervals shared by solve statistics, intervention
scores and AUC reports.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import EmptyDatasetError

DEFAULT_RESAMPLES = 1000


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    low: float
    high: float
    level: float = 0.95

    @property
    def width(self) -> float:
        return self.high - self.low

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "low": self.low, "high": self.high, "level": self.level}


def bootstrap_ci(
    values: Sequence[float],
    n_resamples: int = DEFAULT_RESAMPLES,
    rng: Optional[np.random.Generator] = None,
    level: float = 0.95,
) -> ConfidenceInterval:
    """
    Percentile bootstrap interval for the mean of ``values``.

    Raises:
        EmptyDatasetError: No values
    """
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise EmptyDatasetError("bootstrap_ci needs at least one value")
    rng = rng if rng is not None else np.random.default_rng(0)
    draws = rng.integers(0, data.size, size=(n_resamples, data.size))
    means = data[draws].mean(axis=1)
    tail = (1.0 - level) / 2.0
    low, high = np.quantile(means, [tail, 1.0 - tail])
    return ConfidenceInterval(estimate=float(data.mean()), low=float(low), high=float(high), level=level)
