"""
Linear regression of channel activations on square features.

offset_regression fits every channel on the 17 features shifted by each
offset in {-2..2}² and keeps the offset with the lowest squared error;
label_regression compares the fit on all features with the fit on the 5
base features alone.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from sklearn.linear_model import Ridge

from ..errors import DegenerateDataError, EmptyDatasetError, ShapeMismatch
from .features import N_BASE, FeatureSet, RecordedStep, build_features

OFFSET_RANGE = range(-2, 3)
OFFSETS: Tuple[Tuple[int, int], ...] = tuple(product(OFFSET_RANGE, OFFSET_RANGE))
RIDGE = 1e-8
MIN_OFFSET_EPISODES = 20


def shift_grid(x: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Move an H×W×K grid by (dr, dc): out[r, c] = x[r - dr, c - dc], zeros where that falls outside."""
    height, width = x.shape[:2]
    out = np.zeros_like(x)
    rows_out = slice(max(dr, 0), height + min(dr, 0))
    cols_out = slice(max(dc, 0), width + min(dc, 0))
    rows_in = slice(max(-dr, 0), height + min(-dr, 0))
    cols_in = slice(max(-dc, 0), width + min(-dc, 0))
    out[rows_out, cols_out] = x[rows_in, cols_in]
    return out


def _stack(grids: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([g.reshape(-1, g.shape[2]) for g in grids], axis=0)


def _fit(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-column mean squared error and Pearson correlation of a ridge fit."""
    model = Ridge(alpha=RIDGE, fit_intercept=True)
    model.fit(x, y)
    pred = model.predict(x).reshape(y.shape)
    loss = ((pred - y) ** 2).mean(axis=0)
    return loss, _correlation(pred, y)


def _correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    denom = np.sqrt((a**2).sum(axis=0) * (b**2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (a * b).sum(axis=0) / denom
    return np.where(denom > 0, r, 0.0)


@dataclass
class OffsetRow:
    channel: int
    offset: Tuple[int, int]
    correlation: float
    loss: float
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "offset_row": self.offset[0],
            "offset_col": self.offset[1],
            "correlation": self.correlation,
            "loss": self.loss,
            "flags": ";".join(self.flags),
        }


@dataclass
class OffsetReport:
    rows: List[OffsetRow] = field(default_factory=list)
    n_samples: int = 0

    def row(self, channel: int) -> OffsetRow:
        return next(r for r in self.rows if r.channel == channel)


def _constant(y: np.ndarray) -> np.ndarray:
    return np.ptp(y, axis=0) == 0


def fit_offsets(
    activations: Sequence[np.ndarray],
    features: Sequence[np.ndarray],
    channels: Optional[Sequence[int]] = None,
) -> OffsetReport:
    """
    Best offset per channel.

    Args:
        activations: Per-step H×W×K activation grids
        features: Per-step H×W×F feature grids, aligned with ``activations``
        channels: Channels to report; all K when omitted

    Returns:
        OffsetReport; constant channels get offset (0, 0), correlation 0 and a flag
    """
    if not activations:
        raise EmptyDatasetError("No activations to regress")
    if len(activations) != len(features):
        raise ShapeMismatch(f"{len(activations)} activation grids for {len(features)} feature grids")
    channels = list(range(activations[0].shape[2])) if channels is None else list(channels)
    y = _stack([a[:, :, channels] for a in activations])
    constant = _constant(y)

    best_loss = np.full(len(channels), np.inf)
    best_corr = np.zeros(len(channels))
    best_offset = [(0, 0)] * len(channels)
    for dr, dc in OFFSETS:
        x = _stack([shift_grid(f, dr, dc) for f in features])
        loss, corr = _fit(x, y)
        better = loss < best_loss - 1e-12
        for k in np.flatnonzero(better):
            best_loss[k], best_corr[k], best_offset[k] = loss[k], corr[k], (dr, dc)

    report = OffsetReport(n_samples=y.shape[0])
    for k, channel in enumerate(channels):
        if constant[k]:
            report.rows.append(OffsetRow(channel, (0, 0), 0.0, 0.0, flags=["constant"]))
            logger.warning(f"Channel {channel} is constant; offset regression skipped")
        else:
            report.rows.append(OffsetRow(channel, best_offset[k], float(best_corr[k]), float(best_loss[k])))
    return report


def offset_regression(
    steps: Sequence[RecordedStep],
    channels: Optional[Sequence[int]] = None,
    min_episodes: int = MIN_OFFSET_EPISODES,
) -> OffsetReport:
    """
    Offset regression of recorded steps on their 5 base and 12 future features.

    Raises:
        DegenerateDataError: When the steps come from fewer than ``min_episodes`` episodes
    """
    n_episodes = len({step.episode for step in steps})
    if n_episodes < min_episodes:
        raise DegenerateDataError(f"Offset regression needs {min_episodes} episodes, got {n_episodes}")
    features = build_features(steps)
    return fit_offsets([s.activations for s in steps], [features.full(i) for i in range(len(features))], channels)


@dataclass
class CorrelationRow:
    channel: int
    full: float
    base: float
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"channel": self.channel, "full": self.full, "base": self.base, "flags": ";".join(self.flags)}


@dataclass
class CorrelationReport:
    rows: List[CorrelationRow] = field(default_factory=list)
    n_samples: int = 0

    def row(self, channel: int) -> CorrelationRow:
        return next(r for r in self.rows if r.channel == channel)


def label_regression(
    steps: Sequence[RecordedStep],
    channels: Optional[Sequence[int]] = None,
    features: Optional[FeatureSet] = None,
) -> CorrelationReport:
    """Per channel, correlation of the fit on all 17 features and on the 5 base features alone."""
    if not steps:
        raise EmptyDatasetError("No recorded steps to regress")
    features = features or build_features(steps)
    channels = list(range(steps[0].activations.shape[2])) if channels is None else list(channels)
    y = _stack([s.activations[:, :, channels] for s in steps])
    x_full = _stack([features.full(i) for i in range(len(features))])
    _, full = _fit(x_full, y)
    _, base = _fit(x_full[:, :N_BASE], y)
    constant = _constant(y)

    report = CorrelationReport(n_samples=y.shape[0])
    for k, channel in enumerate(channels):
        if constant[k]:
            report.rows.append(CorrelationRow(channel, 0.0, 0.0, flags=["constant"]))
        else:
            report.rows.append(CorrelationRow(channel, float(full[k]), float(base[k])))
    return report
