"""
Probes: AUC of single channels for future movement, horizon profiles and a
linear action probe on the pooled final hidden state.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from sklearn.metrics import roc_auc_score
from sklearn.model_selection import train_test_split

from ..drc.weights import Probe
from ..errors import DegenerateDataError, EmptyDatasetError
from ..planner.runner import Episode
from ..sokoban.level import Action
from .features import RecordedStep
from .rollout import DrcEpisode
from .stats import ConfidenceInterval, bootstrap_ci

VARIANTS = ("short", "long")
LABEL_KINDS = ("box", "agent")
SHORT_HORIZON_LIMIT = 10
MIN_PROBE_SAMPLES = 1000
MAX_ITERATIONS = 10_000
TOLERANCE = 1e-6


def movement_labels(step: RecordedStep, direction: Action, horizon: int, variant: str, kind: str) -> np.ndarray:
    """
    H×W booleans: a box (or the agent) leaves the square in ``direction``
    within the next ``horizon`` steps (short) or after them (long).
    """
    labels = step.labels
    tensor = labels.box_move_tensor() if kind == "box" else labels.agent_move_tensor()
    window = tensor[:horizon] if variant == "short" else tensor[horizon:]
    if window.shape[0] == 0:
        return np.zeros((step.level.height, step.level.width), dtype=bool)
    return window[:, :, :, direction.value].any(axis=0)


def _pairs(steps: Sequence[RecordedStep], channel: int, direction: Action, horizon: int, variant: str, kind: str):
    scores = np.concatenate([s.activations[:, :, channel].ravel() for s in steps])
    labels = np.concatenate([movement_labels(s, direction, horizon, variant, kind).ravel() for s in steps])
    return scores, labels


def _rank_values(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per positive, the fraction of negatives scored below it (ties count half); their mean is the AUC."""
    negatives = np.sort(scores[~labels])
    positives = scores[labels]
    below = np.searchsorted(negatives, positives, side="left")
    at_most = np.searchsorted(negatives, positives, side="right")
    return (below + 0.5 * (at_most - below)) / negatives.size


@dataclass
class AucRow:
    channel: int
    direction: Action
    horizon: int
    variant: str
    auc: float
    polarity: int
    n_positive: int
    ci: Optional[ConfidenceInterval] = None
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "direction": self.direction.name,
            "horizon": self.horizon,
            "variant": self.variant,
            "auc": self.auc,
            "polarity": self.polarity,
            "n_positive": self.n_positive,
            "ci_low": self.ci.low if self.ci else None,
            "ci_high": self.ci.high if self.ci else None,
            "flags": ";".join(self.flags),
        }


@dataclass
class AucReport:
    rows: List[AucRow] = field(default_factory=list)

    def get(self, channel: int, horizon: int) -> AucRow:
        return next(r for r in self.rows if r.channel == channel and r.horizon == horizon)


def _split(steps: Sequence[RecordedStep], rng: np.random.Generator) -> Tuple[List[RecordedStep], List[RecordedStep]]:
    if len(steps) < 2:
        return list(steps), list(steps)
    order = rng.permutation(len(steps))
    half = len(steps) // 2
    return [steps[i] for i in order[:half]], [steps[i] for i in order[half:]]


def estimate_polarity(scores: np.ndarray, labels: np.ndarray) -> Optional[int]:
    """+1 or -1 by the sign of the score-label correlation; None when undefined."""
    if labels.all() or not labels.any() or np.ptp(scores) == 0:
        return None
    r = np.corrcoef(scores, labels.astype(np.float64))[0, 1]
    return -1 if r < 0 else 1


def auc_probe(
    steps: Sequence[RecordedStep],
    channel_directions: Dict[int, Action],
    horizons: Sequence[int] = (10,),
    variant: str = "short",
    kind: str = "box",
    rng: Optional[np.random.Generator] = None,
    with_ci: bool = False,
) -> AucReport:
    """
    AUC of each channel for predicting movement in its direction.

    Steps are split in half: polarity comes from the score-label
    correlation on the first half, the AUC of polarity·activation from the
    second. Single-class labels give a NaN AUC and a flag.

    Args:
        steps: Recorded steps with their future actions
        channel_directions: Channel index -> the direction it is read for
        horizons: Horizons k in steps
        variant: "short" (move within k steps) or "long" (move after k steps)
        kind: "box" or "agent" movement
        rng: Generator for the split and the bootstrap
        with_ci: Add a bootstrap interval over positives (1000 resamples)

    Returns:
        AucReport with one row per (channel, horizon)
    """
    if variant not in VARIANTS:
        raise ValueError(f"Unknown AUC variant '{variant}'")
    if kind not in LABEL_KINDS:
        raise ValueError(f"Unknown label kind '{kind}'")
    if not steps:
        raise EmptyDatasetError("AUC probe needs recorded steps")
    rng = rng if rng is not None else np.random.default_rng(0)
    train, test = _split(steps, rng)

    report = AucReport()
    for channel, direction in channel_directions.items():
        for horizon in horizons:
            flags = []
            polarity = estimate_polarity(*_pairs(train, channel, direction, horizon, variant, kind))
            if polarity is None:
                flags.append("polarity_undefined")
                polarity = 1
            scores, labels = _pairs(test, channel, direction, horizon, variant, kind)
            scores = polarity * scores
            auc, ci = float("nan"), None
            if labels.all() or not labels.any():
                flags.append("single_class")
            else:
                auc = float(roc_auc_score(labels, scores))
                if with_ci:
                    ci = bootstrap_ci(_rank_values(scores, labels), rng=rng)
            report.rows.append(
                AucRow(channel, direction, horizon, variant, auc, polarity, int(labels.sum()), ci=ci, flags=flags)
            )
    return report


def horizon_profile(
    steps: Sequence[RecordedStep],
    channel: int,
    direction: Action,
    horizons: Sequence[int] = tuple(range(1, 51)),
    kind: str = "box",
    rng: Optional[np.random.Generator] = None,
) -> List[Tuple[int, float]]:
    """(horizon, AUC) for the short-term variant at each horizon."""
    report = auc_probe(steps, {channel: direction}, horizons, "short", kind, rng=rng)
    return [(row.horizon, row.auc) for row in report.rows]


def classify_horizon(profile: Sequence[Tuple[int, float]]) -> Optional[str]:
    """'short' when the AUC peaks within 10 steps, 'long' when later; None without a defined AUC."""
    defined = [(k, auc) for k, auc in profile if not np.isnan(auc)]
    if not defined:
        return None
    peak = max(defined, key=lambda item: (item[1], -item[0]))[0]
    return "short" if peak <= SHORT_HORIZON_LIMIT else "long"


@dataclass
class ProbeFit:
    probe: Probe
    accuracy: float
    iterations: int
    loss: float
    n_train: int
    n_test: int
    flags: List[str] = field(default_factory=list)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(features @ self.probe.weight + self.probe.bias, axis=1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> float:
    return float(-(onehot * np.log(np.clip(probs, 1e-300, None))).sum(axis=1).mean())


def train_action_probe(
    features: np.ndarray,
    actions: Sequence[int],
    n_actions: int = 4,
    learning_rate: float = 0.5,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = TOLERANCE,
    holdout: float = 0.2,
    seed: int = 0,
    min_samples: int = MIN_PROBE_SAMPLES,
) -> ProbeFit:
    """
    Multinomial logistic regression by full-batch gradient descent.

    Training stops when the relative loss change drops below ``tolerance``
    or after ``max_iterations`` iterations; accuracy is measured on a
    held-out ``holdout`` fraction.

    Args:
        features: (N, C) pooled hidden states
        actions: (N,) action indices taken
        n_actions: Number of classes
        learning_rate: Gradient step size
        max_iterations: Iteration cap
        tolerance: Relative loss change that ends training
        holdout: Test fraction
        seed: Split seed
        min_samples: Smallest dataset accepted

    Returns:
        ProbeFit with a Probe usable by probe_readout

    Raises:
        EmptyDatasetError: Fewer than ``min_samples`` samples
        DegenerateDataError: Non-finite features
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(actions, dtype=np.int64)
    if x.shape[0] < min_samples:
        raise EmptyDatasetError(f"Action probe needs {min_samples} samples, got {x.shape[0]}")
    if x.shape[0] != y.shape[0]:
        raise DegenerateDataError(f"{x.shape[0]} feature rows for {y.shape[0]} actions")
    if not np.isfinite(x).all():
        raise DegenerateDataError("Action probe features contain NaN or infinity")

    x_train, x_test, y_train, y_test = train_test_split(x, y, test_size=holdout, random_state=seed)
    onehot = np.eye(n_actions)[y_train]
    weight = np.zeros((x.shape[1], n_actions))
    bias = np.zeros(n_actions)
    loss = _cross_entropy(_softmax(x_train @ weight + bias), onehot)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        probs = _softmax(x_train @ weight + bias)
        grad = (probs - onehot) / x_train.shape[0]
        weight -= learning_rate * (x_train.T @ grad)
        bias -= learning_rate * grad.sum(axis=0)
        new_loss = _cross_entropy(_softmax(x_train @ weight + bias), onehot)
        change = abs(loss - new_loss) / max(abs(loss), 1e-12)
        loss = new_loss
        if change < tolerance:
            break

    fit = ProbeFit(
        probe=Probe(weight=weight, bias=bias),
        accuracy=0.0,
        iterations=iterations,
        loss=loss,
        n_train=x_train.shape[0],
        n_test=x_test.shape[0],
    )
    fit.accuracy = float((fit.predict(x_test) == y_test).mean())
    if iterations == max_iterations:
        fit.flags.append("iteration_cap")
    logger.info(f"Action probe: accuracy {fit.accuracy:.3f} after {iterations} iterations")
    return fit


def probe_dataset_from_drc(episodes: Sequence[DrcEpisode]) -> Tuple[np.ndarray, np.ndarray]:
    """Square-mean final-layer h and the action taken, for every acting step."""
    rows, actions = [], []
    for episode in episodes:
        for record in episode.steps:
            if record.acted:
                rows.append(record.states[-1].h.mean(axis=(0, 1)))
                actions.append(record.readout.action.value)
    if not rows:
        raise EmptyDatasetError("No acting steps in the episodes")
    return np.stack(rows), np.asarray(actions)


def probe_dataset_from_engine(episodes: Sequence[Episode], channels: Optional[Sequence[int]] = None):
    """Square-mean plan grid (optionally restricted to ``channels``) and the action taken, for every acting step."""
    rows, actions = [], []
    for episode in episodes:
        for t, acted in enumerate(episode.acted):
            if acted:
                acts = episode.grids[t + 1].acts
                if channels is not None:
                    acts = acts[:, :, list(channels)]
                rows.append(acts.mean(axis=(0, 1)))
                actions.append(episode.readouts[t].action.value)
    if not rows:
        raise EmptyDatasetError("No acting steps in the episodes")
    return np.stack(rows), np.asarray(actions)
