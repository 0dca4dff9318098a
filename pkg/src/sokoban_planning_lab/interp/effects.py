"""
Direct effect of each input channel on one gate's pre-activation.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..drc.conv import conv2d_per_input
from ..drc.network import GateRecord
from ..drc.weights import WeightSet
from ..errors import EmptyDatasetError, ShapeMismatch
from ..specs import KERNELS


@dataclass
class DirectEffect:
    """What one input channel of one kernel adds to the output channel."""

    kernel: str
    in_channel: int
    max_abs: float
    contribution: np.ndarray  # H×W

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "in_channel": self.in_channel, "max_abs": self.max_abs}


def contributions(record: GateRecord, weights: WeightSet, gate: str, out_channel: int) -> List[DirectEffect]:
    """Per-(kernel, in-channel) contributions to ``gate``'s ``out_channel`` on the recorded tick."""
    kernels = weights.layers[record.layer].gates[gate]
    if not 0 <= out_channel < kernels.bias.shape[0]:
        raise ShapeMismatch(f"Output channel {out_channel} out of range 0..{kernels.bias.shape[0] - 1}")
    effects = []
    for name in KERNELS:
        per_input = conv2d_per_input(record.inputs[name], getattr(kernels, name))[..., out_channel]
        for in_channel, contribution in enumerate(per_input):
            effects.append(
                DirectEffect(
                    kernel=name,
                    in_channel=in_channel,
                    max_abs=float(np.abs(contribution).max()),
                    contribution=contribution,
                )
            )
    return effects


def direct_effect(
    record: Optional[GateRecord],
    weights: WeightSet,
    gate: str,
    out_channel: int,
    kernels: Sequence[str] = KERNELS,
    top: Optional[int] = None,
) -> List[DirectEffect]:
    """
    Rank input channels by the largest magnitude they add to the output
    channel across all squares.

    Args:
        record: GateRecord from drc_forward(record=True)
        weights: Weights the record was produced with
        gate: i, j, f or o
        out_channel: Output channel of the gate
        kernels: Which input stacks to rank (We, Wh1, Wh2)
        top: Keep only the strongest ``top`` entries

    Returns:
        DirectEffects, strongest first

    Raises:
        EmptyDatasetError: No recording
    """
    if record is None or not record.inputs:
        raise EmptyDatasetError("direct_effect needs a recorded forward pass (record=True)")
    effects = [e for e in contributions(record, weights, gate, out_channel) if e.kernel in kernels]
    effects.sort(key=lambda e: (-e.max_abs, KERNELS.index(e.kernel), e.in_channel))
    return effects if top is None else effects[:top]


def reconstruct_pre(record: GateRecord, weights: WeightSet, gate: str, out_channel: int) -> np.ndarray:
    """Sum of every contribution plus the bias; equals the recorded pre-activation."""
    total = sum(e.contribution for e in contributions(record, weights, gate, out_channel))
    return total + weights.layers[record.layer].gates[gate].bias[out_channel]
