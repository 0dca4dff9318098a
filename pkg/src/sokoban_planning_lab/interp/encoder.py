"""
Fold the linear encoder into a gate's input kernel.

The encoder is two 4×4 convolutions with no nonlinearity in between, so the
path observation -> encoder -> gate We is one 9×9 convolution plus a bias.
The folded kernel is exact away from the grid edge (4 squares in), where
zero padding inside the encoder does not reach.
"""

from dataclasses import dataclass

import numpy as np

from ..drc.conv import compose_kernels, conv2d
from ..drc.network import encode
from ..drc.weights import ENCODER_ORIGINS, WeightSet
from ..errors import ShapeMismatch
from ..specs import GATES

COMBINED_EXTENT = 9
INTERIOR_MARGIN = 4


@dataclass
class CombinedEncoder:
    """Observation-to-gate kernel (9, 9, 3, C) and bias (C,), centered."""

    layer: int
    gate: str
    kernel: np.ndarray
    bias: np.ndarray

    @property
    def origin(self):
        return (COMBINED_EXTENT // 2, COMBINED_EXTENT // 2)

    def forward(self, obs: np.ndarray) -> np.ndarray:
        return conv2d(obs, self.kernel, self.bias, origin=self.origin)


def combine_encoder(weights: WeightSet, layer: int, gate: str) -> CombinedEncoder:
    """
    Compose enc_w1, enc_w2 and the encoder slice of a gate's We kernel.

    Args:
        weights: Network weights
        layer: Layer index
        gate: One of i, j, f, o

    Returns:
        CombinedEncoder whose output matches the two-stage path on interior squares

    Raises:
        ShapeMismatch: Unknown layer/gate or kernels that do not chain
    """
    if gate not in GATES:
        raise ShapeMismatch(f"Unknown gate '{gate}'")
    if not 0 <= layer < len(weights.layers):
        raise ShapeMismatch(f"Layer {layer} out of range 0..{len(weights.layers) - 1}")
    channels = weights.channels
    gate_kernel = weights.layers[layer].gates[gate].We[:, :, :channels, :]
    if gate_kernel.shape[:2] != (3, 3):
        raise ShapeMismatch(f"Expected a 3×3 gate kernel, got {gate_kernel.shape[:2]}")

    encoder_kernel = compose_kernels(weights.enc_w1, weights.enc_w2)
    kernel = compose_kernels(encoder_kernel, gate_kernel)
    origin = tuple(a + b + 1 for a, b in zip(*ENCODER_ORIGINS))
    if kernel.shape[:2] != (COMBINED_EXTENT, COMBINED_EXTENT) or origin != (4, 4):
        raise ShapeMismatch(f"Encoder kernels compose to {kernel.shape[:2]} at origin {origin}, not a centered 9×9")

    encoder_bias = weights.enc_b2 + weights.enc_w2.sum(axis=(0, 1)).T @ weights.enc_b1
    bias = gate_kernel.sum(axis=(0, 1)).T @ encoder_bias
    return CombinedEncoder(layer=layer, gate=gate, kernel=kernel, bias=bias)


def two_stage_gate_input(obs: np.ndarray, weights: WeightSet, layer: int, gate: str) -> np.ndarray:
    """Reference path: run the encoder, then the gate's encoder-input kernel."""
    channels = weights.channels
    return conv2d(encode(obs, weights), weights.layers[layer].gates[gate].We[:, :, :channels, :])


def interior_error(obs: np.ndarray, weights: WeightSet, layer: int, gate: str) -> float:
    """Largest absolute difference between both paths at least 4 squares from every edge."""
    combined = combine_encoder(weights, layer, gate).forward(obs)
    reference = two_stage_gate_input(obs, weights, layer, gate)
    m = INTERIOR_MARGIN
    if obs.shape[0] <= 2 * m or obs.shape[1] <= 2 * m:
        raise ShapeMismatch(f"Grid {obs.shape[:2]} has no squares {m} away from the edge")
    return float(np.abs(combined[m:-m, m:-m] - reference[m:-m, m:-m]).max())
