"""
DRC(D, N) inference: linear encoder, stacked ConvLSTM layers ticked N times
per step with pool-and-inject and a boundary channel, top-down skip from the
last layer into the first, and an optional MLP head.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import ShapeMismatch
from ..specs import InterventionSpec
from .conv import conv2d, sigmoid
from .weights import ENCODER_ORIGINS, LayerWeights, Probe, WeightSet

GATE_NAMES = ("i", "j", "f", "o")

# (tensor name, layer, tick) -> (channels, replacement H×W×C or H×W×len(channels))
Replacements = Mapping[Tuple[str, int, int], Tuple[Tuple[int, ...], np.ndarray]]


@dataclass
class LayerState:
    h: np.ndarray
    c: np.ndarray

    def copy(self) -> "LayerState":
        return LayerState(h=self.h.copy(), c=self.c.copy())


@dataclass
class GateRecord:
    """Everything one layer computed on one tick."""

    layer: int
    tick: int
    gates: Dict[str, np.ndarray]  # i, j, f, o after their nonlinearity
    pre: Dict[str, np.ndarray]  # gate pre-activations
    inputs: Dict[str, np.ndarray]  # "We", "Wh1", "Wh2" input stacks
    c: np.ndarray
    h: np.ndarray


@dataclass
class ForwardResult:
    states: List[LayerState]
    logits: Optional[np.ndarray]
    value: Optional[float]
    records: List[GateRecord] = field(default_factory=list)

    @property
    def h_final(self) -> np.ndarray:
        return self.states[-1].h


def zero_state(layers: int, channels: int, height: int, width: int) -> List[LayerState]:
    return [
        LayerState(h=np.zeros((height, width, channels)), c=np.zeros((height, width, channels)))
        for _ in range(layers)
    ]


def boundary_channel(height: int, width: int) -> np.ndarray:
    """One-channel map with ones on the outermost ring of squares."""
    boundary = np.zeros((height, width, 1))
    boundary[0, :, 0] = 1.0
    boundary[-1, :, 0] = 1.0
    boundary[:, 0, 0] = 1.0
    boundary[:, -1, 0] = 1.0
    return boundary


def encode(obs: np.ndarray, weights: WeightSet) -> np.ndarray:
    """Two stacked 4×4 convolutions with no nonlinearity."""
    if obs.ndim != 3 or obs.shape[2] != 3:
        raise ShapeMismatch(f"Observation must be H×W×3, got {obs.shape}")
    first = conv2d(obs, weights.enc_w1, weights.enc_b1, origin=ENCODER_ORIGINS[0])
    return conv2d(first, weights.enc_w2, weights.enc_b2, origin=ENCODER_ORIGINS[1])


def pool_inject(h_prev: np.ndarray, weights: LayerWeights) -> np.ndarray:
    """Per-channel mean/max mix of the previous hidden state, broadcast over the grid."""
    pooled = weights.pool_mean * h_prev.mean(axis=(0, 1)) + weights.pool_max * h_prev.max(axis=(0, 1))
    return np.broadcast_to(pooled, h_prev.shape).copy()


def convlstm_tick(
    state: LayerState,
    e_t: np.ndarray,
    h_below: np.ndarray,
    boundary: np.ndarray,
    weights: LayerWeights,
    layer: int = 0,
    tick: int = 0,
    interventions: Sequence[InterventionSpec] = (),
    replacements: Optional[Replacements] = None,
    record: bool = False,
) -> Tuple[LayerState, Optional[GateRecord]]:
    """
    One ConvLSTM update.

    i = tanh, j = sigmoid, f = sigmoid, o = tanh over the summed convolutions
    of [e_t, boundary], h_below and [h_prev, pooled]; then c' = f·c + i·j and
    h' = o·tanh(c').
    """
    if e_t.shape[:2] != state.h.shape[:2] or h_below.shape != state.h.shape:
        raise ShapeMismatch(f"Tick inputs {e_t.shape}/{h_below.shape} do not match state {state.h.shape}")

    inputs = {
        "We": np.concatenate([e_t, boundary], axis=2),
        "Wh1": h_below,
        "Wh2": np.concatenate([state.h, pool_inject(state.h, weights)], axis=2),
    }
    pre: Dict[str, np.ndarray] = {}
    gates: Dict[str, np.ndarray] = {}
    for name in GATE_NAMES:
        kernels = weights.gates[name]
        total = conv2d(inputs["We"], kernels.We) + conv2d(inputs["Wh1"], kernels.Wh1)
        total = total + conv2d(inputs["Wh2"], kernels.Wh2) + kernels.bias
        pre[name] = total
        activation = sigmoid(total) if name in ("j", "f") else np.tanh(total)
        gates[name] = _edit(name, activation, layer, tick, interventions, replacements)

    c_new = gates["f"] * state.c + gates["i"] * gates["j"]
    c_new = _edit("c", c_new, layer, tick, interventions, replacements)
    h_new = gates["o"] * np.tanh(c_new)
    h_new = _edit("h", h_new, layer, tick, interventions, replacements)

    rec = None
    if record:
        rec = GateRecord(layer=layer, tick=tick, gates=gates, pre=pre, inputs=inputs, c=c_new, h=h_new)
    return LayerState(h=h_new, c=c_new), rec


def _edit(
    name: str,
    tensor: np.ndarray,
    layer: int,
    tick: int,
    interventions: Sequence[InterventionSpec],
    replacements: Optional[Replacements],
) -> np.ndarray:
    if replacements:
        key = (name, layer, tick)
        if key in replacements:
            channels, value = replacements[key]
            tensor = tensor.copy()
            if channels:
                tensor[:, :, list(channels)] = value if value.shape[2] == len(channels) else value[:, :, list(channels)]
            else:
                tensor[:, :, :] = value
    for spec in interventions:
        if spec.applies(name, layer, tick):
            tensor = spec.apply(tensor)
    return tensor


def drc_forward(
    states: List[LayerState],
    obs: np.ndarray,
    weights: WeightSet,
    ticks: Optional[int] = None,
    interventions: Sequence[InterventionSpec] = (),
    replacements: Optional[Replacements] = None,
    record: bool = False,
) -> ForwardResult:
    """
    Run one environment step of the network.

    Args:
        states: Per-layer state from the previous step
        obs: H×W×3 observation
        weights: Network weights
        ticks: Ticks to run; the config's N when omitted
        interventions: Edits applied at their (layer, tick) points
        replacements: Whole-tensor replacements keyed by (tensor, layer, tick)
        record: Keep a GateRecord per (layer, tick)

    Returns:
        ForwardResult with the new states, head outputs and optional records
    """
    n_ticks = weights.config.ticks if ticks is None else ticks
    if n_ticks < 1:
        raise ValueError("ticks must be at least 1")
    if len(states) != len(weights.layers):
        raise ShapeMismatch(f"{len(states)} layer states for {len(weights.layers)} layers")
    for spec in interventions:
        spec.validate(obs.shape[0], obs.shape[1], weights.channels, layers=len(weights.layers))

    e_t = encode(obs, weights)
    boundary = boundary_channel(obs.shape[0], obs.shape[1])
    current = [state.copy() for state in states]
    records: List[GateRecord] = []
    for tick in range(n_ticks):
        top_down = current[-1].h
        for d, layer_weights in enumerate(weights.layers):
            h_below = top_down if d == 0 else current[d - 1].h
            current[d], rec = convlstm_tick(
                current[d],
                e_t,
                h_below,
                boundary,
                layer_weights,
                layer=d,
                tick=tick,
                interventions=interventions,
                replacements=replacements,
                record=record,
            )
            if rec is not None:
                records.append(rec)

    logits, value = (None, None)
    if weights.head is not None:
        logits, value = weights.head.forward(current[-1].h)
    return ForwardResult(states=current, logits=logits, value=value, records=records)


def probe_readout(h_final: np.ndarray, probe: Probe) -> np.ndarray:
    """Mean over squares of the per-square probe logits."""
    if h_final.shape[2] != probe.weight.shape[0]:
        raise ShapeMismatch(f"Probe expects {probe.weight.shape[0]} channels, h has {h_final.shape[2]}")
    return h_final.mean(axis=(0, 1)) @ probe.weight + probe.bias
