"""
From-scratch DRC(D, N) ConvLSTM inference and weight serialization.
"""

from .conv import compose_kernels, conv2d, conv2d_per_input, sigmoid
from .network import (
    GATE_NAMES,
    ForwardResult,
    GateRecord,
    LayerState,
    boundary_channel,
    convlstm_tick,
    drc_forward,
    encode,
    pool_inject,
    probe_readout,
    zero_state,
)
from .weights import (
    ENCODER_ORIGINS,
    GateKernels,
    HeadWeights,
    LayerWeights,
    Probe,
    WeightSet,
    expected_shapes,
    load_weights,
    read_tensors,
    save_weights,
    write_weights,
)

__all__ = [
    "ENCODER_ORIGINS",
    "ForwardResult",
    "GATE_NAMES",
    "GateKernels",
    "GateRecord",
    "HeadWeights",
    "LayerState",
    "LayerWeights",
    "Probe",
    "WeightSet",
    "boundary_channel",
    "compose_kernels",
    "conv2d",
    "conv2d_per_input",
    "convlstm_tick",
    "drc_forward",
    "encode",
    "expected_shapes",
    "load_weights",
    "pool_inject",
    "probe_readout",
    "read_tensors",
    "save_weights",
    "sigmoid",
    "write_weights",
    "zero_state",
]
