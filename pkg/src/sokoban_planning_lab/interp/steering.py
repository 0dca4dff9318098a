"""
Weight steering: scale the recurrent hidden-to-hidden kernels.
"""

from dataclasses import replace
from typing import Sequence

from loguru import logger

from ..drc.weights import WeightSet
from ..errors import ConfigError

RECURRENT_KERNELS = ("Wh1", "Wh2")


def steer_weights(weights: WeightSet, factor: float, targets: Sequence[str] = RECURRENT_KERNELS) -> WeightSet:
    """
    New WeightSet with the Wh1 and/or Wh2 kernels of every gate and layer
    multiplied by ``factor``. Encoder, We, biases, pooling and head are shared
    with the input, which is left untouched.
    """
    if factor <= 0:
        raise ConfigError(f"Steering factor must be positive, got {factor}")
    unknown = set(targets) - set(RECURRENT_KERNELS)
    if unknown or not targets:
        raise ConfigError(f"Steering targets must be a subset of {', '.join(RECURRENT_KERNELS)}")
    if factor == 1.0:
        return weights
    if set(targets) == set(RECURRENT_KERNELS):
        steered = weights.map_recurrent(lambda kernel: kernel * factor)
    else:
        name = targets[0]
        layers = []
        for layer in weights.layers:
            gates = {g: replace(k, **{name: getattr(k, name) * factor}) for g, k in layer.gates.items()}
            layers.append(replace(layer, gates=gates))
        steered = replace(weights, layers=layers)
    logger.debug(f"Steered {', '.join(targets)} by {factor}")
    return steered
