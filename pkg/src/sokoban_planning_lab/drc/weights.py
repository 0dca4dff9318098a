"""
Named DRC weights and their binary file format.

File layout (little-endian): magic "DRCW", u8 version, u32 tensor count;
per tensor: u16 name length, UTF-8 name, u8 ndim, ndim × u32 dims,
then float32 values in row-major order.
"""

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ..config import DrcConfig
from ..errors import (
    BadMagic,
    MissingTensor,
    ShapeMismatch,
    TensorShapeError,
    TruncatedTensor,
    UnknownTensor,
    VersionMismatch,
)

MAGIC = b"DRCW"
FORMAT_VERSION = 1
ENCODER_KERNEL = 4
RECURRENT_KERNEL = 3
# (top, left) padding of the two encoder convolutions: window offsets -1..2 then -2..1
ENCODER_ORIGINS: Tuple[Tuple[int, int], Tuple[int, int]] = ((1, 1), (2, 2))
GATES = ("i", "j", "f", "o")


@dataclass
class GateKernels:
    We: np.ndarray  # (3, 3, C + 1, C): encoder output plus boundary channel
    Wh1: np.ndarray  # (3, 3, C, C): hidden state from the layer below
    Wh2: np.ndarray  # (3, 3, 2C, C): own previous hidden state plus pooled channels
    bias: np.ndarray  # (C,)


@dataclass
class LayerWeights:
    gates: Dict[str, GateKernels]
    pool_mean: np.ndarray  # (C,)
    pool_max: np.ndarray  # (C,)


@dataclass
class HeadWeights:
    """Policy/value MLP over the flattened final hidden state."""

    fc1_w: np.ndarray
    fc1_b: np.ndarray
    policy_w: np.ndarray
    policy_b: np.ndarray
    value_w: np.ndarray
    value_b: np.ndarray

    def forward(self, h: np.ndarray) -> Tuple[np.ndarray, float]:
        flat = h.reshape(-1)
        if flat.shape[0] != self.fc1_w.shape[0]:
            raise ShapeMismatch(f"Head expects {self.fc1_w.shape[0]} inputs, got {flat.shape[0]}")
        hidden = np.maximum(flat @ self.fc1_w + self.fc1_b, 0.0)
        return hidden @ self.policy_w + self.policy_b, float((hidden @ self.value_w + self.value_b)[0])


@dataclass
class Probe:
    """Linear action probe: per action, weights over channels plus a bias."""

    weight: np.ndarray  # (C, A)
    bias: np.ndarray  # (A,)

    @property
    def n_params(self) -> int:
        return int(self.weight.size + self.bias.size)


@dataclass
class WeightSet:
    config: DrcConfig
    enc_w1: np.ndarray
    enc_b1: np.ndarray
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    layers: List[LayerWeights] = field(default_factory=list)
    head: Optional[HeadWeights] = None

    @property
    def channels(self) -> int:
        return self.enc_w1.shape[3]

    def tensors(self) -> Dict[str, np.ndarray]:
        """Canonical name -> array, in file order."""
        out: Dict[str, np.ndarray] = {
            "encoder.conv1.weight": self.enc_w1,
            "encoder.conv1.bias": self.enc_b1,
            "encoder.conv2.weight": self.enc_w2,
            "encoder.conv2.bias": self.enc_b2,
        }
        for d, layer in enumerate(self.layers):
            for g in GATES:
                kernels = layer.gates[g]
                out[f"layer{d}.{g}.We"] = kernels.We
                out[f"layer{d}.{g}.Wh1"] = kernels.Wh1
                out[f"layer{d}.{g}.Wh2"] = kernels.Wh2
                out[f"layer{d}.{g}.bias"] = kernels.bias
            out[f"layer{d}.pool.mean"] = layer.pool_mean
            out[f"layer{d}.pool.max"] = layer.pool_max
        if self.head is not None:
            out["head.fc1.weight"] = self.head.fc1_w
            out["head.fc1.bias"] = self.head.fc1_b
            out["head.policy.weight"] = self.head.policy_w
            out["head.policy.bias"] = self.head.policy_b
            out["head.value.weight"] = self.head.value_w
            out["head.value.bias"] = self.head.value_b
        return out

    def map_recurrent(self, fn) -> "WeightSet":
        """New WeightSet with fn applied to every Wh1/Wh2 kernel."""
        layers = []
        for layer in self.layers:
            gates = {
                g: replace(kernels, Wh1=fn(kernels.Wh1), Wh2=fn(kernels.Wh2)) for g, kernels in layer.gates.items()
            }
            layers.append(replace(layer, gates=gates))
        return replace(self, layers=layers)

    def copy(self) -> "WeightSet":
        return WeightSet.from_tensors(self.config, {k: v.copy() for k, v in self.tensors().items()})

    @classmethod
    def zeros(cls, config: DrcConfig, with_head: bool = True) -> "WeightSet":
        shapes = expected_shapes(config, with_head=with_head)
        return cls.from_tensors(config, {name: np.zeros(shape) for name, shape in shapes.items()})

    @classmethod
    def random(
        cls, config: DrcConfig, rng: np.random.Generator, scale: float = 0.1, with_head: bool = True
    ) -> "WeightSet":
        shapes = expected_shapes(config, with_head=with_head)
        return cls.from_tensors(config, {name: rng.normal(0.0, scale, size=shape) for name, shape in shapes.items()})

    @classmethod
    def from_tensors(cls, config: DrcConfig, tensors: Dict[str, np.ndarray]) -> "WeightSet":
        with_head = any(name.startswith("head.") for name in tensors)
        shapes = expected_shapes(config, with_head=with_head)
        for name in tensors:
            if name not in shapes:
                raise UnknownTensor(name, list(shapes))
        for name, shape in shapes.items():
            if name not in tensors:
                raise MissingTensor(name)
            if tuple(tensors[name].shape) != shape:
                raise TensorShapeError(name, shape, tuple(tensors[name].shape))

        t = {name: np.asarray(value, dtype=np.float64) for name, value in tensors.items()}
        layers = []
        for d in range(config.layers):
            gates = {
                g: GateKernels(
                    We=t[f"layer{d}.{g}.We"],
                    Wh1=t[f"layer{d}.{g}.Wh1"],
                    Wh2=t[f"layer{d}.{g}.Wh2"],
                    bias=t[f"layer{d}.{g}.bias"],
                )
                for g in GATES
            }
            pool_mean, pool_max = t[f"layer{d}.pool.mean"], t[f"layer{d}.pool.max"]
            layers.append(LayerWeights(gates=gates, pool_mean=pool_mean, pool_max=pool_max))
        head = None
        if with_head:
            head = HeadWeights(
                fc1_w=t["head.fc1.weight"],
                fc1_b=t["head.fc1.bias"],
                policy_w=t["head.policy.weight"],
                policy_b=t["head.policy.bias"],
                value_w=t["head.value.weight"],
                value_b=t["head.value.bias"],
            )
        return cls(
            config=config,
            enc_w1=t["encoder.conv1.weight"],
            enc_b1=t["encoder.conv1.bias"],
            enc_w2=t["encoder.conv2.weight"],
            enc_b2=t["encoder.conv2.bias"],
            layers=layers,
            head=head,
        )


def expected_shapes(config: DrcConfig, with_head: bool = True) -> Dict[str, Tuple[int, ...]]:
    C, k, e = config.channels, RECURRENT_KERNEL, ENCODER_KERNEL
    shapes: Dict[str, Tuple[int, ...]] = {
        "encoder.conv1.weight": (e, e, 3, C),
        "encoder.conv1.bias": (C,),
        "encoder.conv2.weight": (e, e, C, C),
        "encoder.conv2.bias": (C,),
    }
    for d in range(config.layers):
        for g in GATES:
            shapes[f"layer{d}.{g}.We"] = (k, k, C + 1, C)
            shapes[f"layer{d}.{g}.Wh1"] = (k, k, C, C)
            shapes[f"layer{d}.{g}.Wh2"] = (k, k, 2 * C, C)
            shapes[f"layer{d}.{g}.bias"] = (C,)
        shapes[f"layer{d}.pool.mean"] = (C,)
        shapes[f"layer{d}.pool.max"] = (C,)
    if with_head:
        flat = config.height * config.width * C
        shapes["head.fc1.weight"] = (flat, config.mlp_hidden)
        shapes["head.fc1.bias"] = (config.mlp_hidden,)
        shapes["head.policy.weight"] = (config.mlp_hidden, config.n_actions)
        shapes["head.policy.bias"] = (config.n_actions,)
        shapes["head.value.weight"] = (config.mlp_hidden, 1)
        shapes["head.value.bias"] = (1,)
    return shapes


def write_weights(weights: WeightSet, sink: BinaryIO) -> None:
    tensors = weights.tensors()
    sink.write(MAGIC)
    sink.write(struct.pack("<BI", FORMAT_VERSION, len(tensors)))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        sink.write(struct.pack("<H", len(encoded)))
        sink.write(encoded)
        sink.write(struct.pack("<B", array.ndim))
        sink.write(struct.pack(f"<{array.ndim}I", *array.shape))
        sink.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def read_tensors(source: BinaryIO) -> Dict[str, np.ndarray]:
    """Read every tensor in a weight stream without interpreting names."""
    if source.read(4) != MAGIC:
        raise BadMagic("Not a DRC weight file (bad magic)")
    header = source.read(5)
    if len(header) < 5:
        raise TruncatedTensor("<header>")
    version, count = struct.unpack("<BI", header)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"Weight file version {version}, expected {FORMAT_VERSION}")

    tensors: Dict[str, np.ndarray] = {}
    for index in range(count):
        raw_len = source.read(2)
        if len(raw_len) < 2:
            raise TruncatedTensor(f"<tensor {index}>")
        (name_len,) = struct.unpack("<H", raw_len)
        raw_name = source.read(name_len)
        if len(raw_name) < name_len:
            raise TruncatedTensor(f"<tensor {index}>")
        name = raw_name.decode("utf-8")
        raw_ndim = source.read(1)
        if len(raw_ndim) < 1:
            raise TruncatedTensor(name)
        (ndim,) = struct.unpack("<B", raw_ndim)
        raw_dims = source.read(4 * ndim)
        if len(raw_dims) < 4 * ndim:
            raise TruncatedTensor(name)
        dims = struct.unpack(f"<{ndim}I", raw_dims)
        n_values = int(np.prod(dims)) if ndim else 1
        raw = source.read(4 * n_values)
        if len(raw) < 4 * n_values:
            raise TruncatedTensor(name)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)
    return tensors


def infer_config(tensors: Dict[str, np.ndarray], base: Optional[DrcConfig] = None) -> DrcConfig:
    """Derive D and C from tensor names and shapes; other fields come from base."""
    base = base or DrcConfig()
    if "encoder.conv1.weight" not in tensors:
        raise MissingTensor("encoder.conv1.weight")
    channels = int(tensors["encoder.conv1.weight"].shape[3])
    layers = 0
    while f"layer{layers}.i.We" in tensors:
        layers += 1
    updates = {"channels": channels, "layers": max(layers, 1)}
    if "head.fc1.weight" in tensors:
        updates["mlp_hidden"] = int(tensors["head.fc1.weight"].shape[1])
        updates["n_actions"] = int(tensors["head.policy.weight"].shape[1])
        squares = int(tensors["head.fc1.weight"].shape[0]) // channels
        side = int(round(squares**0.5))
        if side * side == squares and side * side != base.height * base.width:
            updates["height"] = side
            updates["width"] = side
    return base.model_copy(update=updates)


def save_weights(weights: WeightSet, path: Union[str, Path]) -> None:
    with open(path, "wb") as f:
        write_weights(weights, f)
    logger.info(f"Wrote {len(weights.tensors())} tensors to {path}")


def load_weights(path: Union[str, Path], config: Optional[DrcConfig] = None) -> WeightSet:
    """
    Load a weight file.

    Args:
        path: File written by save_weights
        config: Expected shape; inferred from the tensors when omitted

    Returns:
        WeightSet whose shapes match the config
    """
    with open(path, "rb") as f:
        tensors = read_tensors(f)
    if config is None:
        config = infer_config(tensors)
    return WeightSet.from_tensors(config, tensors)
