"""
Declarative activation edits (interventions) and weight/activation ablations.

Both are plain dataclasses that can be read from the same ``key=value``
format as the config file, so they double as CLI flags.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .config import parse_key_values
from .errors import AblationSourceError, ConfigError, InterventionAddressError

Pos = Tuple[int, int]

INTERVENTION_TARGETS = ("h", "c", "i", "j", "f", "o", "plan")
GATES = ("i", "j", "f", "o")
KERNELS = ("We", "Wh1", "Wh2")


class InterventionMode(Enum):
    AFFINE = "affine"  # x' = alpha * x + c
    ABS = "abs"  # x' = |x|


@dataclass(frozen=True)
class InterventionSpec:
    """
    Edit ``x' = alpha * x + c`` applied at (layer, channel, square, tick) points.

    Empty channel/square/tick tuples mean "all". ``c_map`` gives per-square
    constants that replace ``c`` at the listed squares.
    """

    target: str = "h"
    layer: Optional[int] = None
    channels: Tuple[int, ...] = ()
    squares: Tuple[Pos, ...] = ()
    ticks: Tuple[int, ...] = ()
    alpha: float = 1.0
    c: float = 0.0
    c_map: Tuple[Tuple[Pos, float], ...] = ()
    mode: InterventionMode = InterventionMode.AFFINE

    def __post_init__(self):
        if self.target not in INTERVENTION_TARGETS:
            raise InterventionAddressError(
                f"Unknown intervention target '{self.target}'. Expected one of: {', '.join(INTERVENTION_TARGETS)}"
            )

    @property
    def is_identity(self) -> bool:
        return (
            self.mode is InterventionMode.AFFINE
            and self.alpha == 1.0
            and self.c == 0.0
            and all(value == 0.0 for _, value in self.c_map)
        )

    def applies(self, target: str, layer: int, tick: int) -> bool:
        if target != self.target:
            return False
        if self.layer is not None and layer != self.layer:
            return False
        return not self.ticks or tick in self.ticks

    def validate(self, height: int, width: int, channels: int, layers: int = 1) -> None:
        """Raise InterventionAddressError for addresses outside the tensor."""
        if self.layer is not None and not 0 <= self.layer < layers:
            raise InterventionAddressError(f"Layer {self.layer} out of range 0..{layers - 1}")
        for channel in self.channels:
            if not 0 <= channel < channels:
                raise InterventionAddressError(f"Channel {channel} out of range 0..{channels - 1}")
        for r, col in list(self.squares) + [square for square, _ in self.c_map]:
            if not (0 <= r < height and 0 <= col < width):
                raise InterventionAddressError(f"Square ({r}, {col}) outside {height}x{width} grid")

    def apply(self, tensor: np.ndarray) -> np.ndarray:
        """Return an edited copy of an H×W×C tensor."""
        if self.is_identity:
            return tensor
        height, width, n_channels = tensor.shape
        self.validate(height, width, n_channels, layers=max(self.layer or 0, 0) + 1)
        out = tensor.copy()
        channels = list(self.channels) if self.channels else list(range(n_channels))
        mask = np.zeros((height, width), dtype=bool)
        if self.squares:
            for r, col in self.squares:
                mask[r, col] = True
        elif not self.c_map:
            mask[:, :] = True
        for (r, col), _ in self.c_map:
            mask[r, col] = True

        region = out[:, :, channels]
        if self.mode is InterventionMode.ABS:
            edited = np.abs(region)
        else:
            const = np.full((height, width), self.c)
            for (r, col), value in self.c_map:
                const[r, col] = value
            edited = self.alpha * region + const[:, :, None]
        region[mask] = edited[mask]
        out[:, :, channels] = region
        return out

    @classmethod
    def from_key_values(cls, source: Union[str, Mapping[str, str]]) -> "InterventionSpec":
        pairs = parse_key_values(source, source="<intervention>") if isinstance(source, str) else dict(source)
        known = {"target", "layer", "channels", "squares", "ticks", "alpha", "c", "c_map", "mode"}
        unknown = set(pairs) - known
        if unknown:
            raise ConfigError(f"Unknown intervention keys: {', '.join(sorted(unknown))}")
        try:
            return cls(
                target=pairs.get("target", "h"),
                layer=int(pairs["layer"]) if pairs.get("layer") not in (None, "", "all") else None,
                channels=_parse_ints(pairs.get("channels", "")),
                squares=_parse_squares(pairs.get("squares", "")),
                ticks=_parse_ints(pairs.get("ticks", "")),
                alpha=float(pairs.get("alpha", 1.0)),
                c=float(pairs.get("c", 0.0)),
                c_map=_parse_square_values(pairs.get("c_map", "")),
                mode=InterventionMode(pairs.get("mode", "affine")),
            )
        except ValueError as exc:
            if isinstance(exc, InterventionAddressError):
                raise
            raise ConfigError(f"Bad intervention spec: {exc}") from exc


class AblationMode(Enum):
    MEAN_ACTIVATION = "mean_activation"
    ZERO_KERNEL = "zero_kernel"
    CACHE_1STEP = "cache_1step"


@dataclass(frozen=True)
class KernelSlice:
    """One (layer, gate, kernel, in-channel, out-channel) slice of a gate kernel."""

    layer: int
    gate: str
    kernel: str
    in_channel: int
    out_channel: int

    def __post_init__(self):
        if self.gate not in GATES:
            raise InterventionAddressError(f"Unknown gate '{self.gate}'")
        if self.kernel not in KERNELS:
            raise InterventionAddressError(f"Unknown kernel '{self.kernel}'")

    @classmethod
    def parse(cls, text: str) -> "KernelSlice":
        parts = text.strip().split(".")
        if len(parts) != 5:
            raise ConfigError(f"Kernel slice '{text}' must look like layer.gate.kernel.in.out")
        return cls(int(parts[0]), parts[1], parts[2], int(parts[3]), int(parts[4]))


@dataclass
class AblationSpec:
    """
    What to ablate and how.

    mean_activation replaces ``tensor`` (c, f, h, ...) of ``layer`` at the
    listed ticks with a mean taken over ``mean_source`` episodes.
    zero_kernel zeroes ``slices`` before the rollout. cache_1step overwrites
    ``channels`` with the state of a one-step rerun on the previous observation.
    """

    mode: AblationMode
    tensor: str = "c"
    layer: int = 0
    channels: Tuple[int, ...] = ()
    ticks: Tuple[int, ...] = (0,)
    slices: Tuple[KernelSlice, ...] = ()
    mean_source: Optional[str] = None
    means: Dict[str, np.ndarray] = field(default_factory=dict, compare=False)

    def require_mean(self, key: str) -> np.ndarray:
        if self.mean_source is None:
            raise AblationSourceError("mean_activation ablation needs a mean_source")
        if key not in self.means:
            raise AblationSourceError(f"Mean source '{self.mean_source}' has no tensor '{key}'")
        return self.means[key]

    @classmethod
    def from_key_values(cls, source: Union[str, Mapping[str, str]]) -> "AblationSpec":
        pairs = parse_key_values(source, source="<ablation>") if isinstance(source, str) else dict(source)
        known = {"mode", "tensor", "layer", "channels", "ticks", "slices", "mean_source"}
        unknown = set(pairs) - known
        if unknown:
            raise ConfigError(f"Unknown ablation keys: {', '.join(sorted(unknown))}")
        if "mode" not in pairs:
            raise ConfigError("Ablation spec needs a mode")
        try:
            slices = tuple(KernelSlice.parse(item) for item in pairs.get("slices", "").split(",") if item.strip())
            return cls(
                mode=AblationMode(pairs["mode"]),
                tensor=pairs.get("tensor", "c"),
                layer=int(pairs.get("layer", 0)),
                channels=_parse_ints(pairs.get("channels", "")),
                ticks=_parse_ints(pairs.get("ticks", "0")),
                slices=slices,
                mean_source=pairs.get("mean_source"),
            )
        except ValueError as exc:
            if isinstance(exc, (ConfigError, InterventionAddressError)):
                raise
            raise ConfigError(f"Bad ablation spec: {exc}") from exc


def _parse_ints(text: str) -> Tuple[int, ...]:
    return tuple(int(item) for item in text.split(",") if item.strip())


def _parse_squares(text: str) -> Tuple[Pos, ...]:
    """Squares as ``r:c;r:c``."""
    squares: List[Pos] = []
    for item in text.split(";"):
        if item.strip():
            r, c = item.split(":")
            squares.append((int(r), int(c)))
    return tuple(squares)


def _parse_square_values(text: str) -> Tuple[Tuple[Pos, float], ...]:
    """Per-square constants as ``r:c:value;r:c:value``."""
    values = []
    for item in text.split(";"):
        if item.strip():
            r, c, value = item.split(":")
            values.append(((int(r), int(c)), float(value)))
    return tuple(values)
