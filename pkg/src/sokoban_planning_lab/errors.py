"""
Exception hierarchy shared by every module.

Input problems subclass ValueError as well as LabError so callers that only
know about ValueError keep working.
"""

from typing import Optional, Sequence, Tuple


class LabError(Exception):
    """Root of all errors raised by the lab."""


class ConfigError(LabError, ValueError):
    """Bad configuration key or value."""


# Levels


class LevelParseError(LabError, ValueError):
    """A level block could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        location = ""
        if path is not None:
            location += f"{path}"
        if line is not None:
            location += f":{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class MultipleAgents(LevelParseError):
    pass


class NoAgent(LevelParseError):
    pass


class NoBoxes(LevelParseError):
    pass


class BoxTargetMismatch(LevelParseError):
    pass


class RaggedLevel(LevelParseError):
    pass


class UnknownCharacter(LevelParseError):
    pass


class ActionReplayError(LabError, ValueError):
    """An action sequence could not be replayed on a level."""


class GeneratorRangeError(LabError, ValueError):
    """Case-level size outside the documented range."""


# Tensors and weights


class ShapeMismatch(LabError, ValueError):
    """Tensor shapes do not line up."""


class WeightFormatError(LabError, ValueError):
    """Weight file is malformed."""


class BadMagic(WeightFormatError):
    pass


class VersionMismatch(WeightFormatError):
    pass


class TruncatedTensor(WeightFormatError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Truncated data for tensor '{name}'")


class UnknownTensor(WeightFormatError):
    def __init__(self, name: str, expected: Sequence[str]):
        self.name = name
        self.expected = list(expected)
        super().__init__(f"Unknown tensor '{name}'; expected one of: {', '.join(self.expected)}")


class MissingTensor(WeightFormatError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Missing tensor '{name}'")


class TensorShapeError(WeightFormatError):
    def __init__(self, name: str, expected: Tuple[int, ...], found: Tuple[int, ...]):
        self.name = name
        self.expected = tuple(expected)
        self.found = tuple(found)
        super().__init__(f"Tensor '{name}' has shape {self.found}, expected {self.expected}")


# Planner


class ChannelMapError(LabError, ValueError):
    """Channel budget too small or indices collide."""


class InconsistentTransition(LabError, ValueError):
    """The level pair is not a legal transition for the action."""


class CompilationError(LabError, ValueError):
    """Gains cannot be compiled into faithful weights."""


# Analysis


class InterventionAddressError(LabError, ValueError):
    """Intervention or ablation addresses a channel, square, tick or layer that does not exist."""


class AblationSourceError(LabError, ValueError):
    """Mean-ablation requested without a usable mean source."""


class DegenerateDataError(LabError, ValueError):
    """Data cannot support the requested analysis."""


class EmptyDatasetError(LabError, ValueError):
    """Nothing to analyse."""


class SolverMismatch(LabError, ValueError):
    """Solver kind and supplied weights do not fit together."""
