"""
Role -> channel assignment for the planner grid.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

from ..errors import ChannelMapError
from ..sokoban.level import ACTIONS, Action

DIRECTION_GROUPS = ("box_short", "box_long", "agent_short", "gna", "pna")
ENTITY_ROLES = ("wall", "target", "box", "agent")
MIN_CHANNELS = len(DIRECTION_GROUPS) * 4 + len(ENTITY_ROLES)


@dataclass(frozen=True)
class ChannelMap:
    """
    Fixed channel layout.

    Direction groups occupy four consecutive channels each in Up, Down,
    Left, Right order: box_short 0-3, box_long 4-7, agent_short 8-11,
    gna 12-15, pna 16-19. Entities follow: wall 20, target 21, box 22,
    agent 23. Channels from 24 up are spare.
    """

    channels: int
    groups: Tuple[Tuple[str, Tuple[int, int, int, int]], ...]
    entities: Tuple[Tuple[str, int], ...]

    def group(self, name: str) -> Tuple[int, int, int, int]:
        for group_name, indices in self.groups:
            if group_name == name:
                return indices
        raise ChannelMapError(f"Unknown channel group '{name}'")

    def index(self, group: str, action: Action) -> int:
        return self.group(group)[action.value]

    def entity(self, name: str) -> int:
        for entity_name, index in self.entities:
            if entity_name == name:
                return index
        raise ChannelMapError(f"Unknown entity channel '{name}'")

    @property
    def box_short(self) -> Tuple[int, int, int, int]:
        return self.group("box_short")

    @property
    def box_long(self) -> Tuple[int, int, int, int]:
        return self.group("box_long")

    @property
    def agent_short(self) -> Tuple[int, int, int, int]:
        return self.group("agent_short")

    @property
    def gna(self) -> Tuple[int, int, int, int]:
        return self.group("gna")

    @property
    def pna(self) -> Tuple[int, int, int, int]:
        return self.group("pna")

    @property
    def assigned(self) -> int:
        return MIN_CHANNELS

    @property
    def spare(self) -> List[int]:
        return list(range(MIN_CHANNELS, self.channels))

    def role_names(self) -> Dict[int, str]:
        """Channel index -> role name such as 'box_short.up' or 'wall'."""
        names: Dict[int, str] = {}
        for group_name, indices in self.groups:
            for action, index in zip(ACTIONS, indices):
                names[index] = f"{group_name}.{action.name.lower()}"
        for entity_name, index in self.entities:
            names[index] = entity_name
        for index in self.spare:
            names[index] = f"spare{index}"
        return names

    def resolve(self, role: str) -> int:
        """Channel index for a role name, the inverse of role_names."""
        for index, name in self.role_names().items():
            if name == role:
                return index
        raise ChannelMapError(f"Unknown channel role '{role}'")


def default_channel_map(channels: int = 32) -> ChannelMap:
    """
    Deterministic layout for a grid with the given channel budget.

    Args:
        channels: Total channel count C, at least 24

    Returns:
        ChannelMap with 24 assigned channels and C - 24 spare
    """
    if channels < MIN_CHANNELS:
        raise ChannelMapError(f"Need at least {MIN_CHANNELS} channels, got {channels}")
    groups = tuple(
        (name, (4 * g, 4 * g + 1, 4 * g + 2, 4 * g + 3)) for g, name in enumerate(DIRECTION_GROUPS)
    )
    base = 4 * len(DIRECTION_GROUPS)
    entities = tuple((name, base + k) for k, name in enumerate(ENTITY_ROLES))
    return ChannelMap(channels=channels, groups=groups, entities=entities)  # type: ignore[arg-type]
