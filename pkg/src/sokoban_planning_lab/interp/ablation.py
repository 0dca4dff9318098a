"""
Ablations measured as solve-rate changes over a level set.

- mean_activation: replace a tensor with its per-channel mean at given ticks
- zero_kernel: zero (layer, gate, kernel, in, out) slices before the rollout
- cache_1step: overwrite channels with a one-step rerun on the previous observation
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..config import MechanismGains
from ..drc.network import GATE_NAMES, Replacements
from ..drc.weights import WeightSet
from ..errors import AblationSourceError, EmptyDatasetError, InterventionAddressError
from ..planner.channels import ChannelMap
from ..planner.compile import compiled_layout
from ..sokoban.level import Level
from ..specs import AblationMode, AblationSpec, KernelSlice
from .rollout import DrcPolicy, run_drc

ABLATION_TENSORS = ("c",) + GATE_NAMES + ("h",)


@dataclass
class AblationResult:
    mode: AblationMode
    n_levels: int
    baseline_solved: int
    ablated_solved: int
    mean_source: Optional[str] = None

    @property
    def baseline_rate(self) -> float:
        return self.baseline_solved / self.n_levels

    @property
    def ablated_rate(self) -> float:
        return self.ablated_solved / self.n_levels

    @property
    def delta(self) -> float:
        """Solve-rate drop caused by the ablation (negative when it helped)."""
        return self.baseline_rate - self.ablated_rate

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "n_levels": self.n_levels,
            "baseline_rate": self.baseline_rate,
            "ablated_rate": self.ablated_rate,
            "delta": self.delta,
            "mean_source": self.mean_source,
        }


def zero_kernel_slices(weights: WeightSet, slices: Sequence[KernelSlice]) -> WeightSet:
    """Copy of ``weights`` with every listed kernel slice set to zero."""
    out = weights.copy()
    for s in slices:
        if not 0 <= s.layer < len(out.layers):
            raise InterventionAddressError(f"Layer {s.layer} out of range 0..{len(out.layers) - 1}")
        kernel = getattr(out.layers[s.layer].gates[s.gate], s.kernel)
        if not (0 <= s.in_channel < kernel.shape[2] and 0 <= s.out_channel < kernel.shape[3]):
            raise InterventionAddressError(
                f"Slice {s.in_channel}->{s.out_channel} outside {s.kernel} of shape {kernel.shape}"
            )
        kernel[:, :, s.in_channel, s.out_channel] = 0.0
    return out


def wta_slices(channel_map: ChannelMap, layer: int = 0) -> Tuple[KernelSlice, ...]:
    """Comparator -> box_short slices of the j gate, where compiled weights inhibit beaten directions."""
    layout = compiled_layout(channel_map)
    box_short = channel_map.box_short
    return tuple(
        KernelSlice(layer, "j", "Wh2", channel, box_short[target])
        for (_, target), channel in layout.comparators
    )


def collect_means(
    policy: DrcPolicy,
    levels: Sequence[Level],
    max_steps: int = 120,
    thinking_steps: int = 0,
) -> Dict[str, np.ndarray]:
    """
    Per-channel means of every recorded tensor, keyed "tensor.layer", over
    every square, tick and step of the episodes on ``levels``.
    """
    if not levels:
        raise EmptyDatasetError("Mean source needs at least one level")
    sums: Dict[str, np.ndarray] = {}
    counts: Dict[str, int] = {}
    for level in levels:
        episode = run_drc(policy, level, max_steps=max_steps, thinking_steps=thinking_steps)
        for step_record in episode.steps:
            result = policy.forward(step_record.context, step_record.level, record=True)
            for rec in result.records:
                tensors = dict(rec.gates, c=rec.c, h=rec.h)
                for name, tensor in tensors.items():
                    key = f"{name}.{rec.layer}"
                    sums[key] = sums.get(key, 0.0) + tensor.sum(axis=(0, 1))
                    counts[key] = counts.get(key, 0) + tensor.shape[0] * tensor.shape[1]
    if not counts:
        raise EmptyDatasetError("Mean source episodes recorded no steps")
    return {key: sums[key] / counts[key] for key in sums}


def mean_replacements(
    means: Dict[str, np.ndarray],
    tensor: str,
    layers: Sequence[int],
    ticks: Sequence[int],
    height: int,
    width: int,
    channels: Sequence[int] = (),
    source: Optional[str] = "means",
) -> Replacements:
    """Replacement table that swaps ``tensor`` for its mean at each (layer, tick)."""
    out = {}
    for layer in layers:
        key = f"{tensor}.{layer}"
        if key not in means:
            raise AblationSourceError(f"Mean source '{source}' has no tensor '{key}'")
        full = np.broadcast_to(means[key], (height, width, means[key].shape[0])).copy()
        value = full[:, :, list(channels)] if channels else full
        for tick in ticks:
            out[(tensor, layer, tick)] = (tuple(channels), value)
    return out


def _solve_count(
    policy: DrcPolicy,
    levels: Sequence[Level],
    max_steps: int,
    thinking_steps: int,
    replacements_for=None,
    cache: Optional[AblationSpec] = None,
) -> int:
    solved = 0
    for level in levels:
        replacements = replacements_for(level) if replacements_for is not None else None
        episode = run_drc(
            policy,
            level,
            max_steps=max_steps,
            thinking_steps=thinking_steps,
            replacements=replacements,
            cache=cache,
            record_states=False,
        )
        solved += int(episode.solved)
    return solved


def apply_ablation(
    weights: WeightSet,
    spec: AblationSpec,
    levels: Sequence[Level],
    gains: Optional[MechanismGains] = None,
    channel_map: Optional[ChannelMap] = None,
    max_steps: int = 120,
    thinking_steps: int = 0,
    baseline: Optional[int] = None,
) -> AblationResult:
    """
    Solve the levels with and without the ablation.

    Args:
        weights: Weights to ablate; never modified
        spec: What to ablate; mean_activation reads spec.means
        levels: Level set
        gains: Gains for the plan readout of headless weights
        channel_map: Channel layout of headless weights
        max_steps: Step limit per level
        thinking_steps: Steps on the first observation before acting
        baseline: Solved count of the unablated weights, when already known

    Returns:
        AblationResult with both solve rates

    Raises:
        AblationSourceError: mean_activation without a usable mean
    """
    if not levels:
        raise EmptyDatasetError("Ablation needs at least one level")
    policy = DrcPolicy(weights, gains=gains, channel_map=channel_map)
    if baseline is None:
        baseline = _solve_count(policy, levels, max_steps, thinking_steps)

    if spec.mode is AblationMode.MEAN_ACTIVATION:
        spec.require_mean(f"{spec.tensor}.{spec.layer}")

        def replacements_for(level: Level) -> Replacements:
            return mean_replacements(
                spec.means,
                spec.tensor,
                [spec.layer],
                spec.ticks,
                level.height,
                level.width,
                channels=spec.channels,
                source=spec.mean_source,
            )

        ablated = _solve_count(policy, levels, max_steps, thinking_steps, replacements_for=replacements_for)
    elif spec.mode is AblationMode.ZERO_KERNEL:
        zeroed = DrcPolicy(zero_kernel_slices(weights, spec.slices), gains=gains, channel_map=channel_map)
        ablated = _solve_count(zeroed, levels, max_steps, thinking_steps)
    else:
        ablated = _solve_count(policy, levels, max_steps, thinking_steps, cache=spec)

    result = AblationResult(
        mode=spec.mode,
        n_levels=len(levels),
        baseline_solved=baseline,
        ablated_solved=ablated,
        mean_source=spec.mean_source,
    )
    logger.info(
        f"Ablation {spec.mode.value}: solve rate {result.baseline_rate:.3f} -> {result.ablated_rate:.3f}"
    )
    return result


def gate_importance(
    weights: WeightSet,
    levels: Sequence[Level],
    means: Dict[str, np.ndarray],
    gains: Optional[MechanismGains] = None,
    channel_map: Optional[ChannelMap] = None,
    max_steps: int = 120,
    thinking_steps: int = 0,
    tensors: Sequence[str] = ABLATION_TENSORS,
) -> Dict[str, AblationResult]:
    """Mean-ablate each tensor on every layer at the first tick of every step."""
    policy = DrcPolicy(weights, gains=gains, channel_map=channel_map)
    baseline = _solve_count(policy, levels, max_steps, thinking_steps)
    layers = list(range(len(weights.layers)))
    results: Dict[str, AblationResult] = {}
    for tensor in tensors:

        def replacements_for(level: Level, tensor: str = tensor) -> Replacements:
            return mean_replacements(means, tensor, layers, (0,), level.height, level.width)

        ablated = _solve_count(policy, levels, max_steps, thinking_steps, replacements_for=replacements_for)
        results[tensor] = AblationResult(
            mode=AblationMode.MEAN_ACTIVATION,
            n_levels=len(levels),
            baseline_solved=baseline,
            ablated_solved=ablated,
            mean_source="gate_importance",
        )
        logger.info(f"Gate {tensor}: solve-rate drop {results[tensor].delta:.3f}")
    return results


def compare_cache_groups(
    weights: WeightSet,
    levels: Sequence[Level],
    groups: Dict[str, List[int]],
    gains: Optional[MechanismGains] = None,
    channel_map: Optional[ChannelMap] = None,
    max_steps: int = 120,
    tensor: str = "c",
) -> Dict[str, AblationResult]:
    """cache_1step ablation for each named channel group, sharing one baseline."""
    policy = DrcPolicy(weights, gains=gains, channel_map=channel_map)
    baseline = _solve_count(policy, levels, max_steps, 0)
    return {
        name: apply_ablation(
            weights,
            AblationSpec(mode=AblationMode.CACHE_1STEP, tensor=tensor, channels=tuple(channels)),
            levels,
            gains=gains,
            channel_map=channel_map,
            max_steps=max_steps,
            baseline=baseline,
        )
        for name, channels in groups.items()
    }
