"""
Static outputs: PPM heatmaps, CSV tables and line-delimited trace records.
"""

import csv
import json
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..errors import InterventionAddressError
from ..interp.rollout import DrcEpisode
from ..planner.channels import ChannelMap
from ..planner.runner import Episode

PathLike = Union[str, Path]


def diverging_rgb(values: np.ndarray) -> np.ndarray:
    """
    H×W values to H×W×3 bytes: negative blue, zero white, positive red,
    scaled by the largest magnitude.
    """
    scale = float(np.abs(values).max())
    norm = values / scale if scale > 0 else np.zeros_like(values)
    rgb = np.ones(values.shape + (3,))
    positive = np.clip(norm, 0.0, 1.0)
    negative = np.clip(-norm, 0.0, 1.0)
    rgb[..., 1] -= positive + negative
    rgb[..., 2] -= positive
    rgb[..., 0] -= negative
    return np.rint(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)


def _channel(tensor: np.ndarray, channel: int) -> np.ndarray:
    if tensor.ndim != 3 or not 0 <= channel < tensor.shape[2]:
        raise InterventionAddressError(f"Channel {channel} out of range for tensor of shape {tensor.shape}")
    return tensor[:, :, channel]


def write_ppm(path: PathLike, rgb: np.ndarray) -> None:
    """Binary P6 image, one pixel per square."""
    height, width = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_ppm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError(f"{path} is not a binary PPM")
    width, height = int(parts[1]), int(parts[2])
    pixels = data[len(data) - width * height * 3 :]
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)


def write_channel_csv(path: PathLike, values: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "col", "value"])
        for (r, c), value in np.ndenumerate(values):
            writer.writerow([r, c, repr(float(value))])


def read_channel_csv(path: PathLike, height: int, width: int) -> np.ndarray:
    values = np.zeros((height, width))
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            values[int(row["row"]), int(row["col"])] = float(row["value"])
    return values


def dump_heatmap(tensor: np.ndarray, channel: int, stem: PathLike) -> Tuple[Path, Path]:
    """
    Write ``stem``.ppm and ``stem``.csv for one channel of an H×W×C tensor.

    Raises:
        InterventionAddressError: Channel out of range
    """
    values = _channel(tensor, channel)
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    image, table = stem.parent / f"{stem.name}.ppm", stem.parent / f"{stem.name}.csv"
    write_ppm(image, diverging_rgb(values))
    write_channel_csv(table, values)
    return image, table


def write_rows(
    path: Optional[PathLike],
    rows: Sequence[Mapping],
    sink=None,
    fieldnames: Optional[Sequence[str]] = None,
) -> None:
    """CSV to ``path`` or to ``sink``; the header is ``fieldnames`` or the first row's keys."""
    if not rows and fieldnames is None:
        logger.warning("No rows to write")
        return
    fieldnames = list(fieldnames or rows[0].keys())
    if path is None:
        writer = csv.DictWriter(sink, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_jsonl(path: PathLike, records: Iterable[Mapping]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    return count


def export_episode(
    episode: Episode,
    out_dir: PathLike,
    channel_map: ChannelMap,
    groups: Sequence[str] = ("box_short",),
    heatmaps: bool = True,
) -> Dict[str, List[Path]]:
    """
    Write an engine episode: activations.csv (step, role, row, col, value for
    nonzero values), trace.jsonl, and one heatmap per recorded grid and
    channel of ``groups``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    roles = channel_map.role_names()
    channels = [c for group in groups for c in channel_map.group(group)]
    written: Dict[str, List[Path]] = {"csv": [], "trace": [], "heatmaps": []}

    rows = []
    for index, grid in enumerate(episode.grids):
        for channel in channels:
            for (r, c), value in np.ndenumerate(grid.acts[:, :, channel]):
                if value != 0.0:
                    rows.append(
                        {"grid": index, "role": roles[channel], "row": r, "col": c, "value": repr(float(value))}
                    )
        if heatmaps:
            for channel in channels:
                name = roles[channel].replace(".", "_")
                image, _ = dump_heatmap(grid.acts, channel, out / "heatmaps" / f"grid{index:04d}_{name}")
                written["heatmaps"].append(image)
    activations = out / "activations.csv"
    write_rows(activations, rows, fieldnames=("grid", "role", "row", "col", "value"))
    written["csv"].append(activations)

    trace = out / "trace.jsonl"
    n_events = write_jsonl(trace, (event.to_dict() for event in episode.events))
    written["trace"].append(trace)
    logger.info(f"Exported {len(episode.grids)} grids and {n_events} events to {out}")
    return written


def export_drc_episode(
    drc_episode: DrcEpisode,
    out_dir: PathLike,
    channels: Sequence[int],
    layer: int = -1,
    tensor: str = "h",
    heatmaps: bool = True,
) -> Dict[str, List[Path]]:
    """
    Write a DRC episode: one heatmap per step and channel of ``layer``'s
    ``tensor`` after the step, and trace.jsonl with one record per step.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, List[Path]] = {"trace": [], "heatmaps": []}
    if heatmaps:
        for index, record in enumerate(drc_episode.steps):
            values = getattr(record.states[layer], tensor)
            for channel in channels:
                image, _ = dump_heatmap(values, channel, out / "heatmaps" / f"step{index:04d}_{tensor}{channel:02d}")
                written["heatmaps"].append(image)

    trace = out / "trace.jsonl"
    records = (
        {
            "step": index,
            "action": record.readout.action.name,
            "acted": record.acted,
            "no_plan": record.readout.no_plan,
        }
        for index, record in enumerate(drc_episode.steps)
    )
    write_jsonl(trace, records)
    written["trace"].append(trace)
    logger.info(f"Exported {len(drc_episode.steps)} steps to {out}")
    return written
