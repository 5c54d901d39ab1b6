"""Cell Tracking Challenge directory I/O.

Layout conventions: one multi-page grayscale TIFF per frame (z = page
index, x fastest in memory), frame indices contiguous from 0, and a
four-column lineage text file. Labels are written as 16-bit unsigned and
preserved verbatim on read.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tifffile

from .errors import LayoutError
from .lineage import LineageTable, TrackRow
from .volume import LabelVolume, Spacing, Volume

INPUT_PATTERN = "t%03d.tif"
RESULT_PATTERN = "mask%03d.tif"
TRUTH_PATTERN = "man_track%03d.tif"
RESULT_LINEAGE = "res_track.txt"
TRUTH_LINEAGE = "man_track.txt"

_INT_SCALE = {np.uint8: 255.0, np.uint16: 65535.0, np.uint32: 4294967295.0}


@dataclass(frozen=True)
class SequenceLayout:
    root: Path
    frame_pattern: str = INPUT_PATTERN
    lineage_name: str = RESULT_LINEAGE

    def frame_path(self, index: int) -> Path:
        return self.root / (self.frame_pattern % index)

    def lineage_path(self) -> Path:
        return self.root / self.lineage_name

    def frame_indices(self) -> list[int]:
        """Indices present on disk; raises if they are not 0..n-1."""
        escaped = re.escape(self.frame_pattern).replace(r"\%", "%")
        regex = re.compile(
            "^" + re.sub(r"%0(\d+)d", lambda m: rf"(\d{{{m.group(1)},}})", escaped) + "$"
        )
        found = {}
        root = Path(self.root)
        if not root.is_dir():
            raise LayoutError(f"sequence directory {root} does not exist")
        for p in root.iterdir():
            m = regex.match(p.name)
            if m:
                found[int(m.group(1))] = p
        if not found:
            raise LayoutError(f"no frames matching {self.frame_pattern!r} in {root}")
        indices = sorted(found)
        expected = list(range(len(indices)))
        if indices != expected:
            missing = sorted(set(range(indices[-1] + 1)) - set(indices))
            raise LayoutError(
                f"frame indices must be contiguous from 0; missing {missing} in {root}"
            )
        return indices


def detect_layout(root: Path) -> SequenceLayout:
    """Pick the frame pattern (result, truth, or input) present in a directory."""
    root = Path(root)
    for pattern, lineage in (
        (RESULT_PATTERN, RESULT_LINEAGE),
        (TRUTH_PATTERN, TRUTH_LINEAGE),
        (INPUT_PATTERN, RESULT_LINEAGE),
    ):
        if (root / (pattern % 0)).exists():
            return SequenceLayout(root, pattern, lineage)
    raise LayoutError(f"no recognized frame files in {root}")


def _read_stack(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise LayoutError(f"file not found: {path}")
    try:
        arr = np.asarray(tifffile.imread(path))
    except (OSError, ValueError, tifffile.TiffFileError) as exc:
        raise LayoutError(f"cannot read TIFF {path}: {exc}") from exc
    if arr.dtype == object:
        raise LayoutError(f"inconsistent page sizes in {path}")
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise LayoutError(f"{path}: expected a grayscale stack, got shape {arr.shape}")
    return arr


def read_volume(path, spacing: Spacing) -> Volume:
    """Scalar stack; integer samples are rescaled to [0, 1] by bit depth."""
    arr = _read_stack(path)
    for dtype, scale in _INT_SCALE.items():
        if arr.dtype == dtype:
            return Volume(arr.astype(np.float64) / scale, spacing)
    if np.issubdtype(arr.dtype, np.floating):
        return Volume(arr.astype(np.float64), spacing)
    raise LayoutError(f"{path}: unsupported sample type {arr.dtype}")


def read_label_volume(path, spacing: Spacing) -> LabelVolume:
    """Label stack; integer labels are preserved verbatim."""
    arr = _read_stack(path)
    if not np.issubdtype(arr.dtype, np.integer):
        raise LayoutError(f"{path}: label stack must be integer, got {arr.dtype}")
    return LabelVolume(arr.astype(np.int32), spacing)


def write_volume(path, volume: Volume) -> None:
    """Write a [0, 1] scalar volume as 16-bit grayscale pages."""
    volume.require_probability()
    arr = np.round(volume.data * 65535.0).astype(np.uint16)
    tifffile.imwrite(path, arr, photometric="minisblack")


def write_label_volume(path, labels: LabelVolume) -> None:
    max_label = int(labels.data.max()) if labels.data.size else 0
    if max_label > 65535:
        raise LayoutError(f"label {max_label} exceeds 16-bit range")
    tifffile.imwrite(path, labels.data.astype(np.uint16), photometric="minisblack")


def read_sequence(layout: SequenceLayout, spacing: Spacing) -> list[Volume]:
    paths = [layout.frame_path(i) for i in layout.frame_indices()]
    frames = [read_volume(p, spacing) for p in paths]
    _check_dims(frames, paths)
    return frames


def read_label_sequence(layout: SequenceLayout, spacing: Spacing) -> list[LabelVolume]:
    paths = [layout.frame_path(i) for i in layout.frame_indices()]
    frames = [read_label_volume(p, spacing) for p in paths]
    _check_dims(frames, paths)
    return frames


def _check_dims(frames, paths) -> None:
    dims = frames[0].dims
    for frame, path in zip(frames, paths):
        if frame.dims != dims:
            raise LayoutError(f"{path}: dims {frame.dims} differ from first frame {dims}")


def write_lineage(table: LineageTable, path) -> None:
    """One line per track: "id begin end parent", ascending id."""
    lines = [f"{r.id} {r.begin} {r.end} {r.parent}" for r in table.tracks]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_lineage(path) -> LineageTable:
    path = Path(path)
    if not path.exists():
        raise LayoutError(f"lineage file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise LayoutError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        try:
            rows.append(TrackRow(*(int(p) for p in parts)))
        except ValueError as exc:
            raise LayoutError(f"{path}:{lineno}: {exc}") from exc
    return LineageTable(tuple(rows))
