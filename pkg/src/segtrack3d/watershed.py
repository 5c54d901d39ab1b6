"""Seeded 3D watershed over a nuclei probability map.

Flooding runs on the probability landscape directly (high probability =
basin interior), with levels quantized for tie bucketing. Pop order is
deterministic: level descending, then insertion order, with seeds queued
in label order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _backend
from .detection import SeedSet
from .errors import EmptySeedError
from .volume import Connectivity, LabelVolume, Volume

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WatershedConfig:
    conn: Connectivity = Connectivity.FACE_6
    level_quantization: int = 256
    mask_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.level_quantization < 2:
            raise ValueError(f"level_quantization must be >= 2, got {self.level_quantization}")
        if not 0.0 <= self.mask_threshold <= 1.0:
            raise ValueError(f"mask_threshold must be in [0, 1], got {self.mask_threshold}")


def quantize_levels(prob: np.ndarray, n_levels: int) -> np.ndarray:
    """Map [0, 1] probabilities to integer levels 0..n_levels-1."""
    return np.minimum((prob * n_levels).astype(np.int32), n_levels - 1)


def watershed(prob: Volume, seeds: SeedSet, cfg: WatershedConfig) -> LabelVolume:
    """Flood the probability map from seeds; returns labels 1..#kept seeds.

    Seeds outside the foreground mask (prob < mask_threshold) are dropped
    with a warning, as are duplicate seed voxels. Foreground components
    containing no seed cannot be claimed without breaking region
    connectivity; their voxels are left as background and reported.
    """
    prob.require_probability()
    if len(seeds) == 0:
        raise EmptySeedError("watershed requires at least one seed")

    data = prob.data
    nz, ny, nx = data.shape
    fg = data >= cfg.mask_threshold

    seen: set[int] = set()
    kept_flat: list[int] = []
    dropped_bg = 0
    for ix, iy, iz in seeds.coords:
        flat = int(iz) * ny * nx + int(iy) * nx + int(ix)
        if not fg.ravel()[flat]:
            dropped_bg += 1
            continue
        if flat in seen:
            log.warning("duplicate seed voxel (%d, %d, %d) dropped", ix, iy, iz)
            continue
        seen.add(flat)
        kept_flat.append(flat)
    if dropped_bg:
        log.warning("%d seed(s) below mask_threshold dropped", dropped_bg)
    if not kept_flat:
        raise EmptySeedError("no seeds remain inside the foreground mask")

    levels = quantize_levels(data, cfg.level_quantization)
    labels = np.zeros(data.shape, dtype=np.int32)
    _backend.watershed_flood(
        levels,
        fg.astype(np.uint8),
        np.asarray(kept_flat, dtype=np.int64),
        cfg.level_quantization,
        cfg.conn.offsets().astype(np.int64),
        labels,
    )

    orphan = int((fg & (labels == 0)).sum())
    if orphan:
        log.warning(
            "%d foreground voxel(s) lie in components with no seed; left as background",
            orphan,
        )
    return LabelVolume(labels, prob.spacing)
