"""Nuclei probability maps and seed points.

The pipeline accepts a probability map from either an external file (the
usual case when a trained detector produced one) or the classical
multiscale blob detector below. Seed extraction then picks suppressed
local maxima to feed the watershed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import Volume

log = logging.getLogger(__name__)

# Peak LoG response for a solid ball of radius r sits near sigma = r/sqrt(3).
_LOG_RADIUS_TO_SIGMA = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class SeedSet:
    """Seed voxels with scores, sorted by descending score.

    coords: int array (n, 3) of (ix, iy, iz); scores: float array (n,).
    """

    coords: np.ndarray
    scores: np.ndarray

    def __post_init__(self) -> None:
        coords = np.atleast_2d(np.asarray(self.coords, dtype=np.int64))
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        if coords.size == 0:
            coords = coords.reshape(0, 3)
        if coords.shape[0] != scores.shape[0] or coords.shape[1] != 3:
            raise ValueError("coords must be (n, 3) with one score per seed")
        if scores.size and np.any(np.diff(scores) > 0):
            raise ValueError("scores must be sorted descending")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return int(self.scores.shape[0])


def load_probability_map(path, spacing) -> Volume:
    """Read a multi-page grayscale TIFF stack as a probability map in [0, 1].

    Integer stacks are rescaled by their bit depth; float stacks must
    already be in [0, 1].
    """
    from .ctc import read_volume

    return read_volume(path, spacing).require_probability()


def blob_probability_map(intensity: Volume, scales) -> Volume:
    """Multiscale LoG blob response, rectified and normalized to [0, 1].

    `scales` are expected nucleus radii in physical units; the per-axis
    Gaussian sigma divides out the voxel spacing, so the response is
    anisotropy-aware. A constant input yields an all-zero map (logged).
    """
    scales = [float(s) for s in scales]
    if not scales or any(s <= 0 for s in scales):
        raise ValueError(f"scales must be non-empty and positive, got {scales!r}")
    data = intensity.data
    if float(data.max()) == float(data.min()):
        # the truncated kernel leaves a uniform residue on flat input, which
        # normalization would blow up to 1.0 everywhere
        log.warning("constant input volume, blob response is all zero")
        return Volume(np.zeros_like(data), intensity.spacing)
    sx, sy, sz = intensity.spacing
    response = np.zeros_like(data)
    for radius in scales:
        sigma_phys = radius * _LOG_RADIUS_TO_SIGMA
        sigma_vox = (sigma_phys / sz, sigma_phys / sy, sigma_phys / sx)
        # Negated, scale-normalized LoG: bright blobs give positive peaks.
        r = -(sigma_phys**2) * ndimage.gaussian_laplace(data, sigma=sigma_vox)
        np.maximum(response, r, out=response)
    peak = float(response.max())
    if peak <= 0.0:
        log.warning("blob response is non-positive everywhere")
        return Volume(np.zeros_like(data), intensity.spacing)
    np.clip(response, 0.0, None, out=response)
    response /= peak
    return Volume(response, intensity.spacing)


def _local_maxima(data: np.ndarray, min_score: float) -> np.ndarray:
    """Flat indices of 26-neighborhood maxima (plateau voxels included)."""
    footprint = np.ones((3, 3, 3), dtype=bool)
    peak = ndimage.maximum_filter(data, footprint=footprint, mode="constant", cval=-np.inf)
    mask = (data >= peak) & (data > min_score)
    return np.flatnonzero(mask.ravel())


def extract_seeds(prob: Volume, min_score: float, min_separation: float) -> SeedSet:
    """Local maxima above `min_score`, greedily suppressed so that no two
    surviving seeds are closer than `min_separation` in physical units.

    Candidates are visited by descending score (raster order on ties), so
    the result is deterministic.
    """
    if not 0.0 <= min_score <= 1.0:
        raise ValueError(f"min_score must be in [0, 1], got {min_score}")
    if min_separation < 0:
        raise ValueError(f"min_separation must be >= 0, got {min_separation}")
    prob.require_probability()
    data = prob.data
    nz, ny, nx = data.shape
    flat = _local_maxima(data, min_score)
    if flat.size == 0:
        return SeedSet(np.empty((0, 3), dtype=np.int64), np.empty(0))
    scores = data.ravel()[flat]
    order = np.lexsort((flat, -scores))
    flat = flat[order]
    scores = scores[order]

    iz, rem = np.divmod(flat, ny * nx)
    iy, ix = np.divmod(rem, nx)
    sx, sy, sz = prob.spacing
    pos = np.column_stack([ix * sx, iy * sy, iz * sz])

    kept: list[int] = []
    min_sep2 = min_separation * min_separation
    for i in range(flat.size):
        if kept:
            d2 = np.sum((pos[kept] - pos[i]) ** 2, axis=1)
            if float(d2.min()) < min_sep2:
                continue
        kept.append(i)
    coords = np.column_stack([ix[kept], iy[kept], iz[kept]]).astype(np.int64)
    return SeedSet(coords, scores[kept])
