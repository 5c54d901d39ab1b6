"""Dense 3D volume containers and the morphological primitives built on them.

Conventions used throughout the package:

* Arrays are C-ordered with shape ``(nz, ny, nx)`` so that x is the
  fastest-varying axis in memory and the z axis maps to TIFF page index.
* Public voxel coordinates are ``(ix, iy, iz)`` triples matching the
  ``dims = (nx, ny, nz)`` order; index an array as ``data[iz, iy, ix]``.
* ``spacing = (sx, sy, sz)`` is the physical size of one voxel in microns;
  the physical position of a voxel is ``(ix*sx, iy*sy, iz*sz)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import UnknownLabelError

Spacing = tuple[float, float, float]


class Connectivity(IntEnum):
    """Voxel neighborhood: 6 face neighbors, 18 face+edge, or full 26."""

    FACE_6 = 6
    FACE_EDGE_18 = 18
    FULL_26 = 26

    @property
    def rank(self) -> int:
        return {6: 1, 18: 2, 26: 3}[int(self)]

    def structure(self) -> np.ndarray:
        """3x3x3 boolean structuring element for scipy.ndimage."""
        return ndimage.generate_binary_structure(3, self.rank)

    def offsets(self) -> np.ndarray:
        """Neighbor offsets as an (n, 3) int array of (dz, dy, dx) rows.

        Rows are sorted lexicographically, which fixes the neighbor visit
        order everywhere a deterministic scan matters.
        """
        st = self.structure()
        offs = np.argwhere(st) - 1
        offs = offs[np.any(offs != 0, axis=1)]
        order = np.lexsort((offs[:, 2], offs[:, 1], offs[:, 0]))
        return offs[order]

    @classmethod
    def from_int(cls, value: int) -> "Connectivity":
        try:
            return cls(int(value))
        except ValueError as exc:
            raise ValueError(f"connectivity must be 6, 18 or 26, got {value!r}") from exc


def _check_geometry(data: np.ndarray, spacing: Spacing) -> None:
    if data.ndim != 3:
        raise ValueError(f"volume data must be 3D (nz, ny, nx), got shape {data.shape}")
    if data.size == 0:
        raise ValueError("volume data must be non-empty")
    if len(spacing) != 3 or any(s <= 0 for s in spacing):
        raise ValueError(f"spacing must be 3 strictly positive values, got {spacing!r}")


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar grid (raw intensity or probability map) with physical spacing."""

    data: np.ndarray  # float64, shape (nz, ny, nx)
    spacing: Spacing

    def __post_init__(self) -> None:
        _check_geometry(self.data, self.spacing)
        object.__setattr__(self, "data", np.ascontiguousarray(self.data, dtype=np.float64))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz)"""
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def voxel_volume(self) -> float:
        """Physical volume of one voxel (cubic microns)."""
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def is_probability(self) -> bool:
        return bool(self.data.min() >= 0.0 and self.data.max() <= 1.0)

    def require_probability(self) -> "Volume":
        if not self.is_probability():
            raise ValueError(
                f"expected probability map in [0, 1], got range "
                f"[{self.data.min():g}, {self.data.max():g}]"
            )
        return self


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Non-negative integer labels on the same grid; 0 is background."""

    data: np.ndarray  # int32, shape (nz, ny, nx)
    spacing: Spacing

    def __post_init__(self) -> None:
        _check_geometry(self.data, self.spacing)
        data = np.ascontiguousarray(self.data)
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError(f"label data must be integer, got dtype {data.dtype}")
        if data.size and data.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "data", data.astype(np.int32, copy=False))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def labels(self) -> np.ndarray:
        """Sorted array of distinct nonzero labels."""
        vals = np.unique(self.data)
        return vals[vals > 0]

    def is_binary(self) -> bool:
        return bool(np.isin(self.data, (0, 1)).all())

    def like(self, data: np.ndarray) -> "LabelVolume":
        """New LabelVolume with this geometry and the given data."""
        return LabelVolume(data, self.spacing)


def relabel_first_encounter(labels: np.ndarray) -> np.ndarray:
    """Renumber nonzero labels to 1..n by first raster-scan encounter."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq > 0
    uniq, first = uniq[keep], first[keep]
    order = np.argsort(first, kind="stable")
    lut = np.zeros(int(uniq.max()) + 1 if uniq.size else 1, dtype=labels.dtype)
    lut[uniq[order]] = np.arange(1, uniq.size + 1, dtype=labels.dtype)
    return lut[labels]


def connected_components(
    mask: LabelVolume, conn: Connectivity = Connectivity.FACE_6
) -> tuple[LabelVolume, int]:
    """Label maximal connected regions of a binary mask.

    Labels are assigned 1..count in raster-scan first-encounter order;
    an empty mask yields count 0 and an all-zero volume.
    """
    if not mask.is_binary():
        raise ValueError("connected_components expects a binary mask (labels in {0, 1})")
    raw, count = ndimage.label(mask.data > 0, structure=conn.structure())
    out = relabel_first_encounter(raw.astype(np.int32, copy=False))
    return mask.like(out), int(count)


def dilate_binary(
    mask: LabelVolume,
    element: Connectivity = Connectivity.FACE_6,
    iterations: int = 1,
) -> LabelVolume:
    """Morphological dilation of a binary mask, saturating at the volume bounds."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not mask.is_binary():
        raise ValueError("dilate_binary expects a binary mask")
    out = ndimage.binary_dilation(
        mask.data > 0, structure=element.structure(), iterations=iterations
    )
    return mask.like(out.astype(np.int32))


def region_voxel_count(labels: LabelVolume, label: int) -> int:
    """Number of voxels carrying `label`; raises if the label is absent."""
    if label <= 0:
        raise UnknownLabelError(f"label must be positive, got {label}")
    n = int(np.count_nonzero(labels.data == label))
    if n == 0:
        raise UnknownLabelError(f"label {label} not present in volume")
    return n


def region_sizes(labels: LabelVolume) -> dict[int, int]:
    """Voxel count per nonzero label in one pass."""
    counts = np.bincount(labels.data.ravel())
    return {int(l): int(counts[l]) for l in range(1, counts.size) if counts[l] > 0}


def bounding_box(
    mask: np.ndarray,
) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]] | None:
    """Inclusive-exclusive (lo, hi) per array axis of a boolean mask, or None if empty."""
    if not mask.any():
        return None
    idx = np.argwhere(mask)
    lo = idx.min(axis=0)
    hi = idx.max(axis=0) + 1
    return ((int(lo[0]), int(hi[0])), (int(lo[1]), int(hi[1])), (int(lo[2]), int(hi[2])))
