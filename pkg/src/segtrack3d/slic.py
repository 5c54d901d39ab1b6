"""SLIC supervoxel over-segmentation, anisotropy-aware.

Local k-means in a joint intensity/space metric: squared distance
``d_int^2 + (d_spatial / S)^2 * m^2`` with physical spatial distances,
``S`` the expected supervoxel pitch, and ``m`` the compactness tradeoff.
Centers are seeded on a regular physical grid, perturbed to the lowest
local gradient, and each iteration assigns voxels only inside a window of
two pitches around each center. Every step visits centers in ascending
label order with strict-improvement updates, so results are deterministic
and identical across backends.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _backend
from .volume import Connectivity, LabelVolume, Volume, relabel_first_encounter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlicConfig:
    k: int
    compactness: float = 0.2
    max_iters: int = 10
    enforce_connectivity: bool = True
    move_tol: float = 1e-3  # physical units; stop when no center moves farther
    min_fragment: int | None = None  # connectivity size floor; None = mean size / 4

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.compactness < 0:
            raise ValueError(f"compactness must be >= 0, got {self.compactness}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class SupervoxelCenter:
    """Physical-space summary of one supervoxel: centroid and mean intensity."""

    position: tuple[float, float, float]  # physical (x, y, z), microns
    mean_intensity: float


def supervoxel_centers(intensity: Volume, labels: LabelVolume) -> dict[int, SupervoxelCenter]:
    """Centroid and mean intensity per nonzero label."""
    data = intensity.data
    nz, ny, nx = data.shape
    sx, sy, sz = intensity.spacing
    xs = np.arange(nx, dtype=np.float64) * sx
    ys = np.arange(ny, dtype=np.float64) * sy
    zs = np.arange(nz, dtype=np.float64) * sz
    lab = labels.data.ravel()
    n = int(lab.max(initial=0))
    counts = np.bincount(lab, minlength=n + 1)
    sum_x = np.bincount(lab, weights=np.broadcast_to(xs, data.shape).ravel(), minlength=n + 1)
    sum_y = np.bincount(lab, weights=np.broadcast_to(ys[None, :, None], data.shape).ravel(), minlength=n + 1)
    sum_z = np.bincount(lab, weights=np.broadcast_to(zs[:, None, None], data.shape).ravel(), minlength=n + 1)
    sum_i = np.bincount(lab, weights=data.ravel(), minlength=n + 1)
    out = {}
    for l in range(1, n + 1):
        c = counts[l]
        if c == 0:
            continue
        out[l] = SupervoxelCenter(
            (sum_x[l] / c, sum_y[l] / c, sum_z[l] / c), sum_i[l] / c
        )
    return out


def _grid_counts(extents: tuple[float, float, float], dims: tuple[int, int, int], k: int) -> tuple[int, int, int]:
    """Per-axis center counts: grow the axis with the coarsest pitch while
    the total stays within k."""
    g = [1, 1, 1]
    while True:
        best_axis = -1
        best_pitch = -1.0
        for a in range(3):
            if g[a] >= dims[a]:
                continue
            total = g[0] * g[1] * g[2] // g[a] * (g[a] + 1)
            if total > k:
                continue
            pitch = extents[a] / g[a]
            if pitch > best_pitch:
                best_pitch = pitch
                best_axis = a
        if best_axis < 0:
            return (g[0], g[1], g[2])
        g[best_axis] += 1


def _initial_centers(intensity: Volume, grid: tuple[int, int, int]) -> np.ndarray:
    """Seed voxel indices (K, 3) as (ix, iy, iz), z-major center order,
    each perturbed to the lowest-gradient voxel of its 3x3x3 neighborhood."""
    nx, ny, nz = intensity.dims
    dims = (nx, ny, nz)
    axes_idx = []
    for a in range(3):
        j = np.arange(grid[a]) + 0.5
        axes_idx.append(np.clip(np.round(j * dims[a] / grid[a]).astype(np.int64), 0, dims[a] - 1))

    sx, sy, sz = intensity.spacing
    gz_, gy_, gx_ = np.gradient(intensity.data, sz, sy, sx)
    grad2 = gx_ * gx_ + gy_ * gy_ + gz_ * gz_

    seeds = []
    claimed: set[tuple[int, int, int]] = set()
    for kz in axes_idx[2]:
        for ky in axes_idx[1]:
            for kx in axes_idx[0]:
                ix, iy, iz = int(kx), int(ky), int(kz)
                best = (ix, iy, iz)
                best_g = grad2[iz, iy, ix]
                for dz in (-1, 0, 1):
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            jx, jy, jz = ix + dx, iy + dy, iz + dz
                            if 0 <= jx < nx and 0 <= jy < ny and 0 <= jz < nz:
                                gval = grad2[jz, jy, jx]
                                if gval < best_g:
                                    best_g = gval
                                    best = (jx, jy, jz)
                if best in claimed:
                    best = (ix, iy, iz)
                claimed.add(best)
                seeds.append(best)
    return np.asarray(seeds, dtype=np.int64)


def _window_bounds(
    centers_pos: np.ndarray,
    spacing: tuple[float, float, float],
    shape: tuple[int, int, int],
    half_vox: tuple[int, int, int],
) -> np.ndarray:
    """Per-center clipped (z0, z1, y0, y1, x0, x1) windows around the
    voxel nearest each center position."""
    nz, ny, nx = shape
    sx, sy, sz = spacing
    hx, hy, hz = half_vox
    icx = np.clip(np.round(centers_pos[:, 0] / sx).astype(np.int64), 0, nx - 1)
    icy = np.clip(np.round(centers_pos[:, 1] / sy).astype(np.int64), 0, ny - 1)
    icz = np.clip(np.round(centers_pos[:, 2] / sz).astype(np.int64), 0, nz - 1)
    win = np.empty((centers_pos.shape[0], 6), dtype=np.int64)
    win[:, 0] = np.maximum(icz - hz, 0)
    win[:, 1] = np.minimum(icz + hz + 1, nz)
    win[:, 2] = np.maximum(icy - hy, 0)
    win[:, 3] = np.minimum(icy + hy + 1, ny)
    win[:, 4] = np.maximum(icx - hx, 0)
    win[:, 5] = np.minimum(icx + hx + 1, nx)
    return win


def _assign_leftovers(
    labels: np.ndarray,
    best: np.ndarray,
    intensity: np.ndarray,
    coords_phys: tuple[np.ndarray, np.ndarray, np.ndarray],
    centers_pos: np.ndarray,
    centers_int: np.ndarray,
    alive: np.ndarray,
    ratio: float,
) -> None:
    """Voxels no window reached: brute-force nearest live center."""
    left = labels == 0
    if not left.any():
        return
    zi, yi, xi = np.nonzero(left)
    xs, ys, zs = coords_phys
    vi = intensity[zi, yi, xi]
    vb = best[zi, yi, xi]
    vl = labels[zi, yi, xi]
    for k in range(centers_pos.shape[0]):
        if not alive[k]:
            continue
        zw = zs[zi] - centers_pos[k, 2]
        yw = ys[yi] - centers_pos[k, 1]
        xw = xs[xi] - centers_pos[k, 0]
        ds2 = ((zw * zw) + (yw * yw)) + (xw * xw)
        di = vi - centers_int[k]
        d2 = di * di + ds2 * ratio
        sel = d2 < vb
        vb[sel] = d2[sel]
        vl[sel] = k + 1
    labels[zi, yi, xi] = vl
    best[zi, yi, xi] = vb


def slic(intensity: Volume, cfg: SlicConfig) -> LabelVolume:
    """Supervoxel labeling 1..k' (k' <= k after dropping emptied centers)."""
    data = intensity.data
    nz, ny, nx = data.shape
    n_vox = data.size
    if cfg.k > n_vox:
        raise ValueError(f"k={cfg.k} exceeds voxel count {n_vox}")

    sx, sy, sz = intensity.spacing
    extents = (nx * sx, ny * sy, nz * sz)
    grid = _grid_counts(extents, (nx, ny, nz), cfg.k)
    pitch = (extents[0] / grid[0], extents[1] / grid[1], extents[2] / grid[2])
    s_expected = (extents[0] * extents[1] * extents[2] / cfg.k) ** (1.0 / 3.0)
    ratio = (cfg.compactness * cfg.compactness) / (s_expected * s_expected)
    half_vox = (
        max(1, math.ceil(pitch[0] / sx)),
        max(1, math.ceil(pitch[1] / sy)),
        max(1, math.ceil(pitch[2] / sz)),
    )

    seeds = _initial_centers(intensity, grid)
    n_centers = seeds.shape[0]
    centers_pos = np.column_stack([seeds[:, 0] * sx, seeds[:, 1] * sy, seeds[:, 2] * sz])
    centers_int = data[seeds[:, 2], seeds[:, 1], seeds[:, 0]].astype(np.float64)
    alive = np.ones(n_centers, dtype=np.uint8)

    xs = np.arange(nx, dtype=np.float64) * sx
    ys = np.arange(ny, dtype=np.float64) * sy
    zs = np.arange(nz, dtype=np.float64) * sz

    labels = np.zeros(data.shape, dtype=np.int32)
    for _ in range(cfg.max_iters):
        labels.fill(0)
        best = np.full(data.shape, np.inf)
        windows = _window_bounds(centers_pos, intensity.spacing, data.shape, half_vox)
        _backend.slic_assign(
            data, xs, ys, zs, centers_pos, centers_int, alive, windows, ratio, labels, best
        )
        _assign_leftovers(
            labels, best, data, (xs, ys, zs), centers_pos, centers_int, alive, ratio
        )

        counts = np.bincount(labels.ravel(), minlength=n_centers + 1).astype(np.float64)
        sum_x = np.bincount(labels.ravel(), weights=np.broadcast_to(xs, data.shape).ravel(), minlength=n_centers + 1)
        sum_y = np.bincount(labels.ravel(), weights=np.broadcast_to(ys[None, :, None], data.shape).ravel(), minlength=n_centers + 1)
        sum_z = np.bincount(labels.ravel(), weights=np.broadcast_to(zs[:, None, None], data.shape).ravel(), minlength=n_centers + 1)
        sum_i = np.bincount(labels.ravel(), weights=data.ravel(), minlength=n_centers + 1)

        occupied = counts[1:] > 0
        alive = (alive.astype(bool) & occupied).astype(np.uint8)
        live = alive.astype(bool)
        new_pos = centers_pos.copy()
        new_pos[live, 0] = sum_x[1:][live] / counts[1:][live]
        new_pos[live, 1] = sum_y[1:][live] / counts[1:][live]
        new_pos[live, 2] = sum_z[1:][live] / counts[1:][live]
        new_int = centers_int.copy()
        new_int[live] = sum_i[1:][live] / counts[1:][live]

        move2 = np.sum((new_pos[live] - centers_pos[live]) ** 2, axis=1)
        centers_pos, centers_int = new_pos, new_int
        if move2.size == 0 or float(move2.max()) <= cfg.move_tol * cfg.move_tol:
            break

    # Compact labels of emptied centers away: survivors renumber 1..k'
    # in ascending original order.
    present = np.unique(labels)
    present = present[present > 0]
    lut = np.zeros(n_centers + 1, dtype=np.int32)
    lut[present] = np.arange(1, present.size + 1, dtype=np.int32)
    out = LabelVolume(lut[labels], intensity.spacing)

    if cfg.enforce_connectivity:
        # Absorb every secondary fragment (floor above any region size)
        # unless told otherwise: promoting fragments to fresh labels could
        # push the label count past k.
        floor = cfg.min_fragment if cfg.min_fragment is not None else n_vox + 1
        out = enforce_connectivity(out, floor)
    return out


def _anchored_neighbors(anchor: np.ndarray, coords: np.ndarray) -> set[int]:
    """Labels of already-placed voxels face-adjacent to the fragment."""
    nz, ny, nx = anchor.shape
    found: set[int] = set()
    for dz, dy, dx in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
        shifted = coords + (dz, dy, dx)
        ok = (
            (shifted[:, 0] >= 0) & (shifted[:, 0] < nz)
            & (shifted[:, 1] >= 0) & (shifted[:, 1] < ny)
            & (shifted[:, 2] >= 0) & (shifted[:, 2] < nx)
        )
        vals = anchor[tuple(shifted[ok].T)]
        found.update(int(v) for v in np.unique(vals))
    found.discard(0)
    return found


def enforce_connectivity(labels: LabelVolume, min_size: int | None = None) -> LabelVolume:
    """Split each label into face-connected components; the largest keeps
    the label, fragments below the size floor merge into their largest
    face-adjacent neighbor, and larger fragments become fresh labels.

    Fragments only ever attach to settled territory (kept components,
    promoted fragments, or fragments merged before them), so every output
    label ends up a single connected component.
    """
    data = labels.data
    present = labels.labels()
    if present.size == 0:
        return labels
    if min_size is None:
        mean_size = int((data > 0).sum()) / present.size
        min_size = max(1, int(round(mean_size / 4.0)))

    structure = Connectivity.FACE_6.structure()
    out = data.copy()
    # anchor holds only settled voxels; fragments awaiting placement are 0
    anchor = data.copy()
    sizes: dict[int, int] = {}
    next_label = int(present.max()) + 1
    pending: list[np.ndarray] = []  # fragment voxel coords, deterministic order

    objects = ndimage.find_objects(data)
    for label in present:
        label = int(label)
        sl = objects[label - 1]
        local = data[sl] == label
        comp, n_comp = ndimage.label(local, structure=structure)
        if n_comp <= 1:
            sizes[label] = int(local.sum())
            continue
        comp_sizes = np.bincount(comp.ravel())[1:]
        keep = int(np.argmax(comp_sizes)) + 1  # ties: lowest component id
        sizes[label] = int(comp_sizes[keep - 1])
        offset = np.array([s.start for s in sl])
        for c in range(1, n_comp + 1):
            if c == keep:
                continue
            coords = np.argwhere(comp == c) + offset
            size = coords.shape[0]
            if size >= min_size:
                out[tuple(coords.T)] = next_label
                anchor[tuple(coords.T)] = next_label
                sizes[next_label] = size
                next_label += 1
            else:
                anchor[tuple(coords.T)] = 0
                pending.append(coords)

    while pending:
        progress = False
        still: list[np.ndarray] = []
        for coords in pending:
            found = _anchored_neighbors(anchor, coords)
            if not found:
                still.append(coords)
                continue
            target = max(found, key=lambda l: (sizes.get(l, 0), -l))
            out[tuple(coords.T)] = target
            anchor[tuple(coords.T)] = target
            sizes[target] = sizes.get(target, 0) + coords.shape[0]
            progress = True
        if not progress and still:
            # Island of fragments with no settled neighbor: promote the
            # first one so the rest can attach to it.
            coords = still.pop(0)
            out[tuple(coords.T)] = next_label
            anchor[tuple(coords.T)] = next_label
            sizes[next_label] = coords.shape[0]
            next_label += 1
        pending = still

    return labels.like(relabel_first_encounter(out))
