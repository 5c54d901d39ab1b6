"""Pure-Python/numpy fallback for the hot kernels.

Semantically authoritative: the compiled extension in ``_kernels.pyx`` must
produce bit-identical output. Both kernels are written so that every
floating-point operation happens in the same order in both backends (the
extension is compiled with -ffp-contract=off for the same reason).
"""

from __future__ import annotations

import heapq

import numpy as np

BACKEND_NAME = "pure"


def watershed_flood(
    levels: np.ndarray,
    fg: np.ndarray,
    seed_flat: np.ndarray,
    n_levels: int,
    offsets: np.ndarray,
    labels: np.ndarray,
) -> None:
    """Priority-flood on quantized levels, highest level first.

    Pop order is (level descending, insertion order); voxels are labeled
    when first discovered, so each foreground voxel is visited once.

    Parameters
    ----------
    levels : int32 (nz, ny, nx), values in [0, n_levels)
    fg : bool (nz, ny, nx) foreground mask
    seed_flat : int64 (m,) flat indices; seed i gets label i+1
    offsets : int (n, 3) neighbor offsets as (dz, dy, dx) rows
    labels : int32 (nz, ny, nx), zero-initialized output, written in place
    """
    nz, ny, nx = levels.shape
    lev = levels.ravel()
    fgf = fg.ravel()
    labf = labels.ravel()
    offs = [(int(a), int(b), int(c)) for a, b, c in offsets]

    heap: list[tuple[int, int, int]] = []
    counter = 0
    for i, s in enumerate(seed_flat):
        s = int(s)
        labf[s] = i + 1
        heapq.heappush(heap, (-int(lev[s]), counter, s))
        counter += 1

    plane = ny * nx
    while heap:
        _, _, v = heapq.heappop(heap)
        lab = labf[v]
        z, rem = divmod(v, plane)
        y, x = divmod(rem, nx)
        for dz, dy, dx in offs:
            zz = z + dz
            if zz < 0 or zz >= nz:
                continue
            yy = y + dy
            if yy < 0 or yy >= ny:
                continue
            xx = x + dx
            if xx < 0 or xx >= nx:
                continue
            w = zz * plane + yy * nx + xx
            if fgf[w] and labf[w] == 0:
                labf[w] = lab
                heapq.heappush(heap, (-int(lev[w]), counter, w))
                counter += 1


def slic_assign(
    intensity: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    zs: np.ndarray,
    centers_pos: np.ndarray,
    centers_int: np.ndarray,
    alive: np.ndarray,
    windows: np.ndarray,
    ratio: float,
    labels: np.ndarray,
    best: np.ndarray,
) -> None:
    """One SLIC assignment sweep: each live center competes inside its window.

    Squared distance per voxel is ``di*di + ((dz2 + dy2) + dx2) * ratio``
    with ``ratio = m^2 / S^2``; a voxel switches to a center only on a
    strictly smaller value, so ties keep the lower label (centers are
    visited in ascending label order).

    Parameters
    ----------
    intensity : float64 (nz, ny, nx)
    xs, ys, zs : float64 physical coordinates per axis index
    centers_pos : float64 (K, 3) physical (x, y, z) per center
    centers_int : float64 (K,) center mean intensity
    alive : bool (K,)
    windows : int64 (K, 6) rows (z0, z1, y0, y1, x0, x1), half-open
    labels : int32 (nz, ny, nx), written in place (label = center index + 1)
    best : float64 (nz, ny, nx) current best squared distance, written in place
    """
    for k in range(centers_pos.shape[0]):
        if not alive[k]:
            continue
        z0, z1, y0, y1, x0, x1 = (int(w) for w in windows[k])
        cx, cy, cz = centers_pos[k]
        zw = zs[z0:z1] - cz
        yw = ys[y0:y1] - cy
        xw = xs[x0:x1] - cx
        ds2 = (
            (zw * zw)[:, None, None] + (yw * yw)[None, :, None]
        ) + (xw * xw)[None, None, :]
        di = intensity[z0:z1, y0:y1, x0:x1] - centers_int[k]
        d2 = di * di + ds2 * ratio
        bw = best[z0:z1, y0:y1, x0:x1]
        sel = d2 < bw
        bw[sel] = d2[sel]
        labels[z0:z1, y0:y1, x0:x1][sel] = k + 1
