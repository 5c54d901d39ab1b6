# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels in ``_kernels_py``.

Bit-identical contract: same flooding order (level descending, insertion
order FIFO) and the same floating-point expression structure as the pure
backend; the build disables FP contraction.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND_NAME = "compiled"


def watershed_flood(
    cnp.int32_t[:, :, ::1] levels,
    cnp.uint8_t[:, :, ::1] fg,
    cnp.int64_t[::1] seed_flat,
    int n_levels,
    cnp.int64_t[:, ::1] offsets,
    cnp.int32_t[:, :, ::1] labels,
):
    """Bucket-queue priority flood; see the pure backend for the contract.

    A bucket queue over the bounded level range with FIFO buckets pops in
    exactly the order of a max-heap keyed by (level, insertion counter).
    """
    cdef Py_ssize_t nz = levels.shape[0]
    cdef Py_ssize_t ny = levels.shape[1]
    cdef Py_ssize_t nx = levels.shape[2]
    cdef Py_ssize_t plane = ny * nx
    cdef Py_ssize_t total = nz * plane
    cdef Py_ssize_t n_off = offsets.shape[0]

    # Each voxel enters the queue at most once.
    cdef cnp.int64_t* buf = <cnp.int64_t*> malloc(total * sizeof(cnp.int64_t))
    cdef cnp.int64_t* nxt = <cnp.int64_t*> malloc(total * sizeof(cnp.int64_t))
    cdef cnp.int64_t* head = <cnp.int64_t*> malloc(n_levels * sizeof(cnp.int64_t))
    cdef cnp.int64_t* tail = <cnp.int64_t*> malloc(n_levels * sizeof(cnp.int64_t))
    if buf == NULL or nxt == NULL or head == NULL or tail == NULL:
        free(buf); free(nxt); free(head); free(tail)
        raise MemoryError()

    cdef Py_ssize_t i, slot
    cdef cnp.int64_t v, w
    cdef Py_ssize_t z, y, x, zz, yy, xx, o
    cdef int l, cur = 0
    cdef cnp.int32_t lab
    cdef Py_ssize_t count = 0

    try:
        for i in range(n_levels):
            head[i] = -1
            tail[i] = -1

        for i in range(seed_flat.shape[0]):
            v = seed_flat[i]
            labels[v // plane, (v % plane) // nx, v % nx] = <cnp.int32_t> (i + 1)
            l = levels[v // plane, (v % plane) // nx, v % nx]
            buf[count] = v
            nxt[count] = -1
            if tail[l] == -1:
                head[l] = count
            else:
                nxt[tail[l]] = count
            tail[l] = count
            count += 1
            if l > cur:
                cur = l

        while True:
            while cur >= 0 and head[cur] == -1:
                cur -= 1
            if cur < 0:
                break
            slot = head[cur]
            head[cur] = nxt[slot]
            if head[cur] == -1:
                tail[cur] = -1
            v = buf[slot]
            z = v // plane
            y = (v % plane) // nx
            x = v % nx
            lab = labels[z, y, x]
            for o in range(n_off):
                zz = z + offsets[o, 0]
                if zz < 0 or zz >= nz:
                    continue
                yy = y + offsets[o, 1]
                if yy < 0 or yy >= ny:
                    continue
                xx = x + offsets[o, 2]
                if xx < 0 or xx >= nx:
                    continue
                if fg[zz, yy, xx] != 0 and labels[zz, yy, xx] == 0:
                    labels[zz, yy, xx] = lab
                    w = zz * plane + yy * nx + xx
                    l = levels[zz, yy, xx]
                    buf[count] = w
                    nxt[count] = -1
                    if tail[l] == -1:
                        head[l] = count
                    else:
                        nxt[tail[l]] = count
                    tail[l] = count
                    count += 1
                    if l > cur:
                        cur = l
    finally:
        free(buf)
        free(nxt)
        free(head)
        free(tail)


def slic_assign(
    cnp.float64_t[:, :, ::1] intensity,
    cnp.float64_t[::1] xs,
    cnp.float64_t[::1] ys,
    cnp.float64_t[::1] zs,
    cnp.float64_t[:, ::1] centers_pos,
    cnp.float64_t[::1] centers_int,
    cnp.uint8_t[::1] alive,
    cnp.int64_t[:, ::1] windows,
    double ratio,
    cnp.int32_t[:, :, ::1] labels,
    cnp.float64_t[:, :, ::1] best,
):
    """One SLIC assignment sweep; see the pure backend for the contract."""
    cdef Py_ssize_t K = centers_pos.shape[0]
    cdef Py_ssize_t k, iz, iy, ix
    cdef Py_ssize_t z0, z1, y0, y1, x0, x1
    cdef double cx, cy, cz, cint
    cdef double dzv, dyv, dxv, dz2, dzy, ds2, di, d2
    cdef cnp.int32_t lab

    for k in range(K):
        if alive[k] == 0:
            continue
        z0 = windows[k, 0]; z1 = windows[k, 1]
        y0 = windows[k, 2]; y1 = windows[k, 3]
        x0 = windows[k, 4]; x1 = windows[k, 5]
        cx = centers_pos[k, 0]
        cy = centers_pos[k, 1]
        cz = centers_pos[k, 2]
        cint = centers_int[k]
        lab = <cnp.int32_t> (k + 1)
        for iz in range(z0, z1):
            dzv = zs[iz] - cz
            dz2 = dzv * dzv
            for iy in range(y0, y1):
                dyv = ys[iy] - cy
                dzy = dz2 + dyv * dyv
                for ix in range(x0, x1):
                    dxv = xs[ix] - cx
                    ds2 = dzy + dxv * dxv
                    di = intensity[iz, iy, ix] - cint
                    d2 = di * di + ds2 * ratio
                    if d2 < best[iz, iy, ix]:
                        best[iz, iy, ix] = d2
                        labels[iz, iy, ix] = lab
