# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the BEV grid hot kernels in ``_kernels_py``.

Both backends must produce bit-identical grids; keep the arithmetic in
the same order as the numpy fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, floor, M_PI

cnp.import_array()


def project_to_grid(cnp.float64_t[:, ::1] depth,
                    cnp.int64_t[:, ::1] labels,
                    cnp.float64_t[:, ::1] xlat,
                    int rows, int cols,
                    double cell_fwd, double cell_lat):
    cdef int h = depth.shape[0]
    cdef int w = depth.shape[1]
    cdef double fwd_range = rows * cell_fwd
    cdef cnp.ndarray[cnp.int64_t, ndim=2] grid = np.full((rows, cols), -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] best = np.full((rows, cols), np.inf)
    cdef cnp.int64_t[:, ::1] gv = grid
    cdef cnp.float64_t[:, ::1] bv = best
    cdef int i, j, ri, ci
    cdef double z, x
    for i in range(h):
        for j in range(w):
            z = depth[i, j]
            if z <= 0.0 or z > fwd_range:
                continue
            ri = <int>floor((fwd_range - z) / cell_fwd)
            if ri < 0:
                ri = 0
            elif ri > rows - 1:
                ri = rows - 1
            ci = <int>floor(cols / 2.0 + xlat[i, j] / cell_lat)
            if ci < 0 or ci >= cols:
                continue
            # nearest pixel wins; exact ties keep the earliest (scan order)
            if z < bv[ri, ci]:
                bv[ri, ci] = z
                gv[ri, ci] = labels[i, j]
    return grid


def splat_rotated(cnp.int64_t[:, ::1] src, double angle_deg,
                  double cell_fwd, double cell_lat,
                  cnp.int64_t[:, ::1] dest, int col_lo, int col_hi):
    cdef int rows_s = src.shape[0]
    cdef int cols_s = src.shape[1]
    cdef int rows_d = dest.shape[0]
    cdef int cols_d = dest.shape[1]
    cdef double a = angle_deg * M_PI / 180.0
    cdef double ca = cos(a)
    cdef double sa = sin(a)
    cdef int i, j, di, dj
    cdef double z, x, xr, zr
    for i in range(rows_s):
        for j in range(cols_s):
            if src[i, j] < 0:
                continue
            z = rows_s * cell_fwd - (i + 0.5) * cell_fwd
            x = (j + 0.5 - cols_s / 2.0) * cell_lat
            xr = x * ca - z * sa
            zr = x * sa + z * ca
            di = <int>floor(rows_d - zr / cell_fwd)
            dj = <int>floor(cols_d / 2.0 + xr / cell_lat)
            if di < 0 or di >= rows_d or dj < col_lo or dj >= col_hi:
                continue
            if dest[di, dj] < 0:
                dest[di, dj] = src[i, j]
