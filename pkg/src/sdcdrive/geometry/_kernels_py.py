"""Pure-numpy implementations of the BEV grid hot kernels.

Semantics must stay bit-identical to the compiled twin in ``_kernels.pyx``;
the test suite and the benchmark compare the two directly.
"""

import numpy as np


def project_to_grid(depth, labels, xlat, rows, cols, cell_fwd, cell_lat):
    """Scatter pixels into a top-down label grid, nearest pixel per cell.

    depth:  H x W forward distance (m), float64
    labels: H x W class index, int64
    xlat:   H x W lateral offset from the camera axis (m), float64
    Returns an int64 rows x cols grid, -1 for empty cells.  Pixels at
    depth <= 0 or beyond the grid's forward extent are dropped.  When
    several pixels land in one cell the nearest wins; exact depth ties go
    to the earliest pixel in row-major order.
    """
    fwd_range = rows * cell_fwd
    z = depth.ravel()
    x = xlat.ravel()
    lab = labels.ravel()

    valid = (z > 0.0) & (z <= fwd_range)
    ri = np.floor((fwd_range - z) / cell_fwd).astype(np.int64)
    ci = np.floor(cols / 2.0 + x / cell_lat).astype(np.int64)
    np.clip(ri, 0, rows - 1, out=ri)
    valid &= (ci >= 0) & (ci < cols)

    idx = np.nonzero(valid)[0]
    grid = np.full((rows, cols), -1, dtype=np.int64)
    if idx.size == 0:
        return grid
    # Write farthest first so nearer pixels win; reversing a stable
    # ascending sort puts the earliest of equal-depth pixels last.
    order = idx[np.argsort(z[idx], kind="stable")][::-1]
    flat = ri[order] * cols + ci[order]
    grid.ravel()[flat] = lab[order]
    return grid


def splat_rotated(src, angle_deg, cell_fwd, cell_lat, dest, col_lo, col_hi):
    """Rotate a side label grid about the ego origin into ``dest`` in place.

    Every occupied source cell center is rotated by ``angle_deg`` (CCW in
    the lateral/forward plane) and written to the nearest destination cell,
    restricted to columns [col_lo, col_hi).  Occupied destination cells are
    never overwritten; duplicate targets resolve to the first source cell
    in row-major order.
    """
    rows_s, cols_s = src.shape
    rows_d, cols_d = dest.shape
    a = np.radians(angle_deg)
    ca, sa = np.cos(a), np.sin(a)

    si, sj = np.nonzero(src >= 0)
    if si.size == 0:
        return
    z = rows_s * cell_fwd - (si + 0.5) * cell_fwd
    x = (sj + 0.5 - cols_s / 2.0) * cell_lat
    xr = x * ca - z * sa
    zr = x * sa + z * ca

    di = np.floor(rows_d - zr / cell_fwd).astype(np.int64)
    dj = np.floor(cols_d / 2.0 + xr / cell_lat).astype(np.int64)
    ok = (di >= 0) & (di < rows_d) & (dj >= col_lo) & (dj < col_hi)
    si, sj, di, dj = si[ok], sj[ok], di[ok], dj[ok]
    if si.size == 0:
        return

    flat = di * cols_d + dj
    # np.nonzero yields row-major order, so the first occurrence of each
    # destination index is the first source cell in scan order.
    _, first = np.unique(flat, return_index=True)
    flat, si, sj = flat[first], si[first], sj[first]
    free = dest.ravel()[flat] < 0
    dest.ravel()[flat[free]] = src[si[free], sj[free]]
