"""Benchmark the compiled BEV kernels against the numpy fallback.

Also verifies the two backends agree bit for bit on random inputs before
timing them; run with ``sdcdrive bench``.
"""

import time

import numpy as np

from .geometry import _kernels_py
from .geometry._backend import HAVE_EXT

FRONT_SHAPE = (160, 320)
GRID_ROWS, GRID_COLS = 160, 768
CELL_FWD, CELL_LAT = 0.4, 64.0 / 768.0


def _random_camera(rng, shape):
    h, w = shape
    depth = rng.uniform(0.1, 80.0, size=(h, w))
    labels = rng.integers(0, 23, size=(h, w)).astype(np.int64)
    xlat = rng.uniform(-32.0, 32.0, size=(h, w))
    return depth, labels, xlat


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(repeats=20, seed=0):
    """Yields human-readable result lines."""
    if not HAVE_EXT:
        yield "compiled extension not available; nothing to compare"
        return
    from .geometry import _kernels

    rng = np.random.default_rng(seed)
    depth, labels, xlat = _random_camera(rng, FRONT_SHAPE)

    g_ext = _kernels.project_to_grid(depth, labels, xlat, GRID_ROWS, GRID_COLS,
                                     CELL_FWD, CELL_LAT)
    g_py = _kernels_py.project_to_grid(depth, labels, xlat, GRID_ROWS, GRID_COLS,
                                       CELL_FWD, CELL_LAT)
    assert np.array_equal(g_ext, g_py), "backends disagree on project_to_grid"

    t_ext = _time(lambda: _kernels.project_to_grid(
        depth, labels, xlat, GRID_ROWS, GRID_COLS, CELL_FWD, CELL_LAT), repeats)
    t_py = _time(lambda: _kernels_py.project_to_grid(
        depth, labels, xlat, GRID_ROWS, GRID_COLS, CELL_FWD, CELL_LAT), repeats)
    yield (f"project_to_grid  160x320 -> 160x768:  "
           f"cython {t_ext * 1e3:7.3f} ms   numpy {t_py * 1e3:7.3f} ms   "
           f"speedup {t_py / t_ext:5.2f}x")

    src = rng.integers(-1, 23, size=(160, 224)).astype(np.int64)
    base = np.full((GRID_ROWS, GRID_COLS), -1, dtype=np.int64)
    d_ext = base.copy()
    d_py = base.copy()
    _kernels.splat_rotated(src, 42.0, CELL_FWD, CELL_LAT, d_ext, 0, GRID_COLS // 2)
    _kernels_py.splat_rotated(src, 42.0, CELL_FWD, CELL_LAT, d_py, 0, GRID_COLS // 2)
    assert np.array_equal(d_ext, d_py), "backends disagree on splat_rotated"

    t_ext = _time(lambda: _kernels.splat_rotated(
        src, 42.0, CELL_FWD, CELL_LAT, base.copy(), 0, GRID_COLS // 2), repeats)
    t_py = _time(lambda: _kernels_py.splat_rotated(
        src, 42.0, CELL_FWD, CELL_LAT, base.copy(), 0, GRID_COLS // 2), repeats)
    yield (f"splat_rotated    160x224 -> 160x768:  "
           f"cython {t_ext * 1e3:7.3f} ms   numpy {t_py * 1e3:7.3f} ms   "
           f"speedup {t_py / t_ext:5.2f}x")
