"""Pure-numpy implementations of the rasterization kernels.

Semantics are identical to the compiled extension: for each pixel the
winning point has the strictly smallest depth, ties broken by lowest
point index; last-write mode keeps the highest index instead.
"""

import numpy as np

BACKEND_NAME = "numpy"


def zbuffer_argmin(pix: np.ndarray, depth: np.ndarray, n_pixels: int) -> np.ndarray:
    """Index of the nearest point per flat pixel id, -1 where none lands.

    pix: (n,) int64 flat pixel ids in [0, n_pixels); depth: (n,) float64.
    """
    winners = np.full(n_pixels, -1, dtype=np.int64)
    n = len(pix)
    if n == 0:
        return winners
    idx = np.arange(n, dtype=np.int64)
    order = np.lexsort((idx, depth, pix))
    sorted_pix = pix[order]
    first = np.ones(n, dtype=bool)
    first[1:] = sorted_pix[1:] != sorted_pix[:-1]
    winners[sorted_pix[first]] = order[first]
    return winners


def scatter_last(pix: np.ndarray, n_pixels: int) -> np.ndarray:
    """Index of the last point written per flat pixel id, -1 where none lands."""
    winners = np.full(n_pixels, -1, dtype=np.int64)
    if len(pix):
        winners[pix] = np.arange(len(pix), dtype=np.int64)
    return winners
