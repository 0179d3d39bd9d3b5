# Compiled rasterization kernels. Must match _fallback.py bit for bit:
# nearest depth wins, ties broken by lowest point index; last-write mode
# keeps the highest index.

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def zbuffer_argmin(cnp.int64_t[::1] pix, cnp.float64_t[::1] depth, Py_ssize_t n_pixels):
    """Index of the nearest point per flat pixel id, -1 where none lands."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] winners = np.full(n_pixels, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] win = winners
    cdef Py_ssize_t i, p
    cdef Py_ssize_t n = pix.shape[0]
    cdef cnp.float64_t d
    for i in range(n):
        p = pix[i]
        d = depth[i]
        if win[p] < 0 or d < depth[win[p]]:
            win[p] = i
    return winners


def scatter_last(cnp.int64_t[::1] pix, Py_ssize_t n_pixels):
    """Index of the last point written per flat pixel id, -1 where none lands."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] winners = np.full(n_pixels, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] win = winners
    cdef Py_ssize_t i
    cdef Py_ssize_t n = pix.shape[0]
    for i in range(n):
        win[pix[i]] = i
    return winners
