# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled GF(2) kernels; same contracts as ``_gf2_py``."""
import numpy as np
from libc.stdint cimport uint64_t, uint8_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def rref(uint64_t[:, ::1] mat, Py_ssize_t ncols):
    cdef Py_ssize_t nrows = mat.shape[0]
    cdef Py_ssize_t nwords = mat.shape[1]
    cdef Py_ssize_t row = 0
    cdef Py_ssize_t col, r, p, k, word
    cdef uint64_t bit, tmp
    pivots = []
    for col in range(ncols):
        if row >= nrows:
            break
        word = col >> 6
        bit = (<uint64_t>1) << (col & 63)
        p = -1
        for r in range(row, nrows):
            if mat[r, word] & bit:
                p = r
                break
        if p < 0:
            continue
        if p != row:
            for k in range(nwords):
                tmp = mat[row, k]
                mat[row, k] = mat[p, k]
                mat[p, k] = tmp
        # the pivot row is zero left of `col` inside the elimination block
        for r in range(nrows):
            if r != row and (mat[r, word] & bit):
                for k in range(word, nwords):
                    mat[r, k] ^= mat[row, k]
        pivots.append(col)
        row += 1
    return pivots


def sym_inner(ax, az, bx, bz):
    cdef uint64_t[:, ::1] axv = np.ascontiguousarray(ax, dtype=np.uint64)
    cdef uint64_t[:, ::1] azv = np.ascontiguousarray(az, dtype=np.uint64)
    cdef uint64_t[:, ::1] bxv = np.ascontiguousarray(bx, dtype=np.uint64)
    cdef uint64_t[:, ::1] bzv = np.ascontiguousarray(bz, dtype=np.uint64)
    cdef Py_ssize_t na = axv.shape[0], nb = bxv.shape[0], nw = axv.shape[1]
    out = np.zeros((na, nb), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef int c
    for i in range(na):
        for j in range(nb):
            c = 0
            for k in range(nw):
                c += __builtin_popcountll(axv[i, k] & bzv[j, k])
                c += __builtin_popcountll(azv[i, k] & bxv[j, k])
            o[i, j] = c & 1
    return out
