"""Linear algebra over the two-element field on bit-packed rows.

The hot kernels (``rref`` and ``sym_inner``) come from the compiled
extension when it is importable and from a numpy fallback otherwise.
Setting ``SUBFACTORLAB_PURE_PYTHON=1`` before import forces the fallback.
"""
import os

import numpy as np

from . import _gf2_py

try:
    if os.environ.get("SUBFACTORLAB_PURE_PYTHON"):
        raise ImportError("pure-python kernels requested")
    from . import _gf2_ext as _kernels

    BACKEND = "cython"
except ImportError:
    _kernels = _gf2_py
    BACKEND = "python"


def kernels(name=None):
    """Return the kernel module ``name`` ("cython" or "python"); default is the active one."""
    if name is None:
        return _kernels
    if name == "python":
        return _gf2_py
    if name == "cython":
        from . import _gf2_ext

        return _gf2_ext
    raise ValueError(f"unknown GF(2) backend {name!r}")


def pack(bits):
    """Pack a boolean ``(rows, cols)`` array into ``uint64`` words."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    nrows, ncols = bits.shape
    nwords = max(1, -(-ncols // 64))
    padded = np.zeros((nrows, nwords * 64), dtype=bool)
    padded[:, :ncols] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack(words, ncols):
    """Inverse of :func:`pack`."""
    words = np.ascontiguousarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :ncols].astype(bool)


def rref(bits, ncols=None, backend=None):
    """Reduced row echelon form of a boolean matrix.

    Parameters
    ----------
    bits : array_like of bool, shape (r, c)
    ncols : int, optional
        Only the first ``ncols`` columns are eliminated; the rest ride along.
    backend : {"cython", "python"}, optional

    Returns
    -------
    reduced : ndarray of bool
    pivots : list of int
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    total = bits.shape[1]
    ncols = total if ncols is None else ncols
    mat = pack(bits)
    pivots = kernels(backend).rref(mat, ncols)
    return unpack(mat, total), list(pivots)


def rank(bits):
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    if bits.size == 0:
        return 0
    return len(rref(bits)[1])


def left_nullspace(bits, backend=None):
    """Basis of ``{c : c @ bits = 0 (mod 2)}`` as rows of a boolean matrix."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    nrows, ncols = bits.shape
    aug = np.concatenate([bits, np.eye(nrows, dtype=bool)], axis=1)
    reduced, pivots = rref(aug, ncols, backend=backend)
    return reduced[len(pivots):, ncols:]


def solve_left(bits, target):
    """Find ``c`` with ``c @ bits = target`` (mod 2), or ``None`` if ``target`` is outside the row span."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    target = np.asarray(target, dtype=bool)
    nrows, ncols = bits.shape
    aug = np.concatenate([bits, np.eye(nrows, dtype=bool)], axis=1)
    reduced, pivots = rref(aug, ncols)
    vec = np.concatenate([target, np.zeros(nrows, dtype=bool)])
    for row, col in enumerate(pivots):
        if vec[col]:
            vec ^= reduced[row]
    if vec[:ncols].any():
        return None
    return vec[ncols:]


def sym_inner(ax, az, bx, bz, backend=None):
    """Symplectic inner products between two stacks of boolean (x, z) vectors."""
    return kernels(backend).sym_inner(pack(ax), pack(az), pack(bx), pack(bz)).astype(bool)
