"""Pure numpy GF(2) kernels, used when the compiled extension is missing.

Rows are bit-packed little-endian into ``uint64`` words: column ``c`` lives
in word ``c // 64`` at bit ``c % 64``.
"""
import numpy as np

_ONE = np.uint64(1)


def rref(mat, ncols):
    """Gauss-Jordan eliminate ``mat`` in place on its first ``ncols`` columns.

    Whole rows are XOR-ed, so columns past ``ncols`` (an augmentation block)
    record the row operations. Pivot rows end up on top, in column order.

    Returns
    -------
    list of int
        Pivot column of each of the leading ``len(pivots)`` rows.
    """
    nrows = mat.shape[0]
    pivots = []
    row = 0
    for col in range(ncols):
        if row == nrows:
            break
        word, bit = divmod(col, 64)
        bit = _ONE << np.uint64(bit)
        hits = np.flatnonzero(mat[row:, word] & bit)
        if hits.size == 0:
            continue
        p = row + int(hits[0])
        if p != row:
            mat[[row, p]] = mat[[p, row]]
        mask = (mat[:, word] & bit) != 0
        mask[row] = False
        if mask.any():
            mat[mask, word:] ^= mat[row, word:]
        pivots.append(col)
        row += 1
    return pivots


def sym_inner(ax, az, bx, bz):
    """Symplectic form between every row of ``(ax|az)`` and every row of ``(bx|bz)``.

    Returns a ``uint8`` matrix with entry ``popcount(ax_i & bz_j) + popcount(az_i & bx_j)`` mod 2.
    """
    ax = np.asarray(ax, dtype=np.uint64)
    az = np.asarray(az, dtype=np.uint64)
    bx = np.asarray(bx, dtype=np.uint64)
    bz = np.asarray(bz, dtype=np.uint64)
    counts = np.bitwise_count(ax[:, None, :] & bz[None, :, :]).sum(axis=2, dtype=np.int64)
    counts += np.bitwise_count(az[:, None, :] & bx[None, :, :]).sum(axis=2, dtype=np.int64)
    return (counts & 1).astype(np.uint8)
