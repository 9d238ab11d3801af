import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subfactorlab import gf2

BACKENDS = ["python"] + (["cython"] if gf2.BACKEND == "cython" else [])


def bool_matrices(max_rows=10, max_cols=80):
    shape = st.tuples(st.integers(1, max_rows), st.integers(1, max_cols))
    return shape.flatmap(lambda s: arrays(bool, s))


def span_size(bits):
    """Size of the row span by brute-force enumeration of all combinations."""
    rows = [int("".join("1" if b else "0" for b in r) or "0", 2) for r in bits]
    span = {0}
    for r in rows:
        span |= {v ^ r for v in span}
    return len(span)


def test_compiled_backend_is_available():
    # the extension is built by the editable install; the fallback is still exercised below
    assert gf2.BACKEND in ("cython", "python")


@given(bool_matrices())
def test_pack_roundtrip(bits):
    assert np.array_equal(gf2.unpack(gf2.pack(bits), bits.shape[1]), bits)


@pytest.mark.parametrize("backend", BACKENDS)
@given(bits=bool_matrices(8, 70))
def test_rank_matches_span_enumeration(backend, bits):
    reduced, pivots = gf2.rref(bits, backend=backend)
    assert 2 ** len(pivots) == span_size(bits)
    # pivot columns form an identity sub-matrix
    for row, col in enumerate(pivots):
        assert reduced[row, col]
        assert reduced[:, col].sum() == 1
    assert not reduced[len(pivots):].any()


@given(bits=bool_matrices(8, 130))
def test_backends_agree_on_rref(bits):
    if gf2.BACKEND != "cython":
        pytest.skip("compiled kernels not built")
    a = gf2.rref(bits, backend="python")
    b = gf2.rref(bits, backend="cython")
    assert a[1] == b[1]
    assert np.array_equal(a[0], b[0])


@pytest.mark.parametrize("backend", BACKENDS)
@given(bits=bool_matrices(9, 40))
def test_left_nullspace(backend, bits):
    null = gf2.left_nullspace(bits, backend=backend)
    assert null.shape[0] == bits.shape[0] - gf2.rank(bits)
    prod = (null.astype(int) @ bits.astype(int)) % 2
    assert not prod.any()
    if len(null):
        assert gf2.rank(null) == len(null)


@given(bits=bool_matrices(6, 20), data=st.data())
def test_solve_left(bits, data):
    combo = np.array(data.draw(st.lists(st.booleans(), min_size=bits.shape[0], max_size=bits.shape[0])))
    target = (combo.astype(int) @ bits.astype(int)) % 2
    found = gf2.solve_left(bits, target.astype(bool))
    assert found is not None
    assert np.array_equal((found.astype(int) @ bits.astype(int)) % 2, target)


def test_solve_left_outside_span():
    bits = np.array([[1, 0, 0], [0, 1, 0]], dtype=bool)
    assert gf2.solve_left(bits, np.array([0, 0, 1], dtype=bool)) is None


@pytest.mark.parametrize("backend", BACKENDS)
@given(data=st.data())
def test_sym_inner_against_direct_sum(backend, data):
    m = data.draw(st.integers(1, 90))
    ra, rb = data.draw(st.integers(1, 5)), data.draw(st.integers(1, 5))
    ax, az = data.draw(arrays(bool, (ra, m))), data.draw(arrays(bool, (ra, m)))
    bx, bz = data.draw(arrays(bool, (rb, m))), data.draw(arrays(bool, (rb, m)))
    got = gf2.sym_inner(ax, az, bx, bz, backend=backend)
    for i, j in itertools.product(range(ra), range(rb)):
        expect = (np.sum(ax[i] & bz[j]) + np.sum(az[i] & bx[j])) % 2
        assert got[i, j] == bool(expect)


def test_unknown_backend():
    with pytest.raises(ValueError):
        gf2.kernels("fortran")
