import math

import numpy as np
import pytest
import scipy.linalg
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from subfactorlab import linalg
from conftest import random_density


def oracle_relative_entropy(rho, sigma):
    """Full-rank reference through scipy's matrix logarithm."""
    return float(np.trace(rho @ (scipy.linalg.logm(rho) - scipy.linalg.logm(sigma))).real)


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)


@given(seeds, dims)
def test_relative_entropy_matches_logm(seed, n):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density(rng, n), random_density(rng, n)
    assert linalg.relative_entropy(rho, sigma) == pytest.approx(oracle_relative_entropy(rho, sigma),
                                                                abs=1e-8)


@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6), st.data())
def test_classical_relative_entropy(p, data):
    p = np.array(p) / sum(p)
    q = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=len(p), max_size=len(p))))
    q /= q.sum()
    expect = float(np.sum(p * np.log(p / q)))
    assert linalg.relative_entropy(np.diag(p), np.diag(q)) == pytest.approx(expect, abs=1e-12)


def test_equal_states_give_zero(rng):
    rho = random_density(rng, 5, 3)
    assert abs(linalg.relative_entropy(rho, rho)) < 1e-10


def test_support_violation_is_infinite():
    assert linalg.relative_entropy(np.diag([0.5, 0.5]), np.diag([1.0, 0.0])) == math.inf
    assert linalg.relative_entropy(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == math.inf


def test_support_inclusion_is_finite():
    # pure state inside the support of a rank-2 state: S = -log(1/2)
    assert linalg.relative_entropy(np.diag([1.0, 0, 0]), np.diag([0.5, 0.5, 0])) == pytest.approx(math.log(2))


def test_substates_allowed():
    rho = np.diag([0.25, 0.0])
    sigma = np.diag([0.5, 0.5])
    # 0.25 log(0.25 / 0.5)
    assert linalg.relative_entropy(rho, sigma) == pytest.approx(0.25 * math.log(0.5))


def test_zero_state():
    assert linalg.relative_entropy(np.zeros((2, 2)), np.diag([1.0, 0.0])) == 0.0


def test_rejects_invalid_input():
    with pytest.raises(ValueError):
        linalg.relative_entropy(np.array([[1.0, 1.0], [0.0, 0.0]]), np.eye(2) / 2)
    with pytest.raises(ValueError):
        linalg.relative_entropy(np.diag([1.5, -0.5]), np.eye(2) / 2)
    with pytest.raises(ValueError):
        linalg.relative_entropy(np.eye(2), np.eye(2) / 2)
    with pytest.raises(ValueError):
        linalg.relative_entropy(np.eye(2) / 2, np.eye(3) / 3)


@given(seeds, dims)
def test_klein_inequality(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, n, rank=int(rng.integers(1, n + 1)))
    sigma = random_density(rng, n)
    assert linalg.relative_entropy(rho, sigma) >= -1e-10


@given(seeds, dims)
def test_unitary_invariance(seed, n):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density(rng, n), random_density(rng, n)
    u = scipy.stats.unitary_group.rvs(n, random_state=rng) if n > 1 else np.array([[1j]])
    a = linalg.relative_entropy(rho, sigma)
    b = linalg.relative_entropy(u @ rho @ u.conj().T, u @ sigma @ u.conj().T)
    assert a == pytest.approx(b, abs=1e-9)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_data_processing_under_partial_trace(seed, da, db):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density(rng, da * db), random_density(rng, da * db)

    def ptrace(m):
        return np.trace(m.reshape(da, db, da, db), axis1=1, axis2=3)

    assert linalg.relative_entropy(ptrace(rho), ptrace(sigma)) <= linalg.relative_entropy(rho, sigma) + 1e-8


@given(seeds)
def test_additivity_under_tensor_products(seed):
    rng = np.random.default_rng(seed)
    r1, s1, r2, s2 = (random_density(rng, 2) for _ in range(4))
    joint = linalg.relative_entropy(np.kron(r1, r2), np.kron(s1, s2))
    assert joint == pytest.approx(linalg.relative_entropy(r1, s1) + linalg.relative_entropy(r2, s2), abs=1e-9)


def test_von_neumann_entropy():
    assert linalg.von_neumann_entropy(np.eye(4) / 4) == pytest.approx(math.log(4))
    assert linalg.von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0


def test_holevo_orthogonal_pure_states_gives_shannon():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    states = [np.diag(np.eye(4)[i]) for i in range(4)]
    assert linalg.holevo_chi(p, states) == pytest.approx(-np.sum(p * np.log(p)))


def test_holevo_four_state_ensemble_is_two_log_two():
    states = [np.diag(np.eye(4)[i]) for i in range(4)]
    assert linalg.holevo_chi([0.25] * 4, states) == pytest.approx(2 * math.log(2), abs=1e-12)


@given(seeds, st.integers(2, 5), st.integers(1, 4))
def test_holevo_equals_entropy_difference(seed, n, k):
    rng = np.random.default_rng(seed)
    states = [random_density(rng, n) for _ in range(k)]
    w = rng.random(k)
    w /= w.sum()
    bary = sum(p * s for p, s in zip(w, states))
    expect = linalg.von_neumann_entropy(bary) - sum(p * linalg.von_neumann_entropy(s) for p, s in zip(w, states))
    chi = linalg.holevo_chi(w, states)
    assert chi == pytest.approx(expect, abs=1e-9)
    assert -1e-10 <= chi <= math.log(n) + 1e-10


@given(seeds, st.integers(1, 4))
def test_batched_matches_scalar(seed, n):
    rng = np.random.default_rng(seed)
    rhos = np.stack([random_density(rng, n, rank=int(rng.integers(1, n + 1))) for _ in range(5)])
    sigmas = np.stack([random_density(rng, n, rank=int(rng.integers(1, n + 1))) for _ in range(5)])
    got = linalg.batched_relative_entropy(rhos, sigmas)
    for r, s, g in zip(rhos, sigmas, got):
        want = linalg.relative_entropy(r, s)
        if math.isinf(want):
            assert math.isinf(g)
        else:
            assert g == pytest.approx(want, abs=1e-8)


def test_cache_reuses_large_decompositions(rng):
    linalg.clear_cache()
    rho = random_density(rng, 130, complex_entries=False)
    first = linalg.eig_hermitian(rho)
    second = linalg.eig_hermitian(rho.copy())
    assert first.eigenvalues is second.eigenvalues
    linalg.clear_cache()
