"""Hermitian spectral helpers and entropy functionals (natural log units)."""
from collections import OrderedDict, namedtuple
import hashlib
import math

import numpy as np
import scipy.linalg

Spectrum = namedtuple("Spectrum", ["eigenvalues", "eigenvectors"])

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
SUPPORT_TOL = 1e-10

# matrices at least this large go through the content-addressed cache
_CACHE_MIN_DIM = 128
_CACHE_SIZE = 6


class _SpectralCache:
    """Tiny LRU keyed by a hash of the matrix bytes."""

    def __init__(self, size):
        self.size = size
        self._data = OrderedDict()

    @staticmethod
    def key(kind, mat):
        digest = hashlib.blake2b(np.ascontiguousarray(mat).view(np.uint8), digest_size=16)
        return (kind, mat.shape, mat.dtype.str, digest.hexdigest())

    def get(self, key):
        if key in self._data:
            self._data.move_to_end(key)
            return self._data[key]
        return None

    def put(self, key, value):
        self._data[key] = value
        self._data.move_to_end(key)
        while len(self._data) > self.size:
            self._data.popitem(last=False)

    def clear(self):
        self._data.clear()


_cache = _SpectralCache(_CACHE_SIZE)


def clear_cache():
    """Drop cached spectra (mainly for benchmarks and memory-bound runs)."""
    _cache.clear()


def _cached(kind, mat, compute):
    if mat.shape[0] < _CACHE_MIN_DIM:
        return compute()
    key = _SpectralCache.key(kind, mat)
    hit = _cache.get(key)
    if hit is None:
        hit = compute()
        _cache.put(key, hit)
    return hit


def check_hermitian(mat, tol=HERMITIAN_TOL):
    """Return ``mat`` as a square ndarray, raising if it is not Hermitian within ``tol``.

    The tolerance is relative to the largest entry magnitude.
    """
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(mat)) if mat.size else 0.0
    if scale > 0 and np.max(np.abs(mat - mat.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return mat


def eig_hermitian(mat, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues.

    Parameters
    ----------
    mat : array_like, shape (n, n)
    tol : float
        Hermiticity tolerance relative to the largest entry.

    Returns
    -------
    Spectrum
        ``eigenvalues`` ascending, ``eigenvectors`` as orthonormal columns.
    """
    mat = check_hermitian(mat, tol)
    return _cached("eigh", mat, lambda: Spectrum(*scipy.linalg.eigh(mat, check_finite=False)))


def eigvals_hermitian(mat):
    """Ascending eigenvalues only; cheaper than :func:`eig_hermitian` for large inputs."""
    mat = check_hermitian(mat)
    return _cached("eigvalsh", mat, lambda: scipy.linalg.eigvalsh(mat, check_finite=False))


def check_density(rho, substate=True, tol=PSD_TOL):
    """Validate a (sub-)density matrix and return its eigenvalues.

    Parameters
    ----------
    rho : array_like
    substate : bool
        Allow trace below one. Unit trace is enforced otherwise.
    tol : float
        Allowed negativity of eigenvalues and trace slack.
    """
    return _check_spectrum(eigvals_hermitian(rho), substate, tol)


def _check_spectrum(evals, substate=True, tol=PSD_TOL):
    if evals[0] < -tol * max(1.0, evals[-1]):
        raise ValueError(f"matrix has a negative eigenvalue {evals[0]:.3e}")
    tr = float(np.sum(evals))
    if substate:
        if tr > 1 + TRACE_TOL:
            raise ValueError(f"trace {tr} exceeds one")
    elif abs(tr - 1) > TRACE_TOL:
        raise ValueError(f"trace {tr} differs from one")
    return evals


def is_substate(rho):
    """True when ``rho`` is a valid density whose trace is strictly below one."""
    evals = check_density(rho)
    return float(np.sum(evals)) < 1 - TRACE_TOL


def _threshold(evals, tol):
    top = max(float(evals[-1]), 0.0) if len(evals) else 0.0
    return tol * top


def support_projection(rho, tol=SUPPORT_TOL):
    """Orthogonal projection onto eigenvectors with eigenvalue above ``tol`` times the largest.

    A zero matrix yields the zero projection.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    evals, vecs = eig_hermitian(rho)
    if evals[-1] <= 0:
        return np.zeros_like(vecs)
    keep = evals > _threshold(evals, tol)
    v = vecs[:, keep]
    return v @ v.conj().T


def _entropy_sum(evals, thr):
    pos = evals[evals > thr]
    return float(np.sum(pos * np.log(pos)))


def _log_on_support(sigma, tol):
    """``(log sigma on its support, support projection)``."""

    def compute():
        evals, vecs = eig_hermitian(sigma)
        if evals[-1] <= 0:
            zero = np.zeros_like(vecs)
            return zero, zero
        keep = evals > _threshold(evals, tol)
        v = vecs[:, keep]
        logs = np.log(evals[keep])
        return (v * logs) @ v.conj().T, v @ v.conj().T

    return _cached("logsupp", np.asarray(sigma), compute)


def relative_entropy(rho, sigma, tol=SUPPORT_TOL, validate=True):
    """Relative entropy ``Tr rho (log rho - log sigma)`` in nats.

    Sub-normalised arguments are accepted, so negative values are possible
    when ``Tr sigma > Tr rho``.

    Parameters
    ----------
    rho, sigma : array_like, shape (n, n)
        Positive semidefinite with trace at most one.
    tol : float
        Relative support cutoff.
    validate : bool
        Check positivity and trace of both arguments.

    Returns
    -------
    float
        ``math.inf`` when the support of ``rho`` is not inside that of ``sigma``.
    """
    rho = check_hermitian(rho)
    sigma = check_hermitian(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    if validate:
        rho_evals = check_density(rho)
        _check_spectrum(eig_hermitian(sigma).eigenvalues)
    else:
        rho_evals = eigvals_hermitian(rho)
    top = float(rho_evals[-1])
    if top <= 0:
        return 0.0
    log_sigma, proj = _log_on_support(sigma, tol)
    # trace norm of (I - P) rho (I - P), which is PSD
    leak = float(np.trace(rho).real - np.vdot(proj, rho).real)
    if leak > rho.shape[0] * tol * top:
        return math.inf
    cross = float(np.vdot(log_sigma, rho).real)
    return _entropy_sum(rho_evals, _threshold(rho_evals, tol)) - cross


def von_neumann_entropy(rho, tol=SUPPORT_TOL):
    """``-Tr rho log rho`` in nats with ``0 log 0 = 0``."""
    evals = check_density(rho)
    return 0.0 - _entropy_sum(evals, _threshold(evals, tol))


def holevo_chi(weights, states, tol=SUPPORT_TOL):
    """Holevo quantity ``sum_x p_x S(states[x], barycenter)``.

    Parameters
    ----------
    weights : sequence of float
        Non-negative, summing to one.
    states : sequence of array_like
        Density matrices of a common dimension.

    Raises
    ------
    ArithmeticError
        If a weighted member escapes the barycenter support, which only
        happens through numerical breakdown.
    """
    weights = check_weights(weights)
    if len(weights) != len(states):
        raise ValueError("weights and states differ in length")
    states = [np.asarray(s) for s in states]
    bary = sum(p * s for p, s in zip(weights, states))
    chi = 0.0
    for p, s in zip(weights, states):
        if p == 0:
            continue
        term = relative_entropy(s, bary, tol)
        if math.isinf(term):
            raise ArithmeticError("ensemble member escapes the barycenter support")
        chi += p * term
    return chi


def check_weights(weights, tol=TRACE_TOL):
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(weights < 0) or abs(weights.sum() - 1) > tol:
        raise ValueError("weights must be non-negative and sum to one")
    return weights


def batched_relative_entropy(rho, sigma, tol=SUPPORT_TOL):
    """Relative entropies of stacked small matrices, ``rho[..., n, n]`` against ``sigma[..., n, n]``.

    No validation is performed; intended for inner loops over many tiny blocks.
    Zero blocks of ``rho`` contribute zero.

    Returns
    -------
    ndarray
        Shape ``rho.shape[:-2]``, with ``inf`` where supports are incompatible.
    """
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    r_evals = np.linalg.eigvalsh(rho)
    s_evals, s_vecs = np.linalg.eigh(sigma)
    r_top = np.maximum(r_evals[..., -1], 0.0)
    s_top = np.maximum(s_evals[..., -1], 0.0)
    r_keep = r_evals > (tol * r_top)[..., None]
    s_keep = s_evals > (tol * s_top)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_log = np.where(r_keep, np.log(np.where(r_keep, r_evals, 1.0)), 0.0)
        s_log = np.where(s_keep, np.log(np.where(s_keep, s_evals, 1.0)), 0.0)
    self_term = np.sum(np.where(r_keep, r_evals, 0.0) * r_log, axis=-1)
    # diagonal of rho in the eigenbasis of sigma
    rotated = np.einsum("...ji,...jk,...ki->...i", s_vecs.conj(), rho, s_vecs).real
    cross = np.sum(rotated * s_log, axis=-1)
    leak = np.sum(np.where(s_keep, 0.0, rotated), axis=-1)
    n = rho.shape[-1]
    out = self_term - cross
    out = np.where(leak > n * tol * r_top, np.inf, out)
    return np.where(r_top > 0, out, 0.0)
