"""Direct sums of matrix blocks, conditional expectations onto diagonally embedded copies,
Pimsner-Popa estimates and entropic disturbance.

Every inclusion handled here has the same shape: the ambient algebra is
``k`` copies of ``M_n`` and the subalgebra is ``q`` copies of ``M_n``, the
``j``-th ambient block carrying sub-block ``labels[j]``.  A conditional
expectation is then fixed by positive weights ``w_j`` summing to one inside
each label group, ``E(x)_q = sum_{labels[j] == q} w_j x_j``.
"""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np
import scipy.linalg

from . import linalg

INVARIANCE_TOL = 1e-8
_SMALL_BLOCK = 32


@dataclass(frozen=True)
class BlockAlgebra:
    """``M_{n_1} + ... + M_{n_k}`` given by its block sizes."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks or any(b < 1 for b in blocks):
            raise ValueError("a block algebra needs at least one block, each of size >= 1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self):
        """Size of the block-diagonal matrices representing the algebra."""
        return sum(self.blocks)

    @property
    def offsets(self):
        return tuple(itertools.accumulate((0,) + self.blocks[:-1]))

    def __len__(self):
        return len(self.blocks)


class BlockElement:
    """An element of a :class:`BlockAlgebra`, stored block by block.

    Parts are kept by reference, so large states can share blocks.
    """

    __slots__ = ("algebra", "parts")

    def __init__(self, algebra, parts):
        parts = tuple(np.asarray(p) for p in parts)
        if len(parts) != len(algebra.blocks):
            raise ValueError(f"expected {len(algebra.blocks)} parts, got {len(parts)}")
        for p, n in zip(parts, algebra.blocks):
            if p.shape != (n, n):
                raise ValueError(f"part of shape {p.shape} does not fit block size {n}")
        self.algebra = algebra
        self.parts = parts

    @classmethod
    def zeros(cls, algebra, dtype=float):
        return cls(algebra, [np.zeros((n, n), dtype=dtype) for n in algebra.blocks])

    @classmethod
    def identity(cls, algebra):
        return cls(algebra, [np.eye(n) for n in algebra.blocks])

    @classmethod
    def from_dense(cls, algebra, mat, tol=1e-12):
        """Cut a block-diagonal matrix into parts; off-block entries must vanish."""
        mat = np.asarray(mat)
        if mat.shape != (algebra.dim, algebra.dim):
            raise ValueError("matrix size does not match the algebra")
        parts = []
        mask = np.ones(mat.shape, dtype=bool)
        for off, n in zip(algebra.offsets, algebra.blocks):
            parts.append(mat[off:off + n, off:off + n].copy())
            mask[off:off + n, off:off + n] = False
        scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
        if np.any(np.abs(mat[mask]) > tol * scale):
            raise ValueError("matrix has entries outside the diagonal blocks")
        return cls(algebra, parts)

    def to_dense(self):
        dtype = np.result_type(*self.parts)
        out = np.zeros((self.algebra.dim, self.algebra.dim), dtype=dtype)
        for off, n, p in zip(self.algebra.offsets, self.algebra.blocks, self.parts):
            out[off:off + n, off:off + n] = p
        return out

    def _check(self, other):
        if not isinstance(other, BlockElement) or other.algebra != self.algebra:
            raise ValueError("operands live in different algebras")

    def __add__(self, other):
        self._check(other)
        return BlockElement(self.algebra, [a + b for a, b in zip(self.parts, other.parts)])

    def __sub__(self, other):
        self._check(other)
        return BlockElement(self.algebra, [a - b for a, b in zip(self.parts, other.parts)])

    def __neg__(self):
        return BlockElement(self.algebra, [-a for a in self.parts])

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return BlockElement(self.algebra, [scalar * a for a in self.parts])

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __matmul__(self, other):
        self._check(other)
        return BlockElement(self.algebra, [a @ b for a, b in zip(self.parts, other.parts)])

    def adjoint(self):
        return BlockElement(self.algebra, [a.conj().T for a in self.parts])

    def trace(self):
        return sum(complex(np.trace(p)) for p in self.parts)

    def norm(self):
        """Frobenius norm."""
        return math.sqrt(sum(float(np.vdot(p, p).real) for p in self.parts))

    def op_norm(self):
        return max(float(np.linalg.norm(p, 2)) if p.size else 0.0 for p in self.parts)

    def min_eigenvalue(self):
        return min(float(linalg.eigvals_hermitian(p)[0]) for p in self.parts)

    def __repr__(self):
        return f"BlockElement(blocks={self.algebra.blocks})"


def _stack(elem):
    return np.stack(elem.parts)


class ConditionalExpectation:
    """Weighted block average onto a diagonally embedded subalgebra.

    Parameters
    ----------
    block_dim : int
        Common size ``n`` of all blocks.
    labels : sequence of int
        ``labels[j]`` is the sub-block carried by ambient block ``j``.
        Labels must be ``0..q-1`` with every value used.
    weights : sequence of float
        Positive, summing to one within each label group.
    """

    def __init__(self, block_dim, labels, weights):
        block_dim = int(block_dim)
        labels = tuple(int(x) for x in labels)
        weights = np.asarray(weights, dtype=float)
        if block_dim < 1 or not labels:
            raise ValueError("need block_dim >= 1 and at least one ambient block")
        nsub = max(labels) + 1
        if sorted(set(labels)) != list(range(nsub)):
            raise ValueError("labels must use every value 0..q-1")
        if weights.shape != (len(labels),) or np.any(weights <= 0):
            raise ValueError("weights must be positive, one per ambient block")
        for q in range(nsub):
            total = weights[[j for j, l in enumerate(labels) if l == q]].sum()
            if abs(total - 1) > 1e-12:
                raise ValueError(f"weights of label {q} sum to {total}, not 1")
        self.block_dim = block_dim
        self.labels = labels
        self.weights = weights
        self.sub = BlockAlgebra((block_dim,) * nsub)
        self.ambient = BlockAlgebra((block_dim,) * len(labels))
        self._groups = [np.array([j for j, l in enumerate(labels) if l == q]) for q in range(nsub)]

    def __repr__(self):
        return (f"ConditionalExpectation(block_dim={self.block_dim}, "
                f"labels={self.labels}, weights={self.weights.tolist()})")

    @property
    def groups(self):
        return self._groups

    def embed(self, a):
        """Diagonal embedding of a sub-element into the ambient algebra."""
        if a.algebra != self.sub:
            raise ValueError("element does not belong to the subalgebra")
        return BlockElement(self.ambient, [a.parts[l] for l in self.labels])

    def apply(self, x):
        if x.algebra != self.ambient:
            raise ValueError("element does not belong to the ambient algebra")
        return BlockElement(self.sub, [
            sum(self.weights[j] * x.parts[j] for j in group) for group in self._groups
        ])

    def restrict_state(self, phi):
        """Density on the subalgebra with ``Tr(restrict(phi) a) = Tr(phi embed(a))``."""
        if phi.algebra != self.ambient:
            raise ValueError("state does not belong to the ambient algebra")
        return BlockElement(self.sub, [
            _block_sum([phi.parts[j] for j in group]) for group in self._groups
        ])

    def dual(self, phi):
        """Density of the composed state ``phi o E`` on the ambient algebra."""
        restricted = self.restrict_state(phi)
        return BlockElement(self.ambient, [
            self.weights[j] * restricted.parts[l] for j, l in enumerate(self.labels)
        ])

    @property
    def lambda_exact(self):
        """Optimal Pimsner-Popa constant, the smallest weight."""
        return float(self.weights.min())

    @property
    def index_exact(self):
        return 1.0 / self.lambda_exact

    def is_identity(self):
        return len(set(self.labels)) == len(self.labels)


def _block_sum(parts):
    if len(parts) == 1:
        return parts[0]
    total = parts[0] + parts[1]
    for p in parts[2:]:
        total = total + p
    return total


def block_average_expectation(k, n):
    """Uniform average of ``k`` copies of ``M_n`` onto one diagonal copy."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    return ConditionalExpectation(n, (0,) * k, np.full(k, 1.0 / k))


def identity_expectation(k, n):
    """Identity map on ``k`` copies of ``M_n``."""
    return ConditionalExpectation(n, tuple(range(k)), np.ones(k))


def tensor_power(expectation, power, max_dim=4096):
    """``E (x) E (x) ...`` on the tensor-power inclusion.

    Ambient blocks are indexed by tuples in row-major order and carry the
    product of the factor block sizes.

    Raises
    ------
    ValueError
        If the ambient matrix size would exceed ``max_dim``.
    """
    if power < 1:
        raise ValueError("power must be positive")
    if power == 1:
        return expectation
    k = len(expectation.labels)
    nsub = len(expectation.sub)
    n = expectation.block_dim ** power
    if k ** power * n > max_dim:
        raise ValueError(f"tensor power needs dimension {k ** power * n} > cap {max_dim}")
    labels, weights = [], []
    for combo in itertools.product(range(k), repeat=power):
        lab = 0
        for j in combo:
            lab = lab * nsub + expectation.labels[j]
        labels.append(lab)
        weights.append(math.prod(expectation.weights[j] for j in combo))
    return ConditionalExpectation(n, labels, weights)


def tensor_elements(a, b):
    """Tensor product of block elements, blocks ordered row-major in ``(i, j)``."""
    algebra = BlockAlgebra(tuple(m * n for m in a.algebra.blocks for n in b.algebra.blocks))
    return BlockElement(algebra, [np.kron(x, y) for x in a.parts for y in b.parts])


@dataclass
class Ensemble:
    """Weights and block-diagonal member densities on a common algebra."""

    weights: np.ndarray
    members: list

    def __post_init__(self):
        self.weights = linalg.check_weights(self.weights)
        if len(self.members) != len(self.weights):
            raise ValueError("one weight per member is required")
        algebra = self.members[0].algebra
        for m in self.members:
            if m.algebra != algebra:
                raise ValueError("members live on different algebras")
            tr = m.trace()
            if abs(tr - 1) > 1e-10:
                raise ValueError(f"member trace {tr.real:.12g} differs from one")

    @property
    def algebra(self):
        return self.members[0].algebra

    @property
    def barycenter(self):
        parts = []
        for j in range(len(self.algebra)):
            parts.append(sum(p * m.parts[j] for p, m in zip(self.weights, self.members)))
        return BlockElement(self.algebra, parts)

    def __len__(self):
        return len(self.members)


def tensor_ensembles(first, second):
    """Product ensemble with members ``phi_x (x) psi_y`` and weights ``p_x q_y``."""
    weights = np.outer(first.weights, second.weights).ravel()
    members = [tensor_elements(a, b) for a in first.members for b in second.members]
    return Ensemble(weights, members)


# ---------------------------------------------------------------- entropies


def block_relative_entropy(rho, sigma, tol=linalg.SUPPORT_TOL):
    """Sum of blockwise relative entropies of two block-diagonal (sub-)densities."""
    if rho.algebra != sigma.algebra:
        raise ValueError("states live on different algebras")
    blocks = rho.algebra.blocks
    if len(set(blocks)) == 1 and blocks[0] <= _SMALL_BLOCK:
        vals = linalg.batched_relative_entropy(_stack(rho), _stack(sigma), tol)
        return float(np.sum(vals))
    total = 0.0
    for r, s in zip(rho.parts, sigma.parts):
        if not np.any(r):
            continue
        total += linalg.relative_entropy(r, s, tol, validate=False)
        if math.isinf(total):
            return math.inf
    return total


def block_holevo_chi(weights, members, tol=linalg.SUPPORT_TOL):
    """Holevo quantity of block states, ``sum_x p_x S(phi_x, barycenter)``."""
    ens = Ensemble(weights, members)
    bary = ens.barycenter
    chi = 0.0
    for p, m in zip(ens.weights, ens.members):
        if p == 0:
            continue
        term = block_relative_entropy(m, bary, tol)
        if math.isinf(term):
            raise ArithmeticError("ensemble member escapes the barycenter support")
        chi += p * term
    return chi


@dataclass
class DisturbanceReport:
    """Ambient and restricted Holevo quantities of one ensemble.

    ``equivalent_form`` is ``sum_x p_x S(phi_x, phi_x o E)``, which equals
    ``disturbance`` whenever the barycenter is invariant.
    """

    chi_ambient: float
    chi_sub: float
    disturbance: float
    equivalent_form: float
    invariant_flag: bool
    bound: float


def _small_uniform(expectation):
    return expectation.block_dim <= _SMALL_BLOCK


def _stacked_disturbance(weights, stacks, expectation, tol):
    """Vectorised disturbance for members given as an array ``(r, k, n, n)``."""
    bary = np.einsum("x,xkab->kab", weights, stacks)
    sub = np.stack([stacks[:, g].sum(axis=1) for g in expectation.groups], axis=1)
    sub_bary = np.einsum("x,xkab->kab", weights, sub)
    amb = linalg.batched_relative_entropy(stacks, bary[None], tol).sum(axis=1)
    res = linalg.batched_relative_entropy(sub, sub_bary[None], tol).sum(axis=1)
    dual_stacks = np.stack([
        expectation.weights[j] * sub[:, l] for j, l in enumerate(expectation.labels)
    ], axis=1)
    equiv = linalg.batched_relative_entropy(stacks, dual_stacks, tol).sum(axis=1)
    live = weights > 0
    if np.any(np.isinf(amb[live])) or np.any(np.isinf(res[live])):
        raise ArithmeticError("ensemble member escapes the barycenter support")
    with np.errstate(invalid="ignore"):
        chi_amb = float(np.sum(weights[live] * amb[live]))
        chi_sub = float(np.sum(weights[live] * res[live]))
        eq = float(np.sum(weights[live] * equiv[live]))
    return chi_amb, chi_sub, eq, bary


def entropic_disturbance(ensemble, expectation, tol=linalg.SUPPORT_TOL):
    """Holevo quantity lost when an ensemble is restricted to the subalgebra.

    Parameters
    ----------
    ensemble : Ensemble
        Members on ``expectation.ambient``.
    expectation : ConditionalExpectation

    Returns
    -------
    DisturbanceReport
    """
    if ensemble.algebra != expectation.ambient:
        raise ValueError("ensemble does not live on the ambient algebra")
    weights = ensemble.weights
    if _small_uniform(expectation):
        stacks = np.stack([_stack(m) for m in ensemble.members])
        chi_amb, chi_sub, equiv, bary = _stacked_disturbance(weights, stacks, expectation, tol)
        bary = BlockElement(expectation.ambient, list(bary))
    else:
        bary = ensemble.barycenter
        chi_amb = block_holevo_chi(weights, ensemble.members, tol)
        chi_sub = block_holevo_chi(
            weights, [expectation.restrict_state(m) for m in ensemble.members], tol)
        equiv = 0.0
        for p, m in zip(weights, ensemble.members):
            if p > 0:
                equiv += p * block_relative_entropy(m, expectation.dual(m), tol)
    return DisturbanceReport(
        chi_ambient=chi_amb,
        chi_sub=chi_sub,
        disturbance=chi_amb - chi_sub,
        equivalent_form=equiv,
        invariant_flag=invariant_state_check(bary, expectation),
        bound=math.log(expectation.index_exact),
    )


def invariant_state_check(phi, expectation, tol=INVARIANCE_TOL):
    """Whether ``phi o E = phi``.

    Inside each label group this means the blocks are proportional to the
    weights, ``phi_j / w_j`` constant; for uniform weights all blocks agree.
    """
    w = expectation.weights
    for group in expectation.groups:
        ref = group[0]
        for j in group[1:]:
            diff = phi.parts[j] - (w[j] / w[ref]) * phi.parts[ref]
            if np.linalg.norm(diff) > tol:
                return False
    return True


def chain_rule_residual(omega, phi, expectation, tol=linalg.SUPPORT_TOL):
    """``|S(omega, phi) - S(omega|N, phi|N) - S(omega, omega o E)|`` for invariant ``phi``.

    Returns NaN when any of the three entropies is infinite, since the
    identity is then not comparable.

    Raises
    ------
    ValueError
        If ``phi`` is not invariant within the invariance tolerance.
    """
    if not invariant_state_check(phi, expectation):
        raise ValueError("phi is not invariant under the expectation")
    full = block_relative_entropy(omega, phi, tol)
    restricted = block_relative_entropy(
        expectation.restrict_state(omega), expectation.restrict_state(phi), tol)
    lost = block_relative_entropy(omega, expectation.dual(omega), tol)
    if any(math.isinf(v) for v in (full, restricted, lost)):
        return math.nan
    return abs(full - restricted - lost)


def quantum_privacy(ensemble, bob, eve, tol=linalg.SUPPORT_TOL):
    """``chi`` seen through Bob's subalgebra minus ``chi`` seen through Eve's.

    Both expectations must share the ambient algebra and Eve's subalgebra
    must sit inside Bob's: ambient blocks that Bob identifies, Eve identifies too.
    """
    if bob.ambient != eve.ambient or ensemble.algebra != bob.ambient:
        raise ValueError("Bob, Eve and the ensemble must share the ambient algebra")
    for i, j in itertools.combinations(range(len(bob.labels)), 2):
        if bob.labels[i] == bob.labels[j] and eve.labels[i] != eve.labels[j]:
            raise ValueError("Eve's subalgebra is not contained in Bob's")
    w = ensemble.weights
    chi_bob = block_holevo_chi(w, [bob.restrict_state(m) for m in ensemble.members], tol)
    chi_eve = block_holevo_chi(w, [eve.restrict_state(m) for m in ensemble.members], tol)
    return chi_bob - chi_eve


# ---------------------------------------------------------- random sampling


def random_psd_factor(rng, n, rank=None, complex_entries=True):
    """Gaussian ``n x rank`` factor ``G``; ``G G^*`` is a random PSD matrix."""
    rank = int(rng.integers(1, n + 1)) if rank is None else rank
    g = rng.standard_normal((n, rank))
    if complex_entries:
        g = g + 1j * rng.standard_normal((n, rank))
    return g


def random_element(rng, algebra, hermitian=False):
    parts = []
    for n in algebra.blocks:
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        parts.append((a + a.conj().T) / 2 if hermitian else a)
    return BlockElement(algebra, parts)


def random_state(rng, algebra, mask=None, max_rank=None):
    """Random block density; ``mask`` selects the nonzero blocks (default: random non-empty subset)."""
    k = len(algebra)
    if mask is None:
        mask = rng.random(k) < 0.5
        if not mask.any():
            mask[rng.integers(k)] = True
    parts = []
    for n, on in zip(algebra.blocks, mask):
        if on:
            rank = int(rng.integers(1, (max_rank or n) + 1))
            g = random_psd_factor(rng, n, min(rank, n))
            parts.append(g @ g.conj().T)
        else:
            parts.append(np.zeros((n, n), dtype=complex))
    elem = BlockElement(algebra, parts)
    return elem / elem.trace().real


def _pinv_sqrt(mat, tol=1e-12):
    evals, vecs = np.linalg.eigh(mat)
    keep = evals > tol * max(evals[-1], 0.0)
    v = vecs[:, keep]
    return v / np.sqrt(evals[keep]), v


def _top_gram_eigenvalue(m):
    """Largest eigenvalue of ``m^* m`` from whichever Gram side is smaller."""
    if not m.size:
        return 0.0
    gram = m.conj().T @ m if m.shape[1] <= m.shape[0] else m @ m.conj().T
    return float(np.linalg.eigvalsh(gram)[-1])


def _ratio_solver(big):
    """Return ``factor -> mu``, the largest ``mu`` with ``factor factor^* <= mu * big``.

    A positive definite ``big`` is factored once by Cholesky; otherwise its
    support is used and factors leaking out of it give ``inf``.
    """
    try:
        chol = np.linalg.cholesky(big)
    except np.linalg.LinAlgError:
        chol = None
    if chol is not None:
        pivots = np.abs(np.diag(chol)) ** 2
        if pivots.min() > 1e-10 * pivots.max():
            return lambda factor: _top_gram_eigenvalue(scipy.linalg.solve_triangular(chol, factor, lower=True))
    inv_sqrt, basis = _pinv_sqrt(big)

    def solve(factor):
        outside = factor - basis @ (basis.conj().T @ factor)
        scale = max(float(np.linalg.norm(factor)), 1e-300)
        if np.linalg.norm(outside) > 1e-9 * scale:
            return math.inf
        return _top_gram_eigenvalue(inv_sqrt.conj().T @ factor)

    return solve


def _largest_ratio(factor, big):
    """Largest ``mu`` with ``factor factor^* <= mu * big``; ``inf`` if ranges are incompatible."""
    return _ratio_solver(big)(factor)


def _factor(mat, tol=1e-12):
    evals, vecs = np.linalg.eigh(mat)
    keep = evals > tol * max(evals[-1], 0.0)
    return vecs[:, keep] * np.sqrt(evals[keep])


def state_invariance_margin(phi, expectation):
    """Largest ``t`` with ``phi o E >= t * phi``."""
    dual = expectation.dual(phi)
    t = math.inf
    for part, d in zip(phi.parts, dual.parts):
        if not np.any(part):
            continue
        mu = _largest_ratio(_factor(part), d)
        t = min(t, 0.0 if math.isinf(mu) else 1.0 / mu)
    return t


def _completion(expectation, phi, t, tol=1e-12):
    """Normalised ``(phi o E - t phi) / (1 - t)``.

    Cancellation leaves round-off in blocks that should vanish; eigenvalues
    below ``tol`` times the largest one (over all blocks) are dropped so
    those blocks are exactly zero.
    """
    tau = (expectation.dual(phi) - t * phi) / (1 - t)
    spectra = [np.linalg.eigh((a + a.conj().T) / 2) for a in tau.parts]
    top = max(float(ev[-1]) for ev, _ in spectra)
    parts = []
    for ev, vecs in spectra:
        keep = ev > tol * top
        v = vecs[:, keep]
        parts.append((v * ev[keep]) @ v.conj().T)
    tau = BlockElement(tau.algebra, parts)
    return tau / tau.trace().real


def random_invariant_ensemble(expectation, rng, max_members=4, max_rank=None):
    """Random ensemble whose barycenter is invariant under ``expectation``.

    Random members ``psi_x`` with weights ``p_x`` and barycenter ``phi`` are
    completed by one extra member ``tau = (phi o E - t phi) / (1 - t)`` of weight
    ``1 - t``, where ``0 < t <= lambda(phi)`` keeps ``tau`` positive.
    """
    r = int(rng.integers(1, max_members + 1))
    members = [random_state(rng, expectation.ambient, max_rank=max_rank) for _ in range(r)]
    p = rng.dirichlet(np.ones(r))
    phi = Ensemble(p, members).barycenter
    if invariant_state_check(phi, expectation):
        return Ensemble(p, members)
    t = rng.uniform(0.05, 1.0) * min(state_invariance_margin(phi, expectation), 1.0)
    tau = _completion(expectation, phi, t)
    return Ensemble(np.append(t * p, 1 - t), members + [tau])


# ------------------------------------------------------------- index checks


def verify_bimodule(expectation, trials=100, seed=0):
    """Largest Frobenius residual of ``E(a x c) - a E(x) c`` over seeded samples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = random_element(rng, expectation.sub)
        c = random_element(rng, expectation.sub)
        x = random_element(rng, expectation.ambient)
        lhs = expectation.apply(expectation.embed(a) @ x @ expectation.embed(c))
        rhs = a @ expectation.apply(x) @ c
        worst = max(worst, (lhs - rhs).norm())
    return worst


def check_expectation(expectation, trials=20, seed=0):
    """Spot-check unitality, positivity, idempotence and multiplicativity of the embedding.

    Returns
    -------
    dict
        Residual per property; ``positivity`` is the smallest eigenvalue of
        ``E(x)`` over sampled PSD ``x`` (should be ``>= -1e-10``).
    """
    rng = np.random.default_rng(seed)
    emb, app = expectation.embed, expectation.apply
    one = BlockElement.identity(expectation.sub)
    out = {
        "unital": (app(BlockElement.identity(expectation.ambient)) - one).norm(),
        "embed_unital": (emb(one) - BlockElement.identity(expectation.ambient)).norm(),
        "positivity": math.inf,
        "idempotent": 0.0,
        "embed_multiplicative": 0.0,
        "embed_adjoint": 0.0,
    }
    for _ in range(trials):
        a = random_element(rng, expectation.sub)
        b = random_element(rng, expectation.sub)
        x = random_element(rng, expectation.ambient)
        out["idempotent"] = max(out["idempotent"], (app(emb(app(x))) - app(x)).norm())
        out["embed_multiplicative"] = max(out["embed_multiplicative"],
                                          (emb(a @ b) - emb(a) @ emb(b)).norm())
        out["embed_adjoint"] = max(out["embed_adjoint"], (emb(a.adjoint()) - emb(a).adjoint()).norm())
        out["positivity"] = min(out["positivity"], app(x @ x.adjoint()).min_eigenvalue())
    return out


@dataclass
class PimsnerPopaEstimate:
    """Sampled Pimsner-Popa constant and the implied index."""

    lambda_hat: float
    index_hat: float
    samples: int
    seed: int
    lambdas: np.ndarray = field(repr=False, default=None)


def pimsner_popa_ratio(expectation, factors):
    """``lambda(x)`` for ``x`` given by per-block factors (``x_j = G_j G_j^*``, ``None`` for zero blocks).

    ``lambda(x)`` is the largest ``t`` with ``embed(E(x)) >= t x``: the smallest
    finite generalised eigenvalue of the pencil ``(embed(E(x)), x)``.
    """
    blocks = [None if g is None else g @ g.conj().T for g in factors]
    n = expectation.block_dim
    lam = math.inf
    for q, group in enumerate(expectation.groups):
        image = np.zeros((n, n), dtype=complex)
        for j in group:
            if blocks[j] is not None:
                image = image + expectation.weights[j] * blocks[j]
        solver = None
        for j in group:
            if factors[j] is None:
                continue
            solver = solver or _ratio_solver(image)
            mu = solver(factors[j])
            lam = min(lam, 0.0 if math.isinf(mu) else 1.0 / mu)
    return lam


def pimsner_popa_constant(expectation, trials=1000, seed=0, probes_per_block=2):
    """Estimate ``sup {t : E(x) >= t x for all x >= 0}`` by sampling.

    Samples are random low-rank PSD elements on random sets of blocks plus,
    for every ambient block, ``probes_per_block`` rank-one projections
    concentrated in that block (the extremal elements for block averages).

    Returns
    -------
    PimsnerPopaEstimate
        ``index_hat`` is ``inf`` when some sample has ``lambda(x) = 0``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    k, n = len(expectation.labels), expectation.block_dim
    lambdas = []
    for j in range(k):
        for _ in range(probes_per_block):
            v = random_psd_factor(rng, n, 1)
            v /= np.linalg.norm(v)
            factors = [None] * k
            factors[j] = v
            lambdas.append(pimsner_popa_ratio(expectation, factors))
    for _ in range(trials):
        mask = rng.random(k) < 0.6
        if not mask.any():
            mask[rng.integers(k)] = True
        factors = [random_psd_factor(rng, n) if on else None for on in mask]
        lambdas.append(pimsner_popa_ratio(expectation, factors))
    lambdas = np.array(lambdas)
    lam = float(lambdas.min())
    return PimsnerPopaEstimate(lam, math.inf if lam <= 0 else 1.0 / lam, len(lambdas), seed, lambdas)


def block_quasi_basis(expectation):
    """Quasi-basis ``u_j = w_j^{-1/2} 1_j`` solving ``sum_j u_j E(u_j^* x) = x``."""
    basis = []
    for j, w in enumerate(expectation.weights):
        parts = [np.zeros((expectation.block_dim,) * 2) for _ in expectation.labels]
        parts[j] = np.eye(expectation.block_dim) / math.sqrt(w)
        basis.append(BlockElement(expectation.ambient, parts))
    return basis


def quasi_basis_residuals(expectation, basis, samples=50, seed=0):
    """Residuals of the quasi-basis identities.

    Returns
    -------
    reconstruction : float
        Largest Frobenius error of ``sum_u u E(u^* x) - x`` over random ``x``.
    index_element : BlockElement
        ``sum_u u u^*``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = random_element(rng, expectation.ambient)
        rec = BlockElement.zeros(expectation.ambient, complex)
        for u in basis:
            rec = rec + u @ expectation.embed(expectation.apply(u.adjoint() @ x))
        worst = max(worst, (rec - x).norm())
    index = BlockElement.zeros(expectation.ambient)
    for u in basis:
        index = index + u @ u.adjoint()
    return worst, index


# ---------------------------------------------------------------- optimiser


@dataclass
class OptimizerConfig:
    """Settings for :func:`maximize_disturbance`.

    ``budget`` counts disturbance evaluations in the local search.  The search
    stops early once it is within ``target_gap`` of ``log(index)``.
    """

    seed: int = 0
    budget: int = 400
    restarts: int = 4
    max_members: int = 4
    step: float = 0.3
    target_gap: float = 1e-9


@dataclass
class OptimizerResult:
    best: float
    ensemble: Ensemble
    evaluations: int
    budget_exhausted: bool
    seed: int
    source: str


def block_basis_ensemble(expectation, state=None):
    """One member per ambient block, each the same density placed in that block.

    With weights ``w_j / q`` the barycenter is invariant and the disturbance
    equals ``(1/q) sum_j w_j log(1/w_j)``, which is ``log k`` for a uniform
    ``k``-block average.
    """
    n = expectation.block_dim
    state = np.eye(n) / n if state is None else np.asarray(state)
    nsub = len(expectation.sub)
    members = []
    for j in range(len(expectation.labels)):
        parts = [np.zeros((n, n), dtype=state.dtype) for _ in expectation.labels]
        parts[j] = state
        members.append(BlockElement(expectation.ambient, parts))
    return Ensemble(expectation.weights / nsub, members)


def _complete(expectation, base_parts, logits, shrink):
    """Invariant ensemble from unnormalised base factors, weight logits and a shrink factor."""
    members = []
    for factors in base_parts:
        parts = [g @ g.conj().T if g is not None else np.zeros((expectation.block_dim,) * 2, complex)
                 for g in factors]
        elem = BlockElement(expectation.ambient, parts)
        members.append(elem / elem.trace().real)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    phi = Ensemble(p, members).barycenter
    if invariant_state_check(phi, expectation):
        return Ensemble(p, members)
    t = shrink * min(state_invariance_margin(phi, expectation), 1.0)
    tau = _completion(expectation, phi, t)
    return Ensemble(np.append(t * p, 1 - t), members + [tau])


def maximize_disturbance(expectation, config=None):
    """Search for the largest entropic disturbance over invariant ensembles.

    The deterministic block-basis ensemble is evaluated first; a seeded
    random-restart hill climb over member factors, block supports, weights
    and the completion parameter follows.

    Returns
    -------
    OptimizerResult
        ``budget_exhausted`` is set when the search used its whole budget
        without getting within ``target_gap`` of ``log(index)``.
    """
    config = config or OptimizerConfig()
    rng = np.random.default_rng(config.seed)
    target = math.log(expectation.index_exact) - config.target_gap
    best_ens = block_basis_ensemble(expectation)
    best = entropic_disturbance(best_ens, expectation).disturbance
    source = "block-basis"
    evals = 0
    k, n = len(expectation.labels), expectation.block_dim

    def score(params):
        ens = _complete(expectation, *params)
        return entropic_disturbance(ens, expectation).disturbance, ens

    def fresh():
        r = int(rng.integers(1, config.max_members + 1))
        base = []
        for _ in range(r):
            mask = rng.random(k) < 0.5
            if not mask.any():
                mask[rng.integers(k)] = True
            base.append([random_psd_factor(rng, n) if on else None for on in mask])
        return base, rng.standard_normal(r), rng.uniform(0.5, 1.0)

    def perturb(params):
        base, logits, shrink = params
        new_base = []
        for factors in base:
            row = []
            for g in factors:
                flip = rng.random() < 0.05
                if g is None:
                    row.append(random_psd_factor(rng, n) if flip else None)
                elif flip:
                    row.append(None)
                else:
                    noise = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
                    row.append(g + config.step * noise)
            if all(g is None for g in row):
                row = factors
            new_base.append(row)
        logits = logits + config.step * rng.standard_normal(logits.shape)
        shrink = float(np.clip(shrink + config.step * rng.standard_normal() * 0.2, 1e-3, 1.0))
        return new_base, logits, shrink

    per_restart = max(1, config.budget // max(1, config.restarts))
    while evals < config.budget and best < target:
        params = fresh()
        current, ens = score(params)
        evals += 1
        for _ in range(per_restart - 1):
            if evals >= config.budget or best >= target:
                break
            trial = perturb(params)
            value, trial_ens = score(trial)
            evals += 1
            if value > current:
                params, current, ens = trial, value, trial_ens
        if current > best:
            best, best_ens, source = current, ens, "search"
    return OptimizerResult(best, best_ens, evals, best < target, config.seed, source)
