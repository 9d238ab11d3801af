"""Pauli strings, stabilizer groups and their uniform ("coset") mixtures.

A :class:`PauliString` on sites ``s_0, ..., s_{m-1}`` is ``i**phase X^x Z^z``
where bit ``t`` of the integer masks ``x`` and ``z`` refers to site ``s_t``.
With this convention ``X Z = -i Y``, so a site with both bits set and phase 1
carries a ``Y``.  Dense matrices use the tensor order ``s_0 (x) s_1 (x) ...``,
i.e. site ``s_0`` is the most significant bit of the basis index.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import gf2

DENSE_CAP = 12
DENSE_MAX = 14

_SINGLE = {"I": (0, 0, 0), "X": (1, 0, 0), "Z": (0, 1, 0), "Y": (1, 1, 1)}
_PHASES = (1, 1j, -1, -1j)


def _popcount(v):
    return int(v).bit_count()


def _bits(mask, m):
    return np.array([(mask >> t) & 1 for t in range(m)], dtype=bool)


def _reverse(mask, m):
    out = 0
    for t in range(m):
        if (mask >> t) & 1:
            out |= 1 << (m - 1 - t)
    return out


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-site Paulis."""

    sites: tuple
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "phase", int(self.phase) % 4)
        limit = 1 << len(self.sites)
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("masks exceed the number of sites")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("sites must be distinct")

    @classmethod
    def identity(cls, sites):
        return cls(tuple(sites))

    @classmethod
    def from_label(cls, label, sites=None, sign=1):
        """Build from a string such as ``"XIZY"``; ``sign`` is ``1`` or ``-1``."""
        sites = tuple(range(len(label))) if sites is None else tuple(sites)
        if len(sites) != len(label):
            raise ValueError("label length differs from the number of sites")
        x = z = phase = 0
        for t, ch in enumerate(label.upper()):
            if ch not in _SINGLE:
                raise ValueError(f"unknown Pauli letter {ch!r}")
            bx, bz, ph = _SINGLE[ch]
            x |= bx << t
            z |= bz << t
            phase += ph
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return cls(sites, x, z, phase + (0 if sign == 1 else 2))

    @classmethod
    def on(cls, sites, letters):
        """Product of single-site Paulis given as ``{site: letter}``."""
        sites = tuple(sites)
        index = {s: t for t, s in enumerate(sites)}
        label = ["I"] * len(sites)
        for s, ch in letters.items():
            label[index[s]] = ch
        return cls.from_label("".join(label), sites)

    @property
    def num_sites(self):
        return len(self.sites)

    @property
    def support(self):
        return tuple(s for t, s in enumerate(self.sites) if ((self.x | self.z) >> t) & 1)

    @property
    def weight(self):
        return _popcount(self.x | self.z)

    def label(self):
        letters = []
        for t in range(self.num_sites):
            letters.append("IXZY"[((self.x >> t) & 1) + 2 * ((self.z >> t) & 1)])
        return "".join(letters)

    @property
    def hermitian_phase(self):
        """Phase relative to the Hermitian ``X/Y/Z`` product, in ``{0, 1, 2, 3}``."""
        return (self.phase - _popcount(self.x & self.z)) % 4

    def is_hermitian(self):
        return self.hermitian_phase % 2 == 0

    @property
    def sign(self):
        """``+1`` or ``-1`` for Hermitian strings."""
        if not self.is_hermitian():
            raise ValueError("sign is only defined for Hermitian strings")
        return 1 if self.hermitian_phase == 0 else -1

    @property
    def scalar(self):
        return _PHASES[self.phase]

    def is_identity(self):
        return self.x == 0 and self.z == 0

    def __neg__(self):
        return PauliString(self.sites, self.x, self.z, self.phase + 2)

    def __mul__(self, other):
        return multiply(self, other)

    def symplectic(self):
        """Boolean vector ``(x bits, z bits)``."""
        m = self.num_sites
        return np.concatenate([_bits(self.x, m), _bits(self.z, m)])

    def conjugate_by(self, other):
        """``other * self * other^dagger`` for a Hermitian Pauli ``other``."""
        return self if commutes(self, other) else -self

    def dense(self):
        """Dense ``2^m x 2^m`` matrix; real when the phase is real."""
        m = self.num_sites
        if m > DENSE_MAX:
            raise ValueError(f"{m} sites exceed the dense cap {DENSE_MAX}")
        dim = 1 << m
        perm, coef = self._action()
        mat = np.zeros((dim, dim), dtype=coef.dtype)
        mat[perm, np.arange(dim)] = coef
        return mat

    def _action(self):
        """``P|k> = coef[k] |perm[k]>`` on the dense basis."""
        m = self.num_sites
        ks = np.arange(1 << m, dtype=np.int64)
        xd = _reverse(self.x, m)
        zd = _reverse(self.z, m)
        parity = np.bitwise_count(ks & zd) & 1
        coef = 1.0 - 2.0 * parity
        if self.phase % 2:
            coef = coef * _PHASES[self.phase]
        elif self.phase == 2:
            coef = -coef
        return ks ^ xd, coef

    def apply_left(self, mat):
        """``P @ mat`` in ``O(dim^2)`` through a row permutation."""
        perm, coef = self._action()
        return (coef[:, None] * mat)[perm]

    def apply_right(self, mat):
        """``mat @ P``."""
        perm, coef = self._action()
        return mat[:, perm] * coef[None, :]

    def restrict(self, sites):
        """Same operator on a site subset containing its support."""
        index = {s: t for t, s in enumerate(self.sites)}
        x = z = 0
        for new, s in enumerate(sites):
            t = index[s]
            x |= ((self.x >> t) & 1) << new
            z |= ((self.z >> t) & 1) << new
        out = PauliString(tuple(sites), x, z, self.phase)
        if out.weight != self.weight:
            raise ValueError("support is not contained in the requested sites")
        return out

    def extend(self, sites):
        """Same operator on a site superset."""
        index = {s: t for t, s in enumerate(sites)}
        x = z = 0
        for t, s in enumerate(self.sites):
            x |= ((self.x >> t) & 1) << index[s]
            z |= ((self.z >> t) & 1) << index[s]
        return PauliString(tuple(sites), x, z, self.phase)


def _check_sites(p, q):
    if p.sites != q.sites:
        raise ValueError("Pauli strings act on different site sets")


def multiply(p, q):
    """Operator product ``p q`` with the phase tracked modulo 4."""
    _check_sites(p, q)
    return PauliString(p.sites, p.x ^ q.x, p.z ^ q.z,
                       p.phase + q.phase + 2 * _popcount(p.z & q.x))


def commutes(p, q):
    """True when the symplectic form of ``p`` and ``q`` vanishes."""
    _check_sites(p, q)
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) % 2 == 0


def product(paulis, sites):
    out = PauliString.identity(sites)
    for p in paulis:
        out = multiply(out, p)
    return out


class StabilizerGroup:
    """Abelian group generated by independent commuting Hermitian Pauli strings.

    Generators may carry a sign ``-1``; the identity ``-I`` is never an element.
    """

    def __init__(self, sites, generators=(), validate=True):
        self.sites = tuple(sites)
        gens = tuple(generators)
        for g in gens:
            if g.sites != self.sites:
                raise ValueError("generator acts on a different site set")
        self.generators = gens
        if validate:
            self._validate()

    def _validate(self):
        for g in self.generators:
            if not g.is_hermitian():
                raise ValueError(f"generator {g.label()} is not Hermitian")
            if g.is_identity():
                raise ValueError("the identity cannot be a generator")
        if not self.generators:
            return
        sym = self.symplectic_matrix()
        m = len(self.sites)
        inner = gf2.sym_inner(sym[:, :m], sym[:, m:], sym[:, :m], sym[:, m:])
        if inner.any():
            raise ValueError("generators do not commute")
        if gf2.rank(sym) != len(self.generators):
            raise ValueError("generators are not independent")

    def __len__(self):
        return len(self.generators)

    @property
    def order(self):
        return 1 << len(self.generators)

    def symplectic_matrix(self):
        m = len(self.sites)
        if not self.generators:
            return np.zeros((0, 2 * m), dtype=bool)
        return np.stack([g.symplectic() for g in self.generators])

    def element(self, combo):
        """Product of the generators selected by a boolean vector."""
        return product([g for g, c in zip(self.generators, combo) if c], self.sites)

    def elements(self):
        r = len(self.generators)
        for code in range(1 << r):
            yield self.element([(code >> i) & 1 for i in range(r)])

    def locate(self, pauli):
        """Return ``(sign, combo)`` with ``pauli == sign * element(combo)``, or ``None`` if outside."""
        if pauli.sites != self.sites:
            raise ValueError("Pauli string acts on a different site set")
        if not self.generators:
            return (pauli.sign, np.zeros(0, dtype=bool)) if pauli.is_identity() else None
        combo = gf2.solve_left(self.symplectic_matrix(), pauli.symplectic())
        if combo is None:
            return None
        elem = self.element(combo)
        return (1 if elem.phase == pauli.phase else -1), combo

    def contains(self, pauli, signed=True):
        hit = self.locate(pauli)
        if hit is None:
            return False
        return hit[0] == 1 or not signed

    def canonical(self):
        """Equivalent group whose generators follow the reduced row echelon form."""
        if not self.generators:
            return self
        r = len(self.generators)
        aug = np.concatenate([self.symplectic_matrix(), np.eye(r, dtype=bool)], axis=1)
        reduced, pivots = gf2.rref(aug, 2 * len(self.sites))
        gens = [self.element(reduced[i, 2 * len(self.sites):]) for i in range(len(pivots))]
        return StabilizerGroup(self.sites, gens, validate=False)

    def key(self):
        """Hashable description that identifies the signed group."""
        return self.sites, tuple((g.x, g.z, g.phase) for g in self.canonical().generators)

    def same_as(self, other):
        return self.key() == other.key()

    def is_subgroup_of(self, other, signed=True):
        return all(other.contains(g, signed) for g in self.generators)

    def centralizer(self, pauli):
        """Subgroup of elements commuting with ``pauli``."""
        keep, flip = [], []
        for g in self.generators:
            (keep if commutes(g, pauli) else flip).append(g)
        keep += [multiply(flip[0], g) for g in flip[1:]]
        return StabilizerGroup(self.sites, keep, validate=False)

    def extended(self, pauli):
        """Group generated by this one and ``pauli``; ``None`` if ``-I`` would appear."""
        hit = self.locate(pauli)
        if hit is None:
            return StabilizerGroup(self.sites, self.generators + (pauli,), validate=False)
        return self if hit[0] == 1 else None


def restrict_group(group, region):
    """Subgroup of elements supported inside ``region``, re-expressed on those sites.

    The elements supported in ``region`` are the products whose symplectic
    components on the complementary sites cancel, i.e. the left null space of
    the generator matrix restricted to outside columns.
    """
    region = tuple(region)
    inside = set(region)
    missing = inside.difference(group.sites)
    if missing:
        raise ValueError(f"region sites {sorted(missing)[:3]} are not in the group")
    m = len(group.sites)
    if not group.generators:
        return StabilizerGroup(region)
    outside = [t for t, s in enumerate(group.sites) if s not in inside]
    sym = group.symplectic_matrix()
    cols = outside + [t + m for t in outside]
    if cols:
        combos = gf2.left_nullspace(sym[:, cols])
    else:
        combos = np.eye(len(group.generators), dtype=bool)
    gens = [group.element(c).restrict(region) for c in combos]
    return StabilizerGroup(region, gens, validate=False)


@dataclass(frozen=True)
class CosetMixtureState:
    """``weight * 2^-m * sum_{h in group} h``, a multiple of a stabilizer-code projector.

    ``weight`` is the trace; zero weight encodes the zero operator.
    """

    group: StabilizerGroup
    weight: float = 1.0

    @property
    def sites(self):
        return self.group.sites

    @property
    def num_sites(self):
        return len(self.group.sites)

    @property
    def rank(self):
        """Rank of the support projection (as a float to allow many sites)."""
        return 2.0 ** (self.num_sites - len(self.group))

    @property
    def eigenvalue(self):
        """Value of the single nonzero eigenvalue."""
        return self.weight / self.rank

    def is_zero(self):
        return self.weight == 0

    def scaled(self, factor):
        return CosetMixtureState(self.group, self.weight * factor)

    def project(self, pauli, sign):
        """``P rho P`` with ``P = (I + sign * pauli) / 2``."""
        signed = pauli if sign == 1 else -pauli
        if self.is_zero():
            return self
        cent = self.group.centralizer(pauli)
        ext = cent.extended(signed)
        if ext is None:
            return CosetMixtureState(StabilizerGroup(self.sites), 0.0)
        factor = cent.order / ext.order
        return CosetMixtureState(ext, self.weight * factor)

    def entropy(self):
        """Von Neumann entropy of the (sub-)normalised state."""
        if self.is_zero():
            return 0.0
        return -self.weight * math.log(self.eigenvalue)


def rdm_dense(state, cap=DENSE_CAP):
    """Dense matrix of a coset mixture state.

    Built as ``weight * 2^-m * |H| * prod_i (I + h_i) / 2``, which expands to
    the group sum.  Real whenever every generator is real.
    """
    m = state.num_sites
    if cap > DENSE_MAX:
        raise ValueError(f"dense cap cannot exceed {DENSE_MAX}")
    if m > cap:
        raise ValueError(f"{m} sites exceed the dense cap {cap}")
    gens = state.group.generators
    real = all(g.phase % 2 == 0 for g in gens)
    dim = 1 << m
    mat = np.eye(dim, dtype=float if real else complex)
    for g in gens:
        mat = 0.5 * (mat + g.apply_left(mat))
    return mat * (state.weight * state.group.order / dim)


def coset_relative_entropy(a, b):
    """Relative entropy of two coset mixtures from group data alone.

    ``S(a, b) = w_a log(w_a / w_b) + w_a log(|H_a| / |H_b|)`` when the signed
    group of ``b`` is a subgroup of that of ``a`` (support of ``a`` inside
    support of ``b``), and ``inf`` otherwise.
    """
    if a.sites != b.sites:
        raise ValueError("states act on different site sets")
    if a.is_zero():
        return 0.0
    if b.is_zero() or not b.group.is_subgroup_of(a.group):
        return math.inf
    return a.weight * (math.log(a.weight / b.weight) + math.log(a.group.order / b.group.order))


def coset_sum(states):
    """Sum of coset mixtures that is again a coset mixture.

    Identical signed groups add their weights.  Afterwards, ``c`` equal-weight
    states sharing one unsigned group ``K`` whose sign characters are distinct
    and agree exactly on a subgroup ``L`` of index ``c`` sum to ``c * w`` times
    the mixture over ``L``: the remaining characters cancel.

    Raises
    ------
    ValueError
        If the sum does not have this form.
    """
    states = [s for s in states if not s.is_zero()]
    if not states:
        raise ValueError("cannot infer sites of an empty or all-zero sum")
    merged = {}
    for s in states:
        key = s.group.key()
        if key in merged:
            merged[key] = CosetMixtureState(merged[key].group, merged[key].weight + s.weight)
        else:
            merged[key] = s
    states = list(merged.values())
    if len(states) == 1:
        return states[0]
    weights = np.array([s.weight for s in states])
    if not np.allclose(weights, weights[0], rtol=1e-12, atol=0):
        raise ValueError("coset sum with unequal weights is not a coset mixture")
    basis = states[0].group.canonical().generators
    sites = states[0].sites
    signs = []
    for s in states:
        if len(s.group) != len(basis):
            raise ValueError("coset sum over groups of different size")
        row = []
        for g in basis:
            hit = s.group.locate(g)
            if hit is None:
                raise ValueError("coset sum over different unsigned groups")
            row.append(hit[0] == -1)
        signs.append(row)
    signs = np.array(signs, dtype=bool)
    diffs = signs[1:] ^ signs[0]
    rank = gf2.rank(diffs) if len(basis) else 0
    if len(states) != 1 << rank:
        raise ValueError("characters do not cover a full coset; the sum is not a coset mixture")
    if len(basis):
        kernel = gf2.left_nullspace(diffs.T)
    else:
        kernel = np.zeros((0, 0), dtype=bool)
    sub = StabilizerGroup(sites, [product([g for g, c in zip(basis, alpha) if c], sites)
                                  for alpha in kernel], validate=False)
    return CosetMixtureState(sub, len(states) * weights[0])


def coset_orthogonal(a, b):
    """Whether two coset mixtures have orthogonal supports.

    ``Tr(P_a P_b)`` is proportional to the sum of ``chi_a(u) chi_b(u)`` over the
    common (unsigned) elements ``u``, so the supports are orthogonal exactly
    when the two sign characters disagree somewhere on the intersection.
    """
    if a.sites != b.sites:
        raise ValueError("states act on different site sets")
    if a.is_zero() or b.is_zero():
        return True
    ga, gb = a.group, b.group
    if not ga.generators or not gb.generators:
        return False
    stacked = np.concatenate([ga.symplectic_matrix(), gb.symplectic_matrix()])
    ra = len(ga.generators)
    for combo in gf2.left_nullspace(stacked):
        if ga.element(combo[:ra]).phase != gb.element(combo[ra:]).phase:
            return True
    return False
