"""Four-block transporter algebra of the toric code and the ``2 log 2`` disturbance experiment.

The region algebra ``M_{2^m}`` sits diagonally in four blocks.  The charge
transporters act blockwise as ``s_X(b) F_X`` and ``s_Z(b) F_Z`` with block signs
``s_X = (+, -, +, -)`` and ``s_Z = (+, +, -, -)``, where ``F_X`` is a ``Z``
string along primal paths and ``F_Z`` an ``X`` string across dual paths.
"""
from dataclasses import asdict, dataclass
import math
import time

import numpy as np

from . import blockalg, lattice, linalg
from .pauli import (DENSE_CAP, CosetMixtureState, PauliString, StabilizerGroup, commutes, coset_orthogonal,
                    coset_relative_entropy, coset_sum, multiply, rdm_dense, restrict_group)

SIGN_X = (1, -1, 1, -1)
SIGN_Z = (1, 1, -1, -1)
SECTOR_KINDS = ("0", "X", "Y", "Z")
# member order (+,+), (-,+), (+,-), (-,-) follows the block signs
MEMBER_SIGNS = ((1, 1), (-1, 1), (1, -1), (-1, -1))
TWO_LOG_TWO = 2 * math.log(2)
QUANTUM_DIMENSION_SQ = 4
WATATANI_MAX_DIM = 256
INDEX_PROBE_DIM = 16


def block_signs(kind):
    """Per-block sign of the transporter ``kind`` in ``{"0", "X", "Y", "Z"}``."""
    if kind == "0":
        return (1, 1, 1, 1)
    if kind == "X":
        return SIGN_X
    if kind == "Z":
        return SIGN_Z
    if kind == "Y":
        return tuple(a * b for a, b in zip(SIGN_X, SIGN_Z))
    raise ValueError(f"unknown transporter kind {kind!r}")


def sign_coefficient(i, j, kind):
    """``V_k P_i Q_j = c P_i Q_j``: 1, ``i``, ``i*j``, ``j`` for ``k = 0, X, Y, Z``."""
    if i not in (1, -1) or j not in (1, -1):
        raise ValueError("i and j must be +1 or -1")
    return {"0": 1, "X": i, "Y": i * j, "Z": j}[kind]


@dataclass(frozen=True)
class SignTable:
    """All sixteen coefficients ``c(i, j, k)``."""

    table: dict

    @classmethod
    def build(cls):
        return cls({(i, j, k): sign_coefficient(i, j, k)
                    for i in (1, -1) for j in (1, -1) for k in SECTOR_KINDS})

    def __call__(self, i, j, kind):
        return self.table[(i, j, kind)]


# --------------------------------------------------------------- transporters


@dataclass(frozen=True)
class TransporterData:
    """``F_X`` (``Z`` string) and ``F_Z`` (``X`` string) on the region sites."""

    f_x: PauliString
    f_z: PauliString
    sign_x: tuple = SIGN_X
    sign_z: tuple = SIGN_Z
    degenerate: bool = False

    @property
    def sites(self):
        return self.f_x.sites

    def string(self, kind):
        if kind == "0":
            return PauliString.identity(self.sites)
        if kind == "X":
            return self.f_x
        if kind == "Z":
            return self.f_z
        if kind == "Y":
            return multiply(self.f_x, self.f_z)
        raise ValueError(f"unknown transporter kind {kind!r}")


def build_strings(region, spec=None):
    """Transporter strings from the routing description (default: from the geometry).

    Raises
    ------
    ValueError
        If a path edge lies outside the region or the dual paths cross the
        primal paths an odd number of times (``F_X`` and ``F_Z`` would anticommute).
    """
    spec = spec or lattice.string_spec(region)
    sites = region.edges
    inside = set(sites)
    zs, xs = {}, {}
    for path in spec.primal:
        for e in path:
            zs[e] = zs.get(e, 0) ^ 1
    for path in spec.dual:
        for e in path:
            xs[e] = xs.get(e, 0) ^ 1
    for e in list(zs) + list(xs):
        if e not in inside:
            raise ValueError(f"string edge {e} is outside the region")
    f_x = PauliString.on(sites, {e: "Z" for e, b in zs.items() if b})
    f_z = PauliString.on(sites, {e: "X" for e, b in xs.items() if b})
    if not commutes(f_x, f_z):
        crossings = sum(1 for e, b in zs.items() if b and xs.get(e))
        raise ValueError(
            f"crossing-parity violation: dual paths cross primal paths {crossings} times "
            "(odd), so F_X and F_Z anticommute; reroute the dual path")
    return TransporterData(f_x, f_z, degenerate=f_x.is_identity() or f_z.is_identity())


# ---------------------------------------------------------------- ground state


def ground_state_rdm(region, backend="stabilizer", cap=DENSE_CAP):
    """Reduced ground-state density of ``region``.

    ``"stabilizer"`` returns a :class:`CosetMixtureState` (the patch group
    restricted to the region, all signs ``+1``); ``"dense"`` returns the matrix
    from the explicit state-vector construction, refusing more than ``cap`` edges.
    """
    if backend == "stabilizer":
        sites, gens = lattice.patch_stabilizers(region)
        group = StabilizerGroup(sites, gens)
        return CosetMixtureState(restrict_group(group, region.edges))
    if backend == "dense":
        return lattice.ground_state_density_dense(region, cap=cap)
    raise ValueError(f"unknown backend {backend!r}")


# ------------------------------------------------------------ block algebra


def project_dense(rho, transporters, a, b):
    """``Pi rho Pi`` with ``Pi = (I + a F_X)(I + b F_Z) / 4``, via Pauli permutations."""
    f_x, f_z = transporters.f_x, transporters.f_z
    left = rho + b * f_z.apply_left(rho)
    left = left + a * f_x.apply_left(left)
    out = left + b * f_z.apply_right(left)
    out = out + a * f_x.apply_right(out)
    return out / 16.0


def projector_dense(transporters, a, b):
    dim = 1 << len(transporters.sites)
    eye = np.eye(dim)
    out = eye + b * transporters.f_z.apply_left(eye)
    return (out + a * transporters.f_x.apply_left(out)) / 4.0


class HatInclusion:
    """Region algebra embedded as ``diag(A, A, A, A)`` with the four-block average.

    Dense helpers (transporter images, block projections) materialise
    ``2^m x 2^m`` matrices and are meant for small regions.
    """

    def __init__(self, region, transporters):
        if transporters.sites != region.edges:
            raise ValueError("transporters act on a different site set")
        self.region = region
        self.transporters = transporters
        self.num_sites = len(region.edges)
        self.block_dim = 1 << self.num_sites
        self.expectation = blockalg.block_average_expectation(4, self.block_dim)

    @property
    def ambient(self):
        return self.expectation.ambient

    def _guard(self):
        if self.num_sites > DENSE_CAP:
            raise ValueError(f"{self.num_sites} sites exceed the dense cap {DENSE_CAP}")

    def embed(self, mat):
        return self.expectation.embed(blockalg.BlockElement(self.expectation.sub, [mat]))

    def transporter_image(self, kind):
        """Block element ``diag(s_k(b) F_k)``."""
        self._guard()
        f = self.transporters.string(kind).dense()
        return blockalg.BlockElement(self.ambient, [s * f for s in block_signs(kind)])

    def block_sign_element(self, kind):
        """Central element ``diag(s_k(b) I)``."""
        eye = np.eye(self.block_dim)
        return blockalg.BlockElement(self.ambient, [s * eye for s in block_signs(kind)])

    def sector_projection(self, i, j):
        """``P_i Q_j = (I + i V_X)(I + j V_Z) / 4`` in block form."""
        self._guard()
        return blockalg.BlockElement(self.ambient, [
            projector_dense(self.transporters, i * SIGN_X[b], j * SIGN_Z[b]) for b in range(4)
        ])

    def block_unit(self, i, j):
        """``(1/4)(I + i F_X V_X)(I + j F_Z V_Z)``, which should be a central block unit."""
        one = blockalg.BlockElement.identity(self.ambient)
        ux = one + i * (self.embed(self.transporters.f_x.dense()) @ self.transporter_image("X"))
        uz = one + j * (self.embed(self.transporters.f_z.dense()) @ self.transporter_image("Z"))
        return (ux @ uz) * 0.25


def build_hat_inclusion(region, transporters):
    return HatInclusion(region, transporters)


# ------------------------------------------------------------ decomposition


@dataclass
class CosetEnsemble:
    """Ensemble whose members are four coset-mixture blocks each."""

    weights: np.ndarray
    members: list

    @property
    def barycenter(self):
        return [_coset_sum_blocks([m[b].scaled(p) for p, m in zip(self.weights, self.members)])
                for b in range(4)]


def _coset_sum_blocks(states):
    live = [s for s in states if not s.is_zero()]
    if not live:
        return CosetMixtureState(StabilizerGroup(states[0].sites), 0.0)
    return coset_sum(live)


def _support_overlap(blocks):
    """Largest normalised ``Tr(A B)`` between distinct PSD blocks (zero iff supports are orthogonal)."""
    worst = 0.0
    keys = list(blocks)
    for x in range(len(keys)):
        for y in range(x + 1, len(keys)):
            a, b = blocks[keys[x]], blocks[keys[y]]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na and nb:
                worst = max(worst, abs(np.vdot(a, b)) / (na * nb))
    return worst


def omega_decomposition(rho0, transporters, check=True):
    """Four-member decomposition ``rho_{ij}`` of the transporter-projected state.

    Member ``(i, j)`` has block ``b`` equal to ``Pi rho0 Pi`` with
    ``Pi = (I + i s_X(b) F_X)(I + j s_Z(b) F_Z) / 4``; weights are ``1/4``.

    Parameters
    ----------
    rho0 : ndarray or CosetMixtureState
        Dense matrix or stabilizer description of the region state.
    transporters : TransporterData
    check : bool
        Verify that the four block projections have orthogonal supports.

    Returns
    -------
    blockalg.Ensemble or CosetEnsemble
    """
    weights = np.full(4, 0.25)
    if isinstance(rho0, CosetMixtureState):
        blocks = {(a, b): rho0.project(transporters.f_x, a).project(transporters.f_z, b)
                  for a, b in MEMBER_SIGNS}
        if check and not all(coset_orthogonal(blocks[x], blocks[y])
                             for x in blocks for y in blocks if x < y):
            raise RuntimeError("sector blocks are not orthogonal; check the string routing")
        members = [tuple(blocks[(i * SIGN_X[b], j * SIGN_Z[b])] for b in range(4))
                   for i, j in MEMBER_SIGNS]
        return CosetEnsemble(weights, members)
    rho0 = np.asarray(rho0)
    blocks = {(a, b): project_dense(rho0, transporters, a, b) for a, b in MEMBER_SIGNS}
    if check and _support_overlap(blocks) > 1e-8:
        raise RuntimeError("sector blocks are not orthogonal; check the string routing")
    algebra = blockalg.BlockAlgebra((rho0.shape[0],) * 4)
    members = [blockalg.BlockElement(algebra, [blocks[(i * SIGN_X[b], j * SIGN_Z[b])] for b in range(4)])
               for i, j in MEMBER_SIGNS]
    return blockalg.Ensemble(weights, members)


def coset_member_dense(member, cap=DENSE_CAP):
    """Dense blocks of a stabilizer-backend member."""
    return [rdm_dense(s, cap) if not s.is_zero() else np.zeros((1 << s.num_sites,) * 2) for s in member]


def coset_disturbance(ensemble):
    """Disturbance report of a :class:`CosetEnsemble` computed from group data only."""
    weights = ensemble.weights
    bary = ensemble.barycenter

    def member_entropy(member, ref):
        return sum(coset_relative_entropy(s, r) for s, r in zip(member, ref))

    chi_amb = sum(p * member_entropy(m, bary) for p, m in zip(weights, ensemble.members) if p > 0)
    restricted = [_coset_sum_blocks(list(m)) for m in ensemble.members]
    sub_bary = _coset_sum_blocks([r.scaled(p) for p, r in zip(weights, restricted)])
    chi_sub = sum(p * coset_relative_entropy(r, sub_bary) for p, r in zip(weights, restricted) if p > 0)
    equiv = 0.0
    for p, m, r in zip(weights, ensemble.members, restricted):
        if p > 0:
            equiv += p * member_entropy(m, [r.scaled(0.25)] * 4)
    ref = bary[0]
    invariant = all(b.group.same_as(ref.group) and abs(b.weight - ref.weight) <= 1e-12 for b in bary)
    return blockalg.DisturbanceReport(chi_amb, chi_sub, chi_amb - chi_sub, equiv, invariant, math.log(4))


def restrictions_dense(ensemble, expectation):
    return [expectation.restrict_state(m) for m in ensemble.members]


# ---------------------------------------------------------- identity checks


@dataclass
class ProjectedExpectationCheck:
    max_residual: float
    samples: int
    cases: int
    max_cross_term: float


def verify_projected_expectations(rho0, transporters, samples=200, seed=0):
    """Compare sector-projected expectations with the transporter-averaged formula.

    For random region observables ``A`` and every ``(i, j, k)``, the block-form
    value ``Tr(rho_hat P_i Q_j embed(A) V_k P_i Q_j)`` with ``rho_hat = (1/4) diag(rho0, ...)``
    is compared with ``c(i, j, k)/16 * sum_g Tr(rho0 F_g A F_g)``.  Also records
    the largest cross term ``|Tr(rho_hat embed(A) V_k)|`` for ``k != 0``.
    """
    rho0 = np.asarray(rho0)
    rng = np.random.default_rng(seed)
    dim = rho0.shape[0]
    if dim > WATATANI_MAX_DIM:
        raise ValueError(f"block dimension {dim} is above the dense check limit {WATATANI_MAX_DIM}")
    table = SignTable.build()
    strings = {k: transporters.string(k).dense() for k in SECTOR_KINDS}
    proj = {(a, b): projector_dense(transporters, a, b) for a, b in MEMBER_SIGNS}
    worst = cross = 0.0
    for _ in range(samples):
        a_mat = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        averaged = sum(np.trace(rho0 @ strings[g] @ a_mat @ strings[g]) for g in SECTOR_KINDS)
        for k in SECTOR_KINDS:
            signs = block_signs(k)
            if k != "0":
                value = sum(0.25 * s * np.trace(rho0 @ a_mat @ strings[k]) for s in signs)
                cross = max(cross, abs(value))
            for i, j in MEMBER_SIGNS:
                lhs = 0.0
                for b in range(4):
                    p = proj[(i * SIGN_X[b], j * SIGN_Z[b])]
                    lhs += 0.25 * np.trace(rho0 @ p @ a_mat @ (signs[b] * strings[k]) @ p)
                rhs = table(i, j, k) / 16.0 * averaged
                worst = max(worst, abs(lhs - rhs))
    return ProjectedExpectationCheck(worst, samples, len(table.table), cross)


@dataclass
class WatataniResult:
    reconstruction: float
    index_residual: float
    trace_residual: float
    basis: str

    @property
    def max_residual(self):
        return max(self.reconstruction, self.index_residual)


def transporter_quasi_basis(hat):
    """The four elements ``2 P_j Q_k``."""
    return [hat.sector_projection(i, j) * 2.0 for i, j in MEMBER_SIGNS]


def watatani_index_check(hat, samples=50, seed=0, tol=1e-10):
    """Check ``sum_u u E(u^* x) = x`` and ``sum_u u u^* = 4 I`` for the transporter quasi-basis.

    If the transporter basis fails, the weight-based basis ``w_j^{-1/2} 1_j``
    (the solution of the defining equations for a block average) is checked instead.
    Trace compatibility ``Tr(embed(E(a)) embed(b)) = Tr(a embed(b))`` is reported too.
    """
    if hat.block_dim > WATATANI_MAX_DIM:
        raise ValueError(f"block dimension {hat.block_dim} is above the dense check limit")
    exp = hat.expectation
    kind = "transporter"
    basis = transporter_quasi_basis(hat)
    rec, index = blockalg.quasi_basis_residuals(exp, basis, samples, seed)
    if rec > tol:
        kind = "block"
        basis = blockalg.block_quasi_basis(exp)
        rec, index = blockalg.quasi_basis_residuals(exp, basis, samples, seed)
    target = blockalg.BlockElement.identity(exp.ambient) * 4.0
    index_res = max(float(np.max(np.abs(p))) for p in (index - target).parts)
    rng = np.random.default_rng(seed + 1)
    trace_res = 0.0
    for _ in range(samples):
        a = blockalg.random_element(rng, exp.ambient)
        b = exp.embed(blockalg.random_element(rng, exp.sub))
        lhs = (exp.embed(exp.apply(a)) @ b).trace()
        rhs = (a @ b).trace()
        trace_res = max(trace_res, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return WatataniResult(rec, index_res, trace_res, kind)


# -------------------------------------------------------------- experiment


@dataclass
class ToricReport:
    """Outcome of one disturbance experiment.

    ``index_hat`` is estimated on a four-block average whose block size is
    ``index_probe_dim``; the estimate does not depend on the block size.
    ``watatani_residual`` is ``None`` above the dense check limit.
    """

    n: int
    num_edges: int
    backend: str
    chi_ambient: float
    chi_sub: float
    disturbance: float
    equivalent_form: float
    invariant_flag: bool
    support_orthogonal: bool
    index_hat: float
    index_probe_dim: int
    watatani_residual: float
    quantum_dimension_sq: int
    seed: int
    geometry: dict
    elapsed: float

    def passes(self, tol=1e-6):
        return abs(self.disturbance - TWO_LOG_TWO) <= tol

    def as_dict(self):
        return asdict(self)


def disturbance_experiment(n, backend="stabilizer", geometry=None, seed=0, pp_trials=1000,
                           dense_cap=DENSE_CAP):
    """Run the four-sector disturbance experiment on the region of size ``n``.

    Parameters
    ----------
    n : int
        Region size.
    backend : {"stabilizer", "dense"}
    geometry : Geometry, str or None
        Geometry object, file path or name; default ``corner_v1``.
    seed : int
        Seed of the Pimsner-Popa sampling.
    pp_trials : int
        Random samples for the index estimate (rank-one probes come on top).
    dense_cap : int
        Largest region (in edges) accepted by the dense backend.

    Returns
    -------
    ToricReport
    """
    start = time.perf_counter()
    geom = geometry if isinstance(geometry, lattice.Geometry) else lattice.load_geometry(geometry)
    region = lattice.build_region(n, geom)
    trans = build_strings(region)
    m = region.num_edges
    if backend == "stabilizer":
        rho0 = ground_state_rdm(region, "stabilizer")
        ens = omega_decomposition(rho0, trans, check=False)
        report = coset_disturbance(ens)
        blocks = ens.members[0]
        orthogonal = all(coset_orthogonal(x, y) for i, x in enumerate(blocks) for y in blocks[i + 1:])
    elif backend == "dense":
        rho0 = ground_state_rdm(region, "dense", cap=dense_cap)
        ens = omega_decomposition(rho0, trans, check=False)
        hat = HatInclusion(region, trans)
        report = blockalg.entropic_disturbance(ens, hat.expectation)
        orthogonal = _support_overlap(dict(enumerate(ens.members[0].parts))) <= 1e-10
        del ens
        linalg.clear_cache()
    else:
        raise ValueError(f"unknown backend {backend!r}")
    probe = min(1 << m, INDEX_PROBE_DIM)
    est = blockalg.pimsner_popa_constant(blockalg.block_average_expectation(4, probe), pp_trials, seed)
    wat = None
    if (1 << m) <= WATATANI_MAX_DIM:
        wat = watatani_index_check(HatInclusion(region, trans), samples=10, seed=seed).max_residual
    return ToricReport(
        n=n, num_edges=m, backend=backend,
        chi_ambient=report.chi_ambient, chi_sub=report.chi_sub, disturbance=report.disturbance,
        equivalent_form=report.equivalent_form, invariant_flag=report.invariant_flag,
        support_orthogonal=orthogonal, index_hat=est.index_hat, index_probe_dim=probe,
        watatani_residual=wat, quantum_dimension_sq=QUANTUM_DIMENSION_SQ, seed=seed,
        geometry=geom.describe(), elapsed=time.perf_counter() - start,
    )
