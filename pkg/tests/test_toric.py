import json

import numpy as np
import pytest

from subfactorlab import blockalg, lattice, linalg, toric
from subfactorlab.pauli import coset_relative_entropy, rdm_dense
from subfactorlab.toric import MEMBER_SIGNS, SECTOR_KINDS, TWO_LOG_TWO

BROKEN_DUAL = {"dual": {"waypoints": [[0.5, -0.5], [0.5, 0.5]], "direction": None}}


@pytest.fixture(scope="module")
def small():
    region = lattice.build_region(1)
    trans = toric.build_strings(region)
    return region, trans, toric.HatInclusion(region, trans)


@pytest.fixture
def broken_geometry(tmp_path):
    doc = json.loads((lattice._PACKAGE_GEOMETRY / "corner_v1.json").read_text())
    doc["name"] = "broken_routing"
    doc["cones"][1]["strings"] = BROKEN_DUAL
    path = tmp_path / "broken_routing.json"
    path.write_text(json.dumps(doc))
    return str(path)


# ------------------------------------------------------------ sign bookkeeping


def test_sign_table_values():
    table = toric.SignTable.build()
    assert len(table.table) == 16
    for i in (1, -1):
        for j in (1, -1):
            assert table(i, j, "0") == 1
            assert table(i, j, "X") == i
            assert table(i, j, "Z") == j
            assert table(i, j, "Y") == i * j
    with pytest.raises(ValueError):
        toric.sign_coefficient(0, 1, "X")
    with pytest.raises(ValueError):
        toric.block_signs("W")


@pytest.mark.parametrize("kind", SECTOR_KINDS)
@pytest.mark.parametrize("i,j", MEMBER_SIGNS)
def test_transporter_eigen_relation(small, kind, i, j):
    """V_k P_i Q_j = c(i, j, k) P_i Q_j, checked densely in block form."""
    _, _, hat = small
    lhs = hat.transporter_image(kind) @ hat.sector_projection(i, j)
    rhs = hat.sector_projection(i, j) * toric.sign_coefficient(i, j, kind)
    assert (lhs - rhs).norm() < 1e-12


def test_block_units_partition_identity(small):
    _, _, hat = small
    units = [hat.block_unit(i, j) for i, j in MEMBER_SIGNS]
    total = units[0] + units[1] + units[2] + units[3]
    assert (total - blockalg.BlockElement.identity(hat.ambient)).norm() < 1e-12
    for u in units:
        assert (u @ u - u).norm() < 1e-12


# ------------------------------------------------------------- strings


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_strings_commute_and_square_to_identity(n):
    trans = toric.build_strings(lattice.build_region(n))
    assert not trans.degenerate
    for k in SECTOR_KINDS:
        sq = trans.string(k) * trans.string(k)
        assert sq.is_identity() and sq.phase == 0
    assert (trans.f_x * trans.f_z) == (trans.f_z * trans.f_x)
    assert set(trans.f_x.label()) <= {"I", "Z"} and set(trans.f_z.label()) <= {"I", "X"}


def test_strings_commute_with_region_stabilizers():
    region = lattice.build_region(3)
    trans = toric.build_strings(region)
    rho0 = toric.ground_state_rdm(region)
    from subfactorlab.pauli import commutes
    for g in rho0.group.generators:
        assert commutes(g, trans.f_x) and commutes(g, trans.f_z)


def test_broken_routing_rejected(broken_geometry):
    region = lattice.build_region(2, lattice.load_geometry(broken_geometry))
    with pytest.raises(ValueError, match="crossing-parity"):
        toric.build_strings(region)
    with pytest.raises(ValueError, match="crossing-parity"):
        toric.disturbance_experiment(2, geometry=broken_geometry)


def test_string_outside_region_rejected():
    region = lattice.build_region(1)
    spec = lattice.StringSpec(((lattice.edge((5, 5), (5, 6)),), ()), ((), ()))
    with pytest.raises(ValueError, match="outside"):
        toric.build_strings(region, spec)


# ------------------------------------------------------- decomposition: dense


@pytest.fixture(scope="module")
def dense_n1():
    region = lattice.build_region(1)
    trans = toric.build_strings(region)
    rho0 = toric.ground_state_rdm(region, "dense")
    return region, trans, rho0, toric.omega_decomposition(rho0, trans)


def test_ground_state_n1_is_maximally_mixed(dense_n1):
    _, _, rho0, _ = dense_n1
    assert np.allclose(rho0, np.eye(16) / 16)


def test_members_structure(dense_n1):
    region, trans, rho0, ens = dense_n1
    hat = toric.HatInclusion(region, trans)
    blocks = {}
    for (i, j), member in zip(MEMBER_SIGNS, ens.members):
        assert member.trace().real == pytest.approx(1.0, abs=1e-10)
        assert member.min_eigenvalue() >= -1e-12
        assert not blockalg.invariant_state_check(member, hat.expectation)
        for b, part in enumerate(member.parts):
            blocks[(i * toric.SIGN_X[b], j * toric.SIGN_Z[b])] = part
    # the four distinct projected blocks have mutually orthogonal supports
    for x in blocks:
        for y in blocks:
            if x < y:
                assert np.linalg.norm(blocks[x] @ blocks[y]) <= 1e-10
    restricted = [hat.expectation.restrict_state(m).parts[0] for m in ens.members]
    for r in restricted[1:]:
        assert np.max(np.abs(r - restricted[0])) <= 1e-10
    assert np.allclose(restricted[0], rho0)
    bary = ens.barycenter
    assert blockalg.invariant_state_check(bary, hat.expectation)
    for part in bary.parts:
        assert np.allclose(part, rho0 / 4)


def test_stabilizer_members_match_dense(dense_n1):
    region, trans, _, ens = dense_n1
    stab = toric.omega_decomposition(toric.ground_state_rdm(region), trans)
    for dm, sm in zip(ens.members, stab.members):
        for dpart, spart in zip(dm.parts, toric.coset_member_dense(sm)):
            assert np.max(np.abs(dpart - spart)) <= 1e-10


def test_projected_expectations(dense_n1):
    _, trans, rho0, _ = dense_n1
    check = toric.verify_projected_expectations(rho0, trans, samples=40, seed=3)
    assert check.cases == 16
    assert check.max_residual <= 1e-10
    assert check.max_cross_term <= 1e-10


def test_watatani(small):
    _, _, hat = small
    res = toric.watatani_index_check(hat, samples=10)
    assert res.basis == "transporter"
    assert res.reconstruction <= 1e-10
    assert res.index_residual <= 1e-12
    assert res.trace_residual <= 1e-10


def test_privacy_of_toric_ensemble(dense_n1):
    region, trans, _, ens = dense_n1
    hat = toric.HatInclusion(region, trans)
    bob = blockalg.identity_expectation(4, hat.block_dim)
    assert blockalg.quantum_privacy(ens, bob, hat.expectation) == pytest.approx(TWO_LOG_TWO, abs=1e-10)
    assert blockalg.quantum_privacy(ens, hat.expectation, hat.expectation) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------- experiment runs


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_stabilizer_experiment(n):
    rep = toric.disturbance_experiment(n, "stabilizer", pp_trials=100)
    assert abs(rep.disturbance - TWO_LOG_TWO) <= 1e-9
    assert abs(rep.equivalent_form - TWO_LOG_TWO) <= 1e-9
    assert abs(rep.chi_sub) <= 1e-9
    assert rep.invariant_flag and rep.support_orthogonal
    assert rep.index_hat == pytest.approx(4.0, abs=1e-6)
    assert rep.passes()


def test_dense_experiment_n1():
    rep = toric.disturbance_experiment(1, "dense", pp_trials=100)
    assert abs(rep.disturbance - TWO_LOG_TWO) <= 1e-9
    assert abs(rep.chi_sub) <= 1e-9
    assert rep.watatani_residual <= 1e-10


def test_experiment_rejects_unknown_backend():
    with pytest.raises(ValueError):
        toric.disturbance_experiment(1, "tensor-network")


def test_stabilizer_entropies_match_dense_at_n1(dense_n1):
    region, trans, _, ens = dense_n1
    stab = toric.omega_decomposition(toric.ground_state_rdm(region), trans)
    bary_s = stab.barycenter
    bary_d = ens.barycenter
    for sm, dm in zip(stab.members, ens.members):
        for s, r, dpart, dref in zip(sm, bary_s, dm.parts, bary_d.parts):
            got = coset_relative_entropy(s, r)
            want = linalg.relative_entropy(dpart, dref)
            assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.slow
def test_backends_agree_at_n2():
    """Twelve-edge region: projected blocks and their entropies agree between backends."""
    region = lattice.build_region(2)
    trans = toric.build_strings(region)
    dense_rho = toric.ground_state_rdm(region, "dense")
    stab_rho = toric.ground_state_rdm(region, "stabilizer")
    assert np.max(np.abs(dense_rho - rdm_dense(stab_rho))) <= 1e-10
    for a, b in MEMBER_SIGNS:
        d = toric.project_dense(dense_rho, trans, a, b)
        s = stab_rho.project(trans.f_x, a).project(trans.f_z, b)
        assert np.max(np.abs(d - rdm_dense(s))) <= 1e-10
        assert s.weight == pytest.approx(np.trace(d), abs=1e-12)
        if s.weight > 0:
            evals = np.linalg.eigvalsh(d)
            pos = evals[evals > 1e-12]
            assert s.entropy() == pytest.approx(-np.sum(pos * np.log(pos)), abs=1e-10)
    linalg.clear_cache()


def test_stabilizer_runtime_budget():
    import time
    start = time.perf_counter()
    toric.disturbance_experiment(3, "stabilizer")
    assert time.perf_counter() - start < 60
