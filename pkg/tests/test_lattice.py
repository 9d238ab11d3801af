import json

import numpy as np
import pytest

from subfactorlab import lattice, toric
from subfactorlab.lattice import edge, plaquette_edges, region_from_edges, star_edges
from subfactorlab.pauli import rdm_dense

EXPECTED_EDGES = {1: 4, 2: 12, 3: 24, 4: 40}


def default_doc():
    return json.loads((lattice._PACKAGE_GEOMETRY / "corner_v1.json").read_text())


def test_default_geometry_loads():
    geom = lattice.load_geometry()
    assert geom.name == "corner_v1" and geom.version == 1
    assert len(geom.cones) == 2
    assert geom.describe()["name"] == "corner_v1"


@pytest.mark.parametrize("n", sorted(EXPECTED_EDGES))
def test_region_sizes_and_separation(n):
    region = lattice.build_region(n)
    assert region.num_edges == EXPECTED_EDGES[n]
    assert len(region.parts) == 2
    assert not set(region.parts[0]) & set(region.parts[1])
    assert region.separation == 2


def test_region_rejects_small_n():
    with pytest.raises(ValueError):
        lattice.build_region(0)


def test_overlapping_cones_rejected():
    doc = default_doc()
    doc["cones"][1]["tip"] = [1, 0]
    with pytest.raises(ValueError, match="overlap|separation"):
        lattice.build_region(1, lattice.parse_geometry(doc))


def test_close_cones_rejected():
    doc = default_doc()
    doc["cones"][1]["tip"] = [2, 0]
    doc["cones"][0]["tip"] = [1, 0]
    doc["cones"][0]["axis"] = [-1, 0]
    with pytest.raises(ValueError):
        lattice.build_region(1, lattice.parse_geometry(doc))


@pytest.mark.parametrize("mutate", [
    lambda d: d["cones"][0].update(axis=[1, 1]),
    lambda d: d["cones"][0].update(side=[-1, 0]),
    lambda d: d.pop("cones"),
    lambda d: d.update(shape="hexagon"),
    lambda d: d.update(min_separation=1),
    lambda d: d["cones"].pop(),
])
def test_malformed_geometry_rejected(mutate):
    doc = default_doc()
    mutate(doc)
    with pytest.raises(ValueError):
        lattice.parse_geometry(doc)


def test_geometry_env_directory_takes_precedence(tmp_path, monkeypatch):
    doc = default_doc()
    doc["radius_offset"] = 1
    (tmp_path / "corner_v1.json").write_text(json.dumps(doc))
    monkeypatch.setenv(lattice.GEOMETRY_ENV, str(tmp_path))
    geom = lattice.load_geometry()
    assert geom.source.startswith(str(tmp_path))
    assert lattice.build_region(1, geom).num_edges == EXPECTED_EDGES[2]


def test_geometry_by_path_and_missing(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(default_doc()))
    assert lattice.load_geometry(str(path)).source == str(path)
    with pytest.raises(FileNotFoundError):
        lattice.load_geometry("no-such-geometry")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ValueError):
        lattice.load_geometry(str(bad))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_default_strings(n):
    region = lattice.build_region(n)
    spec = lattice.string_spec(region)
    for part, primal, dual in zip(region.parts, spec.primal, spec.dual):
        assert set(primal) <= set(part) and set(dual) <= set(part)
        assert len(primal) == n and len(dual) == n
        assert not set(primal) & set(dual)
    # primal path starts at the tip of the first cone and runs along its axis
    assert edge((0, 0), (-1, 0)) in spec.primal[0]
    assert edge((0, 0), (0, 1)) in spec.dual[0]


def test_dual_waypoint_validation():
    doc = default_doc()
    doc["strings"]["dual"]["waypoints"] = [[0, 0]]
    geom = lattice.parse_geometry(doc)
    with pytest.raises(ValueError, match="face"):
        lattice.string_spec(lattice.build_region(1, geom), geom)


def test_patch_stabilizers_commute():
    region = lattice.build_region(2)
    sites, gens = lattice.patch_stabilizers(region)
    assert set(region.edges) <= set(sites)
    from subfactorlab.pauli import StabilizerGroup
    StabilizerGroup(sites, gens)  # validates commutation and independence


# --------------------------------------------------------- oracle agreement


def _custom_regions():
    star = set(star_edges((0, 0)))
    plaq = set(plaquette_edges(0, 0))
    return {
        "single-edge": {edge((0, 0), (1, 0))},
        "full-star": star,
        "star-plus-tail": star | {edge((1, 0), (2, 0)), edge((2, 0), (2, 1))},
        "plaquette": plaq,
        "two-plaquettes": plaq | set(plaquette_edges(1, 0)),
        "star-and-plaquette": star | plaq,
        "two-stars": star | set(star_edges((1, 0))),
        "cross-3x3": set(star_edges((0, 0))) | set(star_edges((1, 1))) | set(plaquette_edges(0, 0)),
    }


@pytest.mark.parametrize("name", sorted(_custom_regions()))
def test_dense_oracle_matches_stabilizer_backend(name):
    edges = _custom_regions()[name]
    assert len(edges) <= 12
    region = region_from_edges(edges)
    dense = toric.ground_state_rdm(region, "dense")
    stab = rdm_dense(toric.ground_state_rdm(region, "stabilizer"))
    assert np.max(np.abs(dense - stab)) <= 1e-10
    assert np.trace(dense) == pytest.approx(1.0, abs=1e-12)


def test_single_edge_is_maximally_mixed():
    region = region_from_edges({edge((0, 0), (1, 0))})
    assert np.allclose(toric.ground_state_rdm(region, "dense"), np.eye(2) / 2)


def test_full_star_has_expected_entropy():
    # one star constraint on four edges: entropy 3 log 2
    region = region_from_edges(set(star_edges((0, 0))))
    state = toric.ground_state_rdm(region, "stabilizer")
    assert len(state.group) == 1
    assert state.entropy() == pytest.approx(3 * np.log(2))


def test_dense_oracle_caps():
    region = lattice.build_region(3)
    with pytest.raises(ValueError, match="cap"):
        toric.ground_state_rdm(region, "dense")
    with pytest.raises(ValueError, match="vector cap"):
        lattice.ground_state_density_dense(lattice.build_region(2), vector_cap=10)


@pytest.mark.parametrize("n", [1, 2])
def test_default_regions_oracle_agreement(n):
    region = lattice.build_region(n)
    dense = toric.ground_state_rdm(region, "dense")
    stab = rdm_dense(toric.ground_state_rdm(region, "stabilizer"))
    assert np.max(np.abs(dense - stab)) <= 1e-10
