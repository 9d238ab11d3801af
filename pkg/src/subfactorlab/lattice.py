"""Square-lattice regions, string paths and ground-state data of the toric code.

Vertices are integer pairs ``(x, y)``; an edge is the sorted pair of its
endpoints.  Geometry is read from versioned JSON documents (see
``geometry/corner_v1.json``): each cone has a tip and two unit vectors
``axis`` and ``side`` spanning local coordinates ``tip + a*axis + b*side``.
"""
from dataclasses import dataclass, field
import itertools
import json
import os
from pathlib import Path

import numpy as np

from .pauli import PauliString

GEOMETRY_ENV = "SUBFACTORLAB_GEOMETRY_DIR"
DEFAULT_GEOMETRY = "corner_v1"
VECTOR_CAP = 24
_PACKAGE_GEOMETRY = Path(__file__).with_name("geometry")


def edge(u, v):
    u, v = tuple(int(c) for c in u), tuple(int(c) for c in v)
    if abs(u[0] - v[0]) + abs(u[1] - v[1]) != 1:
        raise ValueError(f"{u} and {v} are not lattice neighbours")
    return (u, v) if u < v else (v, u)


def neighbours(v):
    x, y = v
    return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))


def star_edges(v):
    return tuple(sorted(edge(v, w) for w in neighbours(v)))


def plaquette_edges(x, y):
    """Edges around the face with lower-left corner ``(x, y)``."""
    return tuple(sorted((
        edge((x, y), (x + 1, y)), edge((x, y + 1), (x + 1, y + 1)),
        edge((x, y), (x, y + 1)), edge((x + 1, y), (x + 1, y + 1)),
    )))


# ------------------------------------------------------------------ geometry


@dataclass(frozen=True)
class Cone:
    tip: tuple
    axis: tuple
    side: tuple
    strings: dict = field(default_factory=dict, compare=False, hash=False)

    def to_global(self, a, b):
        return (self.tip[0] + a * self.axis[0] + b * self.side[0],
                self.tip[1] + a * self.axis[1] + b * self.side[1])

    def step(self, direction):
        return (direction[0] * self.axis[0] + direction[1] * self.side[0],
                direction[0] * self.axis[1] + direction[1] * self.side[1])


@dataclass(frozen=True)
class Geometry:
    """Versioned description of the two-cone region family and its strings."""

    name: str
    version: int
    shape: str
    cones: tuple
    strings: dict
    radius_scale: int = 1
    radius_offset: int = 0
    margin: int = 1
    min_separation: int = 2
    source: str = ""

    def radius(self, n):
        return self.radius_scale * n + self.radius_offset

    def strings_for(self, index):
        merged = {k: dict(v) for k, v in self.strings.items()}
        for key, value in self.cones[index].strings.items():
            merged[key] = dict(value)
        return merged

    def describe(self):
        return {"name": self.name, "version": self.version, "source": self.source}


def _unit(vec, what):
    vec = tuple(int(c) for c in vec)
    if abs(vec[0]) + abs(vec[1]) != 1:
        raise ValueError(f"{what} must be a lattice unit vector, got {vec}")
    return vec


def parse_geometry(doc, source=""):
    """Validate a geometry document (already decoded from JSON)."""
    try:
        shape = doc.get("shape", "corner")
        if shape not in ("corner", "diamond"):
            raise ValueError(f"unknown cone shape {shape!r}")
        cones = []
        for c in doc["cones"]:
            axis, side = _unit(c["axis"], "axis"), _unit(c["side"], "side")
            if axis[0] * side[0] + axis[1] * side[1] != 0:
                raise ValueError("axis and side must be orthogonal")
            cones.append(Cone(tuple(int(v) for v in c["tip"]), axis, side, c.get("strings", {})))
        if len(cones) != 2:
            raise ValueError("exactly two cones are required")
        geom = Geometry(
            name=str(doc["name"]),
            version=int(doc["version"]),
            shape=shape,
            cones=tuple(cones),
            strings=doc.get("strings", {}),
            radius_scale=int(doc.get("radius_scale", 1)),
            radius_offset=int(doc.get("radius_offset", 0)),
            margin=int(doc.get("patch_margin", 1)),
            min_separation=int(doc.get("min_separation", 2)),
            source=source,
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed geometry document: {exc}") from exc
    if geom.min_separation < 2:
        raise ValueError("min_separation below 2 is not allowed")
    if geom.margin < 1:
        raise ValueError("patch_margin must be at least 1")
    return geom


def geometry_dirs():
    dirs = []
    if os.environ.get(GEOMETRY_ENV):
        dirs.append(Path(os.environ[GEOMETRY_ENV]))
    dirs.append(_PACKAGE_GEOMETRY)
    return dirs


def load_geometry(ref=None):
    """Load a geometry by file path or by name from the geometry directories.

    Names are looked up first in ``$SUBFACTORLAB_GEOMETRY_DIR`` and then in
    the packaged ``geometry`` directory.
    """
    ref = DEFAULT_GEOMETRY if ref is None else str(ref)
    path = Path(ref)
    if not path.is_file():
        candidates = [d / (ref if ref.endswith(".json") else ref + ".json") for d in geometry_dirs()]
        found = [c for c in candidates if c.is_file()]
        if not found:
            raise FileNotFoundError(f"geometry {ref!r} not found in {[str(d) for d in geometry_dirs()]}")
        path = found[0]
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"geometry file {path} is not valid JSON: {exc}") from exc
    return parse_geometry(doc, source=str(path))


# ------------------------------------------------------------------- regions


@dataclass(frozen=True)
class LatticeRegion:
    """Two disjoint edge sets (one per cone) and their lattice separation."""

    n: int
    parts: tuple
    separation: int
    geometry: Geometry = None

    @property
    def edges(self):
        return tuple(sorted(set().union(*self.parts)))

    @property
    def vertices(self):
        return sorted({v for e in self.edges for v in e})

    @property
    def num_edges(self):
        return len(self.edges)

    def bounding_box(self, margin=0):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs) - margin, max(xs) + margin, min(ys) - margin, max(ys) + margin)


def _cone_vertices(cone, shape, r):
    pts = set()
    for a in range(r + 1):
        for b in range(-r, r + 1):
            inside = (b >= 0 and a + b <= r) if shape == "corner" else (abs(b) <= a)
            if inside:
                pts.add(cone.to_global(a, b))
    return pts


def _induced_edges(vertices):
    out = set()
    for v in vertices:
        for w in ((v[0] + 1, v[1]), (v[0], v[1] + 1)):
            if w in vertices:
                out.add(edge(v, w))
    return out


def vertex_distance(a, b):
    return min(abs(u[0] - v[0]) + abs(u[1] - v[1]) for u in a for v in b)


def region_from_edges(edges, n=0, parts=None):
    """Region built directly from edge sets; used for small test regions."""
    parts = (tuple(sorted(edges)),) if parts is None else tuple(tuple(sorted(p)) for p in parts)
    sep = 0
    if len(parts) > 1:
        verts = [{v for e in p for v in e} for p in parts]
        sep = min(vertex_distance(a, b) for a, b in itertools.combinations(verts, 2))
    return LatticeRegion(n, parts, sep)


def build_region(n, geometry=None):
    """Two cone truncations of radius ``r(n)``, checked for disjointness and separation.

    Raises
    ------
    ValueError
        For ``n < 1`` or when the cones overlap or sit closer than ``min_separation``.
    """
    geometry = geometry if isinstance(geometry, Geometry) else load_geometry(geometry)
    if n < 1:
        raise ValueError("region size n must be at least 1")
    r = geometry.radius(n)
    verts = [_cone_vertices(c, geometry.shape, r) for c in geometry.cones]
    parts = tuple(tuple(sorted(_induced_edges(v))) for v in verts)
    if not all(parts):
        raise ValueError("a cone truncation has no edges")
    if set(parts[0]) & set(parts[1]):
        raise ValueError("cone truncations overlap")
    sep = vertex_distance(verts[0], verts[1])
    if sep < geometry.min_separation:
        raise ValueError(f"rejected geometry: separation {sep} < {geometry.min_separation}")
    return LatticeRegion(n, parts, sep, geometry)


# --------------------------------------------------------------------- paths


@dataclass(frozen=True)
class StringSpec:
    """Edges of the primal (``Z``) and dual (``X``) paths, one pair of lists per cone."""

    primal: tuple
    dual: tuple


def _primal_walk(cone, waypoints, direction, allowed):
    pts = [cone.to_global(*w) for w in waypoints]
    out = []
    for p, q in zip(pts, pts[1:]):
        dx, dy = q[0] - p[0], q[1] - p[1]
        if dx and dy:
            raise ValueError("primal waypoints must be joined by straight lattice segments")
        steps = abs(dx) + abs(dy)
        unit = (int(np.sign(dx)), int(np.sign(dy)))
        cur = p
        for _ in range(steps):
            nxt = (cur[0] + unit[0], cur[1] + unit[1])
            out.append(edge(cur, nxt))
            cur = nxt
    if direction is not None and pts:
        unit = cone.step(direction)
        cur = pts[-1]
        while True:
            nxt = (cur[0] + unit[0], cur[1] + unit[1])
            e = edge(cur, nxt)
            if e not in allowed:
                break
            out.append(e)
            cur = nxt
    return out


def _crossed(d1, d2):
    mx, my = (d1[0] + d2[0]) / 2, (d1[1] + d2[1]) / 2
    dx, dy = d2[0] - d1[0], d2[1] - d1[1]
    u = (round(mx - dy / 2), round(my + dx / 2))
    v = (round(mx + dy / 2), round(my - dx / 2))
    return edge(u, v)


def _dual_walk(cone, waypoints, direction, allowed):
    pts = [cone.to_global(*w) for w in waypoints]
    for p in pts:
        if (p[0] * 2) % 2 != 1 or (p[1] * 2) % 2 != 1:
            raise ValueError(f"dual waypoint {p} is not a face centre")
    out = []
    for p, q in zip(pts, pts[1:]):
        dx, dy = q[0] - p[0], q[1] - p[1]
        if dx and dy:
            raise ValueError("dual waypoints must be joined by straight segments")
        steps = int(abs(dx) + abs(dy))
        unit = (np.sign(dx), np.sign(dy))
        cur = p
        for _ in range(steps):
            nxt = (cur[0] + unit[0], cur[1] + unit[1])
            out.append(_crossed(cur, nxt))
            cur = nxt
    if direction is not None and pts:
        unit = cone.step(direction)
        cur = pts[-1]
        while True:
            nxt = (cur[0] + unit[0], cur[1] + unit[1])
            e = _crossed(cur, nxt)
            if e not in allowed:
                break
            out.append(e)
            cur = nxt
    return out


def string_spec(region, geometry=None):
    """Paths prescribed by the geometry config for ``region``.

    Raises
    ------
    ValueError
        If a path leaves the cone truncation it belongs to.
    """
    geometry = geometry or region.geometry
    primal, dual = [], []
    for index, (cone, part) in enumerate(zip(geometry.cones, region.parts)):
        allowed = set(part)
        cfg = geometry.strings_for(index)
        p = cfg.get("primal", {})
        d = cfg.get("dual", {})
        pe = _primal_walk(cone, [tuple(w) for w in p.get("waypoints", [])], p.get("direction"), allowed)
        de = _dual_walk(cone, [tuple(w) for w in d.get("waypoints", [])], d.get("direction"), allowed)
        for e in pe + de:
            if e not in allowed:
                raise ValueError(f"string edge {e} leaves cone {index}")
        primal.append(tuple(pe))
        dual.append(tuple(de))
    return StringSpec(tuple(primal), tuple(dual))


# ------------------------------------------------------------- stabilizers


def patch_stabilizers(region, margin=None):
    """Star (``X``) and plaquette (``Z``) generators on a box around ``region``.

    The box is the bounding box of the region grown by ``margin``; only
    stabilizers whose four edges lie in the box are used.

    Returns
    -------
    sites : tuple of edges
    generators : list of PauliString
    """
    if margin is None:
        margin = region.geometry.margin if region.geometry else 1
    x0, x1, y0, y1 = region.bounding_box(margin)
    box = {(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)}
    sites = tuple(sorted(_induced_edges(box)))
    gens = []
    for v in sorted(box):
        if all(w in box for w in neighbours(v)):
            gens.append(PauliString.on(sites, {e: "X" for e in star_edges(v)}))
    for x in range(x0, x1):
        for y in range(y0, y1):
            gens.append(PauliString.on(sites, {e: "Z" for e in plaquette_edges(x, y)}))
    return sites, gens


def _closure(e):
    return set(star_edges(e[0])) | set(star_edges(e[1]))


def _components(edges):
    """Group region edges whose star closures overlap."""
    edges = list(edges)
    parent = list(range(len(edges)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for i, e in enumerate(edges):
        for f in _closure(e):
            if f in owner:
                a, b = find(i), find(owner[f])
                if a != b:
                    parent[a] = b
            else:
                owner[f] = i
    groups = {}
    for i, e in enumerate(edges):
        groups.setdefault(find(i), []).append(e)
    return [sorted(g) for g in groups.values()]


def _component_density(region_edges, vector_cap):
    patch = set()
    for e in region_edges:
        patch |= _closure(e)
    patch = sorted(patch)
    p = len(patch)
    if p > vector_cap:
        raise ValueError(f"oracle patch of {p} edges exceeds the vector cap {vector_cap}")
    index = {e: t for t, e in enumerate(patch)}
    bit = {e: 1 << (p - 1 - t) for e, t in index.items()}
    pset = set(patch)
    ks = np.arange(1 << p, dtype=np.int64)
    psi = np.zeros(1 << p)
    psi[0] = 1.0
    verts = sorted({v for e in patch for v in e})
    for v in verts:
        star = star_edges(v)
        if all(e in pset for e in star):
            mask = sum(bit[e] for e in star)
            psi = 0.5 * (psi + psi[ks ^ mask])
    faces = sorted({(min(e[0][0], e[1][0]) - dx, min(e[0][1], e[1][1]) - dy)
                    for e in patch for dx in (0, 1) for dy in (0, 1)})
    for x, y in faces:
        face = plaquette_edges(x, y)
        if all(e in pset for e in face):
            mask = sum(bit[e] for e in face)
            sign = 1.0 - 2.0 * (np.bitwise_count(ks & mask) & 1)
            psi = 0.5 * (psi + sign * psi)
    psi /= np.linalg.norm(psi)
    inside = [index[e] for e in region_edges]
    outside = [t for t in range(p) if t not in set(inside)]
    tensor = psi.reshape((2,) * p).transpose(inside + outside)
    mat = tensor.reshape(1 << len(inside), -1)
    return mat @ mat.T


def ground_state_density_dense(region, cap=12, vector_cap=VECTOR_CAP):
    """Reduced density of the toric-code ground state on ``region`` from explicit state vectors.

    Independent of the stabilizer-group code path: for each cluster of region
    edges whose neighbourhoods overlap, the product state ``|0...0>`` on the
    region edges plus all edges touching region vertices is projected with
    ``(I + A_v)/2`` and ``(I + B_p)/2`` for every complete star and plaquette,
    normalised and partially traced.  Clusters are combined by tensor product.

    Returns
    -------
    ndarray
        Real ``2^m x 2^m`` matrix in the order of ``region.edges``.
    """
    edges = region.edges
    m = len(edges)
    if m > cap:
        raise ValueError(f"region of {m} edges exceeds the dense cap {cap}")
    comps = _components(edges)
    rho = np.ones((1, 1))
    order = []
    for comp in comps:
        rho = np.kron(rho, _component_density(comp, vector_cap))
        order += comp
    pos = {e: t for t, e in enumerate(order)}
    perm = [pos[e] for e in edges]
    tensor = rho.reshape((2,) * (2 * m))
    tensor = tensor.transpose(perm + [m + t for t in perm])
    return np.ascontiguousarray(tensor.reshape(1 << m, 1 << m))
