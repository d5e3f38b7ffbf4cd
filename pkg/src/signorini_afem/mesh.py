"""Conforming triangulations with boundary markers and newest vertex bisection."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

DIRICHLET = "D"
NEUMANN = "N"
CONTACT = "C"
MARKERS = (DIRICHLET, NEUMANN, CONTACT)


class MeshError(ValueError):
    """Invalid mesh input or a mesh that violates an invariant."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# local edge i of a triangle is the edge opposite local vertex i
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    refinement_edge: np.ndarray
    level: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_markers", "refinement_edge"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self):
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p[:, LOCAL_EDGES[:, 1]] - p[:, LOCAL_EDGES[:, 0]], axis=2)
        return lengths.max(axis=1)

    @property
    def topology(self):
        """Edge numbering shared by the refinement and the finite element space."""
        if "topology" not in self._cache:
            self._cache["topology"] = EdgeTopology.build(self)
        return self._cache["topology"]

    def marker_of_edges(self):
        """Marker per global edge ('' for interior edges)."""
        topo = self.topology
        out = np.full(topo.n_edges, "", dtype="<U1")
        ids = topo.lookup(self.boundary_edges)
        out[ids] = self.boundary_markers
        return out

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_markers, other.boundary_markers)
        )

    __hash__ = None


@dataclass(frozen=True)
class EdgeTopology:
    edges: np.ndarray          # (E, 2) sorted vertex pairs
    tri_edges: np.ndarray      # (M, 3) global edge of local edge i
    edge_tris: np.ndarray      # (E, 2) adjacent triangles, -1 if absent
    edge_local: np.ndarray     # (E, 2) local index of the edge in edge_tris
    radix: int
    _keys: np.ndarray = field(repr=False)

    @property
    def n_edges(self):
        return len(self.edges)

    @classmethod
    def build(cls, mesh):
        tri = mesh.triangles
        m = len(tri)
        pairs = np.sort(tri[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
        nv = max(mesh.n_vertices, 1)
        keys = pairs[:, 0].astype(np.int64) * nv + pairs[:, 1]
        ukeys, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        edges = pairs[first]
        tri_edges = inverse.reshape(m, 3)
        counts = np.bincount(inverse, minlength=len(ukeys))
        if np.any(counts > 2):
            bad = edges[np.argmax(counts > 2)]
            raise MeshError(f"edge {tuple(bad)} is shared by more than two triangles")
        edge_tris = np.full((len(ukeys), 2), -1, dtype=np.int64)
        edge_local = np.full((len(ukeys), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        tri_of = order // 3
        loc_of = order % 3
        sorted_edges = inverse[order]
        slot = np.zeros(len(order), dtype=np.int64)
        slot[1:] = sorted_edges[1:] == sorted_edges[:-1]
        edge_tris[sorted_edges, slot] = tri_of
        edge_local[sorted_edges, slot] = loc_of
        return cls(edges, tri_edges, edge_tris, edge_local, nv, ukeys)

    def lookup(self, pairs):
        """Global edge ids of vertex pairs; raises if a pair is not a mesh edge."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        query = pairs[:, 0] * self.radix + pairs[:, 1]
        pos = np.minimum(np.searchsorted(self._keys, query), len(self._keys) - 1)
        ok = self._keys[pos] == query
        if not np.all(ok):
            bad = pairs[np.argmin(ok)]
            raise MeshError(f"({bad[0]}, {bad[1]}) is not an edge of the mesh")
        return pos

    def boundary_edge_ids(self):
        return np.flatnonzero(self.edge_tris[:, 1] < 0)


def longest_edge_index(vertices, triangles):
    p = vertices[triangles]
    lengths = np.linalg.norm(p[:, LOCAL_EDGES[:, 1]] - p[:, LOCAL_EDGES[:, 0]], axis=2)
    # ties resolved towards the lowest local index; tolerance absorbs rounding
    longest = lengths.max(axis=1, keepdims=True)
    is_max = lengths >= longest * (1 - 1e-12)
    return np.argmax(is_max, axis=1)


def make_mesh(vertices, triangles, boundary_edges, boundary_markers, refinement_edge=None, level=0):
    """Build a Mesh and check all invariants."""
    vertices = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 2)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
    boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64).reshape(-1, 2)
    boundary_markers = np.asarray(boundary_markers, dtype="<U1").reshape(-1)
    if refinement_edge is None:
        refinement_edge = longest_edge_index(vertices, triangles)
    refinement_edge = np.ascontiguousarray(refinement_edge, dtype=np.int64)
    mesh = Mesh(vertices, triangles, boundary_edges, boundary_markers, refinement_edge, level)
    validate(mesh)
    return mesh


def validate(mesh):
    """Raise MeshError unless the mesh satisfies the structural invariants."""
    nv = mesh.n_vertices
    tri = mesh.triangles
    if len(tri) == 0:
        raise MeshError("mesh has no triangles")
    if tri.min() < 0 or tri.max() >= nv:
        raise MeshError("triangle references an unknown vertex")
    if np.any(tri[:, 0] == tri[:, 1]) or np.any(tri[:, 1] == tri[:, 2]) or np.any(tri[:, 0] == tri[:, 2]):
        raise MeshError("triangle with repeated vertex")
    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        k = int(np.argmax(areas <= 0))
        kind = "clockwise" if areas[k] < 0 else "degenerate"
        raise MeshError(f"triangle {k} is {kind} (signed area {areas[k]:.3g})")
    if len(mesh.refinement_edge) != len(tri) or np.any((mesh.refinement_edge < 0) | (mesh.refinement_edge > 2)):
        raise MeshError("invalid refinement edge indices")
    topo = mesh.topology
    bnd = topo.boundary_edge_ids()
    if len(mesh.boundary_markers) != len(mesh.boundary_edges):
        raise MeshError("boundary edge and marker counts differ")
    bad = ~np.isin(mesh.boundary_markers, MARKERS)
    if np.any(bad):
        raise MeshError(f"unknown boundary marker {mesh.boundary_markers[np.argmax(bad)]!r}")
    listed = topo.lookup(mesh.boundary_edges) if len(mesh.boundary_edges) else np.zeros(0, dtype=np.int64)
    if len(np.unique(listed)) != len(listed):
        raise MeshError("boundary edge listed twice")
    if not np.all(topo.edge_tris[listed, 1] < 0):
        raise MeshError("interior edge listed as boundary edge")
    missing = np.setdiff1d(bnd, listed)
    if len(missing):
        a, b = topo.edges[missing[0]]
        raise MeshError(f"boundary edge ({a}, {b}) has no marker")
    if not np.any(mesh.boundary_markers == DIRICHLET):
        raise MeshError("Dirichlet boundary is empty")


def min_angle(mesh):
    """Smallest interior angle of the mesh in degrees."""
    p = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    return float(np.min(angles))


def unit_square_mesh(n, layout="example61"):
    """Structured mesh of (0,1)^2 with every cell split along its (0,0)-(1,1) diagonal.

    ``layout`` is a preset name or a dict mapping the sides
    ``"bottom"``, ``"right"``, ``"top"``, ``"left"`` to markers.
    """
    if n < 1:
        raise MeshError("n must be at least 1")
    sides = LAYOUTS[layout] if isinstance(layout, str) else dict(layout)
    if set(sides) != {"bottom", "right", "top", "left"}:
        raise MeshError("layout must assign all four sides")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    edges, markers = [], []
    for i in range(n):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        markers.append(sides["bottom"])
    for j in range(n):
        edges.append((vid(n, j), vid(n, j + 1)))
        markers.append(sides["right"])
    for i in range(n, 0, -1):
        edges.append((vid(i, n), vid(i - 1, n)))
        markers.append(sides["top"])
    for j in range(n, 0, -1):
        edges.append((vid(0, j), vid(0, j - 1)))
        markers.append(sides["left"])
    return make_mesh(vertices, tris, edges, markers)


LAYOUTS = {
    "example61": {"bottom": CONTACT, "right": NEUMANN, "top": DIRICHLET, "left": NEUMANN},
    # Dirichlet at x = 0, obstacle acting on x = 1
    "example62": {"bottom": NEUMANN, "right": CONTACT, "top": NEUMANN, "left": DIRICHLET},
    "dirichlet": {"bottom": DIRICHLET, "right": DIRICHLET, "top": DIRICHLET, "left": DIRICHLET},
    "no_contact": {"bottom": NEUMANN, "right": NEUMANN, "top": DIRICHLET, "left": NEUMANN},
}


def nvb_refine(mesh, marked):
    """Bisect the marked triangles by newest vertex bisection, with closure.

    Children are stored with their newest vertex first, so their refinement
    edge is local edge 0.  Returns ``mesh`` itself when nothing is marked.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=np.int64))
    if len(marked) == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise IndexError("marked triangle index out of range")
    topo = mesh.topology
    m = mesh.n_triangles
    ref_global = topo.tri_edges[np.arange(m), mesh.refinement_edge]

    to_split = np.zeros(topo.n_edges, dtype=bool)
    to_split[ref_global[marked]] = True
    # closure: a triangle with any split edge must also split its refinement edge
    while True:
        touched = to_split[topo.tri_edges].any(axis=1)
        need = touched & ~to_split[ref_global]
        if not need.any():
            break
        to_split[ref_global[need]] = True

    split_ids = np.flatnonzero(to_split)
    new_vertex = np.full(topo.n_edges, -1, dtype=np.int64)
    new_vertex[split_ids] = mesh.n_vertices + np.arange(len(split_ids))
    mids = 0.5 * (mesh.vertices[topo.edges[split_ids, 0]] + mesh.vertices[topo.edges[split_ids, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    # rotate every triangle so that its refinement edge is opposite local vertex 0
    r = mesh.refinement_edge
    rows = np.arange(m)[:, None]
    perm = (r[:, None] + np.arange(3)[None, :]) % 3
    tri = mesh.triangles[rows, perm]
    tedges = topo.tri_edges[rows, perm]

    out = []
    for k in range(m):
        a, b, c = tri[k]
        e_bc, e_ca, e_ab = tedges[k]
        if not to_split[e_bc]:
            out.append((a, b, c))
            continue
        mv = new_vertex[e_bc]
        # children (m, a, b) and (m, c, a); their refinement edges ab, ca are old edges
        for child, edge in (((mv, a, b), e_ab), ((mv, c, a), e_ca)):
            if to_split[edge]:
                m2 = new_vertex[edge]
                x, y, z = child
                out.append((m2, x, y))
                out.append((m2, z, x))
            else:
                out.append(child)
    triangles = np.array(out, dtype=np.int64)

    b_edges, b_markers = [], []
    bid = topo.lookup(mesh.boundary_edges)
    for (a, b), mk, e in zip(mesh.boundary_edges, mesh.boundary_markers, bid):
        if to_split[e]:
            mv = new_vertex[e]
            b_edges += [(a, mv), (mv, b)]
            b_markers += [mk, mk]
        else:
            b_edges.append((a, b))
            b_markers.append(mk)
    refined = Mesh(
        vertices,
        triangles,
        np.array(b_edges, dtype=np.int64),
        np.array(b_markers, dtype="<U1"),
        # rotated parents and children alike carry their refinement edge at local index 0
        np.zeros(len(triangles), dtype=np.int64),
        mesh.level + 1,
    )
    return refined


def uniform_refine(mesh, times=1):
    """Halve the mesh size ``times`` times (two bisection sweeps each, 4 children per triangle)."""
    for _ in range(2 * times):
        mesh = nvb_refine(mesh, np.arange(mesh.n_triangles))
    return mesh


def is_conforming(mesh):
    try:
        validate(mesh)
    except MeshError:
        return False
    return True


def load_mesh(text):
    """Parse the ASCII ``$nodes`` / ``$triangles`` / ``$boundary`` format."""
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    pos = 0

    def section(name, ncols):
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"missing section ${name}", line=lines[-1][0] if lines else 1)
        lineno, header = lines[pos]
        parts = header.split()
        if parts[0] != f"${name}" or len(parts) != 2:
            raise MeshError(f"expected '${name} <count>', got {header!r}", line=lineno)
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshError(f"bad count {parts[1]!r}", line=lineno) from None
        pos += 1
        rows = []
        for k in range(count):
            if pos >= len(lines):
                raise MeshError(f"${name}: expected {count} rows, found {k}", line=lineno)
            lineno, body = lines[pos]
            parts = body.split()
            if len(parts) not in ncols:
                want = " or ".join(map(str, ncols))
                raise MeshError(f"${name}: expected {want} fields, got {len(parts)}", line=lineno)
            try:
                ident = int(parts[0])
            except ValueError:
                raise MeshError(f"bad id {parts[0]!r}", line=lineno) from None
            if ident != k:
                raise MeshError(f"${name}: ids must be 0-based and consecutive, expected {k} got {ident}", line=lineno)
            rows.append((lineno, parts[1:]))
            pos += 1
        return rows

    def ints(row, nv, what):
        lineno, parts = row
        try:
            vals = [int(v) for v in parts]
        except ValueError:
            raise MeshError(f"bad vertex index in {what}", line=lineno) from None
        if min(vals) < 0 or max(vals) >= nv:
            raise MeshError(f"{what} references unknown vertex", line=lineno)
        return vals

    node_rows = section("nodes", (3,))
    try:
        vertices = np.array([[float(a), float(b)] for _, (a, b) in node_rows], dtype=float).reshape(-1, 2)
    except ValueError:
        bad = next(ln for ln, p in node_rows if not all(_is_float(v) for v in p))
        raise MeshError("bad coordinate", line=bad) from None
    nv = len(vertices)
    tri_rows = section("triangles", (4, 5))
    triangles = np.array([ints((ln, parts[:3]), nv, "triangle") for ln, parts in tri_rows], dtype=np.int64).reshape(-1, 3)
    p = vertices[triangles]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    for k, a in enumerate(areas):
        if a <= 0:
            kind = "clockwise" if a < 0 else "degenerate"
            raise MeshError(f"triangle {k} is {kind} (signed area {a:.3g})", line=tri_rows[k][0])
    # optional fifth column: local index of the refinement edge (default: longest edge)
    refinement = longest_edge_index(vertices, triangles)
    for k, (lineno, parts) in enumerate(tri_rows):
        if len(parts) == 4:
            if parts[3] not in ("0", "1", "2"):
                raise MeshError(f"refinement edge must be 0, 1 or 2, got {parts[3]!r}", line=lineno)
            refinement[k] = int(parts[3])
    b_rows = section("boundary", (4,))
    b_edges, b_markers = [], []
    for lineno, parts in b_rows:
        b_edges.append(ints((lineno, parts[:2]), nv, "boundary edge"))
        if parts[2] not in MARKERS:
            raise MeshError(f"unknown marker {parts[2]!r}", line=lineno)
        b_markers.append(parts[2])
    if pos != len(lines):
        raise MeshError("unexpected trailing content", line=lines[pos][0])
    try:
        return make_mesh(vertices, triangles, b_edges, b_markers, refinement_edge=refinement)
    except MeshError as exc:
        raise MeshError(str(exc), line=_blame_line(exc, tri_rows, b_rows, triangles, b_edges)) from None


def _is_float(v):
    try:
        float(v)
    except ValueError:
        return False
    return True


def _blame_line(exc, tri_rows, b_rows, triangles, b_edges):
    msg = str(exc)
    # edge-level errors point at the boundary row or the first triangle using the edge
    found = re.search(r"\((\d+), (\d+)\)", msg)
    if found:
        pair = {int(found.group(1)), int(found.group(2))}
        for (lineno, _), (a, b) in zip(b_rows, b_edges):
            if {a, b} == pair:
                return lineno
        for (lineno, _), t in zip(tri_rows, triangles):
            if pair <= set(int(v) for v in t):
                return lineno
    return tri_rows[0][0] if tri_rows else None


def format_mesh(mesh):
    """Inverse of :func:`load_mesh`."""
    out = [f"$nodes {mesh.n_vertices}"]
    out += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    out.append(f"$triangles {mesh.n_triangles}")
    out += [f"{i} {a} {b} {c} {r}" for i, ((a, b, c), r) in enumerate(zip(mesh.triangles.tolist(), mesh.refinement_edge.tolist()))]
    out.append(f"$boundary {len(mesh.boundary_edges)}")
    out += [
        f"{i} {a} {b} {mk}"
        for i, ((a, b), mk) in enumerate(zip(mesh.boundary_edges.tolist(), mesh.boundary_markers.tolist()))
    ]
    return "\n".join(out) + "\n"
