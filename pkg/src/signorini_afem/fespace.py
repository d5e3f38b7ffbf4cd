"""Vector P2 Lagrange space: node numbering, basis functions, boundary classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CONTACT, DIRICHLET, LOCAL_EDGES, NEUMANN, MeshError

INTERIOR, NEUMANN_NODE, CONTACT_NODE, DIRICHLET_NODE = 0, 1, 2, 3


def p2_basis(bary):
    """P2 shape functions at barycentric points, shape (..., 6).

    Order: the three vertices, then the midpoints of the edges opposite
    vertex 0, 1, 2.
    """
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1],
        axis=-1,
    )


def p2_basis_dlambda(bary):
    """Derivatives of the shape functions with respect to (l0, l1, l2), shape (..., 6, 3)."""
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    z = np.zeros_like(l0)
    rows = [
        [4 * l0 - 1, z, z],
        [z, 4 * l1 - 1, z],
        [z, z, 4 * l2 - 1],
        [z, 4 * l2, 4 * l1],
        [4 * l2, z, 4 * l0],
        [4 * l1, 4 * l0, z],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


# second derivatives d^2 psi / (dl_a dl_b), constant
_P2_HESS_LAMBDA = np.zeros((6, 3, 3))
for _i in range(3):
    _P2_HESS_LAMBDA[_i, _i, _i] = 4.0
for _k, (_a, _b) in enumerate(LOCAL_EDGES):
    _P2_HESS_LAMBDA[3 + _k, _a, _b] = 4.0
    _P2_HESS_LAMBDA[3 + _k, _b, _a] = 4.0


def barycentric_gradients(vertices, triangles):
    """Gradients of the barycentric coordinates, shape (M, 3, 2), and areas (M,)."""
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    g0 = -g1 - g2
    return np.stack([g0, g1, g2], axis=1), 0.5 * det


def vector_field(func, x, y):
    """Evaluate a callable returning a pair of components into shape (..., 2)."""
    fx, fy = func(x, y)
    shape = np.broadcast(x, y).shape
    return np.stack([np.broadcast_to(fx, shape), np.broadcast_to(fy, shape)], axis=-1).astype(float)


@dataclass(frozen=True)
class GapVector:
    """Gap g(p) per contact node: the admissible set is u.n(p) <= g(p)."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("gap values must be finite")


class FeSpace:
    """Continuous vector P2 space on a mesh.

    Scalar nodes are the mesh vertices followed by the edge midpoints (in
    edge order); the vector dof of component ``c`` at node ``p`` is
    ``2 * p + c``.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        topo = mesh.topology
        self.topology = topo
        nv = mesh.n_vertices
        self.n_vertices = nv
        self.n_nodes = nv + topo.n_edges
        self.n_dofs = 2 * self.n_nodes
        self.coords = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[topo.edges[:, 0]] + mesh.vertices[topo.edges[:, 1]])])
        self.cell_nodes = np.hstack([mesh.triangles, nv + topo.tri_edges])
        self.grad_lambda, self.areas = barycentric_gradients(mesh.vertices, mesh.triangles)
        self.diameters = mesh.diameters()

        markers = mesh.marker_of_edges()
        self.edge_markers = markers
        self.boundary_edge_ids = topo.boundary_edge_ids()
        # node triple (start, midpoint, end) of every edge, following sorted vertex order
        self.edge_nodes = np.column_stack([topo.edges[:, 0], nv + np.arange(topo.n_edges), topo.edges[:, 1]])

        on = {}
        for mk in (DIRICHLET, NEUMANN, CONTACT):
            flag = np.zeros(self.n_nodes, dtype=bool)
            flag[self.edge_nodes[markers == mk].ravel()] = True
            on[mk] = flag
        self.on_dirichlet, self.on_neumann, self.on_contact = on[DIRICHLET], on[NEUMANN], on[CONTACT]
        if not self.on_dirichlet.any():
            raise MeshError("Dirichlet boundary is empty")

        cls = np.full(self.n_nodes, INTERIOR, dtype=np.int8)
        cls[self.on_neumann] = NEUMANN_NODE
        cls[self.on_contact] = CONTACT_NODE
        cls[self.on_dirichlet] = DIRICHLET_NODE
        self.node_class = cls
        self.dirichlet_nodes = np.flatnonzero(cls == DIRICHLET_NODE)
        self.contact_nodes = np.flatnonzero(cls == CONTACT_NODE)
        free_nodes = np.flatnonzero(cls != DIRICHLET_NODE)
        self.free_dofs = np.sort(np.concatenate([2 * free_nodes, 2 * free_nodes + 1]))
        self.dirichlet_dofs = np.sort(np.concatenate([2 * self.dirichlet_nodes, 2 * self.dirichlet_nodes + 1]))

        self._setup_boundary()

    # ------------------------------------------------------------------
    def _setup_boundary(self):
        topo = self.topology
        ids = self.boundary_edge_ids
        tri = topo.edge_tris[ids, 0]
        loc = topo.edge_local[ids, 0]
        a = self.mesh.vertices[topo.edges[ids, 0]]
        b = self.mesh.vertices[topo.edges[ids, 1]]
        opp = self.mesh.vertices[self.mesh.triangles[tri, loc]]
        t = b - a
        length = np.linalg.norm(t, axis=1)
        n = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
        flip = np.einsum("ij,ij->i", n, opp - a) > 0
        n[flip] *= -1
        self.bnd_tri = tri
        self.bnd_local = loc
        self.bnd_normal = n
        self.bnd_length = length

        is_c = self.edge_markers[ids] == CONTACT
        self.contact_edge_ids = ids[is_c]
        if not is_c.any():
            self.contact_axis = None
            self.contact_sign = 0.0
            self.contact_normal = None
            self.contact_edges = np.zeros((0, 3), dtype=np.int64)
            self.contact_edge_tri = np.zeros(0, dtype=np.int64)
            self.contact_line = None
            return
        normals = n[is_c]
        ref = normals[0]
        axis = int(np.argmax(np.abs(ref)))
        if abs(abs(ref[axis]) - 1.0) > 1e-10 or np.abs(normals - ref).max() > 1e-10:
            raise MeshError("contact boundary must be a straight axis-aligned segment with constant normal")
        self.contact_axis = axis
        self.contact_sign = float(np.sign(ref[axis]))
        self.contact_normal = np.round(ref)
        tangent_axis = 1 - axis
        line = self.mesh.vertices[topo.edges[self.contact_edge_ids].ravel(), axis]
        if np.ptp(line) > 1e-12:
            raise MeshError("contact edges must be collinear")
        self.contact_line = float(line[0])
        self.tangent_axis = tangent_axis
        nodes = self.edge_nodes[self.contact_edge_ids].copy()
        s = self.coords[:, tangent_axis]
        rev = s[nodes[:, 0]] > s[nodes[:, 2]]
        nodes[rev] = nodes[rev][:, ::-1]
        order = np.argsort(s[nodes[:, 0]])
        self.contact_edges = nodes[order]
        self.contact_edge_tri = tri[is_c][order]
        self.contact_edge_ids = self.contact_edge_ids[order]

    # ------------------------------------------------------------------
    def tangential_coordinate(self, nodes):
        return self.coords[nodes, self.tangent_axis]

    def normal_dofs(self, nodes=None):
        """Vector dofs carrying the normal displacement of the given contact nodes."""
        nodes = self.contact_nodes if nodes is None else nodes
        return 2 * np.asarray(nodes) + self.contact_axis

    def interpolate(self, func):
        """Nodal interpolant of a vector field ``func(x, y) -> (fx, fy)``."""
        vals = vector_field(func, self.coords[:, 0], self.coords[:, 1])
        return vals.reshape(-1)

    def evaluate(self, coeffs, tri, bary):
        """Value of the P2 field at a barycentric point of triangle ``tri``."""
        if not 0 <= tri < self.mesh.n_triangles:
            raise IndexError(f"triangle {tri} out of range")
        bary = np.asarray(bary, dtype=float)
        phi = p2_basis(bary)
        u = np.asarray(coeffs).reshape(-1, 2)[self.cell_nodes[tri]]
        return phi @ u

    def physical_points(self, bary):
        """Map barycentric points (Q, 3) to physical points (M, Q, 2)."""
        p = self.mesh.vertices[self.mesh.triangles]
        return np.einsum("qi,mid->mqd", bary, p)

    def local_values(self, coeffs):
        """Element nodal values, shape (M, 6, 2)."""
        return np.asarray(coeffs).reshape(-1, 2)[self.cell_nodes]

    def gradients(self, coeffs, bary):
        """Displacement gradients du_i/dx_j at barycentric points, shape (M, Q, 2, 2)."""
        dphi = p2_basis_dlambda(bary)  # (Q, 6, 3)
        grad_phi = np.einsum("qka,mad->mqkd", dphi, self.grad_lambda)  # (M, Q, 6, 2)
        return np.einsum("mki,mqkd->mqid", self.local_values(coeffs), grad_phi)

    def gradients_at(self, coeffs, tris, bary):
        """Gradients at per-row barycentric points: ``tris`` (N,), ``bary`` (N, Q, 3) -> (N, Q, 2, 2)."""
        dphi = p2_basis_dlambda(bary)  # (N, Q, 6, 3)
        grad_phi = np.einsum("nqka,nad->nqkd", dphi, self.grad_lambda[tris])
        vals = np.asarray(coeffs).reshape(-1, 2)[self.cell_nodes[tris]]  # (N, 6, 2)
        return np.einsum("nki,nqkd->nqid", vals, grad_phi)

    def hessians(self, coeffs):
        """Second derivatives d^2 u_i/(dx_j dx_k) per element, shape (M, 2, 2, 2)."""
        g = self.grad_lambda
        hphi = np.einsum("kab,maj,mbl->mkjl", _P2_HESS_LAMBDA, g, g)
        return np.einsum("mki,mkjl->mijl", self.local_values(coeffs), hphi)


def build_space(mesh):
    return FeSpace(mesh)


def contact_gap(space, obstacle):
    """Gap vector from an obstacle given as a function of the tangential coordinate."""
    nodes = space.contact_nodes
    if len(nodes) == 0:
        return GapVector(nodes, np.zeros(0))
    s = space.tangential_coordinate(nodes)
    vals = np.broadcast_to(np.asarray(obstacle(s), dtype=float), s.shape).copy()
    return GapVector(nodes, vals)
