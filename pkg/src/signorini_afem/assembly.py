"""Isotropic elasticity: stiffness matrix, load vector and Dirichlet elimination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import p2_basis, p2_basis_dlambda, vector_field
from .mesh import NEUMANN
from .quadrature import LINE3, TRI_DEG4


@dataclass(frozen=True)
class MaterialParams:
    """Lamé parameters: ``mu`` (shear modulus) and ``chi`` (first parameter)."""

    mu: float
    chi: float

    def __post_init__(self):
        if not (self.mu > 0 and self.chi > 0):
            raise ValueError(f"Lamé parameters must be positive, got mu={self.mu}, chi={self.chi}")

    def elasticity_matrix(self):
        """Voigt matrix acting on (e11, e22, 2 e12)."""
        mu, chi = self.mu, self.chi
        return np.array([[chi + 2 * mu, chi, 0.0], [chi, chi + 2 * mu, 0.0], [0.0, 0.0, mu]])


def lame_from_young_poisson(E, nu):
    if E <= 0:
        raise ValueError("Young's modulus must be positive")
    if not 0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (0, 0.5), got {nu}")
    return MaterialParams(mu=E / (2 * (1 + nu)), chi=E * nu / ((1 - 2 * nu) * (1 + nu)))


def stress(strain, material):
    """sigma = chi tr(eps) I + 2 mu eps, for strains of shape (..., 2, 2)."""
    strain = np.asarray(strain, dtype=float)
    tr = strain[..., 0, 0] + strain[..., 1, 1]
    return material.chi * tr[..., None, None] * np.eye(2) + 2 * material.mu * strain


def stress_from_gradient(grad, material):
    return stress(0.5 * (grad + np.swapaxes(grad, -1, -2)), material)


@dataclass
class LinearSystem:
    """Stiffness and load restricted to the free dofs.

    ``lifting`` is a full-length vector holding the Dirichlet values; the
    full solution is ``lifting`` with ``free`` entries replaced.
    """

    K: sp.csr_matrix
    F: np.ndarray
    free: np.ndarray
    lifting: np.ndarray

    def expand(self, x_free):
        full = self.lifting.copy()
        full[self.free] = x_free
        return full


def _strain_operator(space, bary):
    """B matrices (M, Q, 3, 12) mapping local vector dofs to (e11, e22, 2 e12)."""
    dphi = p2_basis_dlambda(bary)
    grad_phi = np.einsum("qka,mad->mqkd", dphi, space.grad_lambda)  # (M, Q, 6, 2)
    m, q = grad_phi.shape[:2]
    B = np.zeros((m, q, 3, 12))
    B[:, :, 0, 0::2] = grad_phi[..., 0]
    B[:, :, 1, 1::2] = grad_phi[..., 1]
    B[:, :, 2, 0::2] = grad_phi[..., 1]
    B[:, :, 2, 1::2] = grad_phi[..., 0]
    return B


def local_dofs(space):
    cn = space.cell_nodes
    return np.stack([2 * cn, 2 * cn + 1], axis=-1).reshape(len(cn), 12)


def assemble_stiffness(space, material):
    """Global stiffness matrix over all vector dofs (CSR)."""
    bary, w = TRI_DEG4
    B = _strain_operator(space, bary)
    D = material.elasticity_matrix()
    Ke = np.einsum("q,m,mqai,ab,mqbj->mij", w, space.areas, B, D, B)
    dofs = local_dofs(space)
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs)).tocsr()
    K.sum_duplicates()
    return K


def assemble_load(space, f=None, g=None):
    """Load vector for a volume force ``f(x, y)`` and a traction ``g(x, y, n)`` on Neumann edges."""
    F = np.zeros(space.n_dofs)
    if f is not None:
        bary, w = TRI_DEG4
        phi = p2_basis(bary)  # (Q, 6)
        pts = space.physical_points(bary)
        fv = vector_field(f, pts[..., 0], pts[..., 1])  # (M, Q, 2)
        Fe = np.einsum("q,m,qk,mqc->mkc", w, space.areas, phi, fv)
        np.add.at(F, local_dofs(space).ravel(), Fe.reshape(-1))
    if g is not None:
        sel = space.edge_markers[space.boundary_edge_ids] == NEUMANN
        if sel.any():
            F += _edge_load(space, space.boundary_edge_ids[sel], space.bnd_normal[sel], space.bnd_length[sel], g)
    return F


def edge_shape(t):
    """Quadratic Lagrange functions on [0, 1] at (start, midpoint, end)."""
    return np.stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)], axis=-1)


def _edge_load(space, edge_ids, normals, lengths, g):
    t, w = LINE3
    nodes = space.edge_nodes[edge_ids]  # (E, 3)
    a = space.coords[nodes[:, 0]]
    b = space.coords[nodes[:, 2]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    nx = np.broadcast_to(normals[:, None, 0], pts.shape[:2])
    ny = np.broadcast_to(normals[:, None, 1], pts.shape[:2])
    gx, gy = g(pts[..., 0], pts[..., 1], (nx, ny))
    gv = np.stack(np.broadcast_arrays(gx, gy, pts[..., 0])[:2], axis=-1)
    N = edge_shape(t)  # (Q, 3)
    Fe = np.einsum("q,e,qk,eqc->ekc", w, lengths, N, gv)
    F = np.zeros(space.n_dofs)
    dofs = np.stack([2 * nodes, 2 * nodes + 1], axis=-1)
    np.add.at(F, dofs.ravel(), Fe.ravel())
    return F


def constrain_system(K, F, space, dirichlet=None):
    """Eliminate Dirichlet dofs; ``dirichlet(x, y) -> (ux, uy)`` gives the data (zero if None)."""
    lifting = np.zeros(space.n_dofs)
    if dirichlet is not None:
        nodes = space.dirichlet_nodes
        vals = vector_field(dirichlet, space.coords[nodes, 0], space.coords[nodes, 1])
        lifting[2 * nodes] = vals[:, 0]
        lifting[2 * nodes + 1] = vals[:, 1]
    free = space.free_dofs
    K = sp.csr_matrix(K)
    rhs = F - K @ lifting
    Kff = K[free][:, free].tocsr()
    return LinearSystem(Kff, rhs[free], free, lifting)
