"""Discrete contact force density on the contact boundary.

The auxiliary boundary space is piecewise linear on the half-edge
subdivision of the contact edges; its nodes coincide with the P2 contact
nodes, so all maps between the two spaces act as the identity on nodal
values and are never formed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class NodeClass(enum.IntEnum):
    FULL_CONTACT = 0
    SEMI_CONTACT = 1
    NO_CONTACT = 2


class DensityError(RuntimeError):
    pass


@dataclass
class ContactDensity:
    nodes: np.ndarray          # contact scalar nodes
    s1: np.ndarray             # normal density, >= 0
    s2: np.ndarray             # tangential density, identically 0
    lump_weights: np.ndarray   # integral of the boundary hat function
    classes: np.ndarray        # NodeClass per node (filled by classify_nodes)
    edges: np.ndarray          # contact edges as (start, mid, end) node triples
    positions: np.ndarray      # tangential coordinate of every scalar node
    traction: np.ndarray = None  # residual / int psi_p per scalar node (zero off the contact nodes)

    def index_of(self, nodes):
        lookup = {int(n): i for i, n in enumerate(self.nodes)}
        return np.array([lookup[int(n)] for n in np.atleast_1d(nodes)], dtype=np.int64)


def lump_weights(space):
    """Integral of each boundary hat function over the contact edges around its node."""
    edges = space.contact_edges
    if len(edges) == 0:
        raise ValueError("the contact boundary is empty")
    h = np.abs(space.tangential_coordinate(edges[:, 2]) - space.tangential_coordinate(edges[:, 0]))
    w = np.zeros(space.n_nodes)
    # endpoint hats live on one half-edge (h/4), the midpoint hat on both halves (h/2)
    np.add.at(w, edges[:, 0], h / 4)
    np.add.at(w, edges[:, 2], h / 4)
    np.add.at(w, edges[:, 1], h / 2)
    return w[space.contact_nodes]


def p2_boundary_weights(space):
    """Integral of the P2 boundary shape function of each node over the contact edges."""
    edges = space.contact_edges
    h = np.abs(space.tangential_coordinate(edges[:, 2]) - space.tangential_coordinate(edges[:, 0]))
    w = np.zeros(space.n_nodes)
    np.add.at(w, edges[:, 0], h / 6)
    np.add.at(w, edges[:, 2], h / 6)
    np.add.at(w, edges[:, 1], 2 * h / 3)
    return w[space.contact_nodes]


def residual(K, F, coeffs):
    """Linear residual L(psi_i) - a(u_h, psi_i) for every vector dof."""
    return F - K @ coeffs


def discrete_contact_density(space, solution, K, F, rtol=1e-8):
    """Nodal values of the discrete contact force density.

    ``K`` and ``F`` are the unconstrained stiffness and load over all dofs.
    The tangential residual at contact nodes must vanish; a violation
    signals an unconverged solve.
    """
    nodes = space.contact_nodes
    w = lump_weights(space)
    r = residual(K, F, solution.coeffs)
    k = space.contact_axis
    normal_res = space.contact_sign * r[2 * nodes + k]
    tangential_res = r[2 * nodes + (1 - k)]
    scale = max(np.abs(F).max(), np.abs(K @ solution.coeffs).max(), 1e-300)
    if len(nodes) and np.abs(tangential_res).max() > rtol * scale:
        raise DensityError(f"tangential residual {np.abs(tangential_res).max():.3e} at contact nodes does not vanish")
    s1 = normal_res / w
    traction = np.zeros(space.n_nodes)
    traction[nodes] = normal_res / p2_boundary_weights(space)
    return ContactDensity(
        nodes=nodes,
        s1=s1,
        s2=np.zeros_like(s1),
        lump_weights=w,
        classes=np.full(len(nodes), NodeClass.NO_CONTACT, dtype=np.int8),
        edges=space.contact_edges,
        positions=space.coords[:, space.tangent_axis].copy(),
        traction=traction,
    )


def normal_defect(space, coeffs, gap):
    """u.n(p) - g(p) at the contact nodes (<= 0 when admissible)."""
    u = np.asarray(coeffs)
    return space.contact_sign * u[2 * gap.nodes + space.contact_axis] - gap.values


def classify_nodes(space, solution, gap, tol=None, length_scale=1.0):
    """Full / semi / no contact classification of the contact nodes."""
    tol = 1e-8 * length_scale if tol is None else tol
    d = np.zeros(space.n_nodes)
    d[gap.nodes] = normal_defect(space, solution.coeffs, gap)
    nodes = space.contact_nodes
    opened = np.abs(d) > tol
    # the patch of a vertex is its two adjacent half-edges (nodes: itself and the
    # neighbouring midpoints); the patch of a midpoint is its whole edge
    a, m, b = space.contact_edges.T
    seen = opened.copy()
    np.logical_or.at(seen, a, opened[m])
    np.logical_or.at(seen, b, opened[m])
    np.logical_or.at(seen, m, opened[a] | opened[b])
    touching = seen[nodes]
    classes = np.where(touching, NodeClass.SEMI_CONTACT, NodeClass.FULL_CONTACT).astype(np.int8)
    classes[d[nodes] < -tol] = NodeClass.NO_CONTACT
    return classes


def quasi_density_value(density, x):
    """Evaluate the piecewise linear density sum_z s1_z phi_z at tangential coordinate(s) x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s1 = np.zeros(int(density.edges.max()) + 1)
    s1[density.nodes] = density.s1
    pos = density.positions
    # half-edge breakpoints in order along the contact line
    a, m, b = density.edges[:, 0], density.edges[:, 1], density.edges[:, 2]
    knots = np.column_stack([pos[a], pos[m]]).ravel()
    knots = np.append(knots, pos[b[-1]])
    vals = np.column_stack([s1[a], s1[m]]).ravel()
    vals = np.append(vals, s1[b[-1]])
    lo, hi = knots[0], knots[-1]
    span = hi - lo
    if np.any((x < lo - 1e-12 * span) | (x > hi + 1e-12 * span)):
        raise ValueError("point is not on the contact boundary")
    out = np.interp(x, knots, vals)
    return out if out.size > 1 else float(out[0])


def density_profile(density):
    """Rows (tangential coordinate, s1) sorted along the contact boundary."""
    pos = density.positions[density.nodes]
    order = np.argsort(pos)
    return np.column_stack([pos[order], density.s1[order]])
