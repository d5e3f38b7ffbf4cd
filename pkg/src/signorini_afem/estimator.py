"""Residual a posteriori error estimator for the discrete contact problem.

Contributions per node ``p`` (``h_p`` the largest element diameter in the
patch ``omega_p`` of ``p``):

    eta1_p = h_p     ||f + div sigma(u_h)||        on omega_p
    eta2_p = h_p^1/2 ||[[sigma(u_h) n]]||           on interior edges through p
    eta3_p = h_p^1/2 ||g - sigma(u_h) n||           on Neumann edges through p
    eta4_p = h_p^1/2 ||tangential contact stress||  on contact edges through p
    eta5_p = h_p^1/2 ||normal contact stress term|| on contact edges through p
    eta6_p = (s_p d_p)^1/2                          semi-contact nodes only

and the global penetration term eta7 = ||(u_n - g)^+||_{H^1/2}.  Nodes on
the Dirichlet boundary carry no contributions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import hhalf
from .assembly import edge_shape, stress_from_gradient
from .contact_force import NodeClass
from .fespace import DIRICHLET_NODE, vector_field
from .mesh import CONTACT, NEUMANN
from .quadrature import LINE3, TRI_DEG4, gauss_line

log = logging.getLogger(__name__)

ETA5_MODES = ("consistent", "literal")
NAMES = ("eta1", "eta2", "eta3", "eta4", "eta5", "eta6", "eta7")


class EstimatorError(RuntimeError):
    pass


@dataclass
class EstimatorReport:
    per_node: np.ndarray            # (n_nodes, 6) eta_{k,p}, k = 1..6
    totals: dict                    # eta1..eta7 and eta
    element_indicators: np.ndarray  # (M,) squared marking indicators
    osc_f: float
    osc_g: float
    eta7_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))  # squared share per contact edge

    @property
    def eta(self):
        return self.totals["eta"]

    def rows(self):
        """Flat (kind, id, value) table: node contributions, elements, eta7 shares."""
        out = []
        nodes, ks = np.nonzero(self.per_node)
        for p, k in zip(nodes, ks):
            out.append((f"eta{k + 1}", int(p), float(self.per_node[p, k])))
        for e, v in enumerate(self.eta7_edges):
            if v:
                out.append(("eta7_edge_sq", e, float(v)))
        for t, v in enumerate(self.element_indicators):
            out.append(("element_sq", t, float(v)))
        return out


def format_report(report):
    lines = ["# kind id value"]
    lines += [f"{k} {i} {v:.12e}" for k, i, v in report.rows()]
    lines.append("# totals " + " ".join(f"{k}={v:.12e}" for k, v in report.totals.items()))
    lines.append(f"# osc_f={report.osc_f:.12e} osc_g={report.osc_g:.12e}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# element and edge quantities

def div_stress(space, coeffs, material):
    """div sigma(u_h) per element (constant for P2 and constant coefficients), shape (M, 2)."""
    H = space.hessians(coeffs)  # H[m, i, j, k] = d^2 u_i / dx_j dx_k
    grad_div = np.einsum("mkki->mi", H)
    lap = np.einsum("mijj->mi", H)
    return (material.chi + material.mu) * grad_div + material.mu * lap


def interior_residual(space, coeffs, material, f=None):
    """||f + div sigma(u_h)||_{L2(T)} for every element."""
    bary, w = TRI_DEG4
    r = np.broadcast_to(div_stress(space, coeffs, material)[:, None, :], (space.mesh.n_triangles, len(w), 2))
    if f is not None:
        pts = space.physical_points(bary)
        r = r + vector_field(f, pts[..., 0], pts[..., 1])
    return np.sqrt(space.areas * np.einsum("q,mqc->m", w, r**2))


def _bary_of_points(space, tris, pts):
    """Barycentric coordinates of points (N, Q, 2) in triangles ``tris`` (N,)."""
    v0 = space.mesh.vertices[space.mesh.triangles[tris, 0]]
    g = space.grad_lambda[tris]  # (N, 3, 2)
    lam = np.einsum("nad,nqd->nqa", g, pts - v0[:, None, :])
    lam[..., 0] += 1.0
    return lam


def _stress_at(space, coeffs, material, tris, pts):
    G = space.gradients_at(coeffs, tris, _bary_of_points(space, tris, pts))
    return stress_from_gradient(G, material)


def _edge_points(space, edge_ids, t):
    ends = space.mesh.vertices[space.topology.edges[edge_ids]]
    a, b = ends[:, 0], ends[:, 1]
    return a[:, None, :] + t[None, :, None] * (b - a)[:, None, :], np.linalg.norm(b - a, axis=1)


def interior_jumps(space, coeffs, material):
    """Squared L2 norms of [[sigma n]] on interior edges; returns (edge_ids, values)."""
    topo = space.topology
    ids = np.flatnonzero(topo.edge_tris[:, 1] >= 0)
    t, w = LINE3
    pts, length = _edge_points(space, ids, t)
    tp, tm = topo.edge_tris[ids, 0], topo.edge_tris[ids, 1]
    d = pts[:, -1] - pts[:, 0]
    n = np.column_stack([d[:, 1], -d[:, 0]])
    n /= np.linalg.norm(n, axis=1)[:, None]
    opp = space.mesh.vertices[space.mesh.triangles[tp, topo.edge_local[ids, 0]]]
    flip = np.einsum("ij,ij->i", n, opp - pts[:, 0]) > 0
    n[flip] *= -1
    jump = np.einsum("nqij,nj->nqi", _stress_at(space, coeffs, material, tp, pts) - _stress_at(space, coeffs, material, tm, pts), n)
    return ids, length * np.einsum("q,nqi->n", w, jump**2)


def neumann_jumps(space, coeffs, material, g=None):
    """Squared L2 norms of g - sigma n on Neumann edges; returns (positions in the boundary list, values)."""
    sel = np.flatnonzero(space.edge_markers[space.boundary_edge_ids] == NEUMANN)
    if len(sel) == 0:
        return sel, np.zeros(0)
    t, w = LINE3
    ids = space.boundary_edge_ids[sel]
    pts, length = _edge_points(space, ids, t)
    n = space.bnd_normal[sel]
    sn = np.einsum("nqij,nj->nqi", _stress_at(space, coeffs, material, space.bnd_tri[sel], pts), n)
    if g is not None:
        nx = np.broadcast_to(n[:, None, 0], pts.shape[:2])
        ny = np.broadcast_to(n[:, None, 1], pts.shape[:2])
        gx, gy = g(pts[..., 0], pts[..., 1], (nx, ny))
        sn = np.stack(np.broadcast_arrays(gx, gy), axis=-1) - sn
    else:
        sn = -sn
    return sel, length * np.einsum("q,nqi->n", w, sn**2)


def _half_edge_rule():
    t, w = gauss_line(3)
    return np.concatenate([0.5 * t, 0.5 + 0.5 * t]), np.concatenate([0.5 * w, 0.5 * w])


def contact_jumps(space, coeffs, material, density=None, eta5_mode="consistent"):
    """Squared L2 norms of the tangential and normal contact stress terms per contact edge.

    The normal term is sigma_nn(u_h) plus the contact traction recovered
    from the residual (nodal values ``density.traction`` interpolated by
    the P2 edge shapes) in the "consistent" mode, and sigma_nn(u_h) alone in
    the "literal" mode.  Edges follow ``space.contact_edges``.
    """
    if eta5_mode not in ETA5_MODES:
        raise ValueError(f"eta5_mode must be one of {ETA5_MODES}")
    edges = space.contact_edges
    if len(edges) == 0:
        return np.zeros(0), np.zeros(0)
    t, w = _half_edge_rule()
    a = space.coords[edges[:, 0]]
    b = space.coords[edges[:, 2]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    length = np.linalg.norm(b - a, axis=1)
    n = np.asarray(space.contact_normal, dtype=float)
    tan = np.array([-n[1], n[0]])
    sn = np.einsum("nqij,j->nqi", _stress_at(space, coeffs, material, space.contact_edge_tri, pts), n)
    s_tan = sn @ tan
    s_nor = sn @ n
    if eta5_mode == "consistent" and density is not None:
        s_nor = s_nor + density.traction[edges] @ edge_shape(t).T
    return length * (s_tan**2 @ w), length * (s_nor**2 @ w)


# ----------------------------------------------------------------------
# contact terms

def contact_defect(space, coeffs, obstacle):
    """u_n - g at the (start, mid, end) nodes of every contact edge, shape (E, 3)."""
    nodes = space.contact_edges
    u = np.asarray(coeffs)
    s = space.coords[nodes, space.tangent_axis]
    g = np.broadcast_to(np.asarray(obstacle(s), dtype=float), s.shape)
    return space.contact_sign * u[2 * nodes + space.contact_axis] - g


def _positive_integral(coef, t0, t1, weight):
    """int_{t0}^{t1} (q(t))^+ weight(t) dt for a quadratic q, splitting at its roots."""
    x, w = gauss_line(4)
    cuts = [t0] + [t0 + (t1 - t0) * r for r in hhalf._roots01(hhalf.restrict(coef, t0, t1))] + [t1]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        tt = lo + (hi - lo) * x
        q = hhalf.polyval(coef, tt)
        if hhalf.polyval(coef, 0.5 * (lo + hi)) > 0:
            total += (hi - lo) * np.sum(w * q * weight(tt))
    return total


def opening_integrals(space, defect):
    """d_p = int over the inner third of the patch of (g - u_n)^+ phi_p, for every contact edge node.

    Returns a dict node -> d_p.  The inner third is [0, 1/6] and [5/6, 1] of
    each incident edge for a vertex and [1/3, 2/3] of its edge for a midpoint.
    """
    coef = hhalf.quadratic_coefficients(-np.asarray(defect))
    length = np.abs(space.tangential_coordinate(space.contact_edges[:, 2]) - space.tangential_coordinate(space.contact_edges[:, 0]))
    d = {}
    for e, (a, m, b) in enumerate(space.contact_edges):
        c = coef[e]
        h = length[e]
        d[int(a)] = d.get(int(a), 0.0) + h * _positive_integral(c, 0.0, 1.0 / 6.0, lambda t: 1 - 2 * t)
        d[int(b)] = d.get(int(b), 0.0) + h * _positive_integral(c, 5.0 / 6.0, 1.0, lambda t: 2 * t - 1)
        d[int(m)] = h * (_positive_integral(c, 1.0 / 3.0, 0.5, lambda t: 2 * t) + _positive_integral(c, 0.5, 2.0 / 3.0, lambda t: 2 - 2 * t))
    return d


def eta_six(space, density, defect, tol=1e-10):
    """eta6_p for every contact node (zero unless semi-contact)."""
    s1 = density.s1
    scale = max(1.0, np.abs(s1).max() if len(s1) else 0.0)
    sc = density.classes == NodeClass.SEMI_CONTACT
    if np.any(s1[sc] < -tol * scale):
        raise EstimatorError(f"negative contact density {s1[sc].min():.3e} at a semi-contact node")
    out = np.zeros(len(density.nodes))
    if not sc.any():
        return out
    d = opening_integrals(space, defect)
    for i in np.flatnonzero(sc):
        out[i] = np.sqrt(max(s1[i], 0.0) * d.get(int(density.nodes[i]), 0.0))
    return out


def penetration_panels(space, defect):
    """Panels of (u_n - g)^+ along the contact boundary."""
    s = space.tangential_coordinate(space.contact_edges)
    return hhalf.positive_part(hhalf.trace_panels(s[:, 0], s[:, 2], defect))


def eta_seven(space, defect):
    """eta7 and its squared shares per contact edge."""
    shares = np.zeros(len(space.contact_edges))
    if len(shares) == 0 or not np.any(defect > 0) and not _penetrates_between_nodes(defect):
        return 0.0, shares
    panels = penetration_panels(space, defect)
    per_panel = hhalf.h_half_squared_shares(panels)
    live = panels.owner >= 0
    np.add.at(shares, panels.owner[live], per_panel[live])
    return float(np.sqrt(shares.sum())), shares


def _penetrates_between_nodes(defect):
    coef = hhalf.quadratic_coefficients(defect)
    # the quadratic's maximum on [0, 1]
    c1, c2 = coef[:, 1], coef[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = np.where(c2 < 0, -c1 / (2 * c2), 0.0)
    tv = np.clip(np.nan_to_num(tv), 0.0, 1.0)
    return bool(np.any(hhalf.polyval(coef, tv) > 0))


# ----------------------------------------------------------------------
# oscillations

def oscillations(space, f=None, g=None):
    """(osc_f, osc_g) against element-wise and edge-wise constant L2 projections."""
    osc_f = 0.0
    if f is not None:
        bary, w = TRI_DEG4
        pts = space.physical_points(bary)
        fv = vector_field(f, pts[..., 0], pts[..., 1])
        mean = np.einsum("q,mqc->mc", w, fv)
        dev = np.einsum("q,mqc->m", w, (fv - mean[:, None, :]) ** 2) * space.areas
        osc_f = float(np.sqrt(np.sum(space.diameters**2 * dev)))
    osc_g = 0.0
    sel = np.flatnonzero(space.edge_markers[space.boundary_edge_ids] == NEUMANN)
    if g is not None and len(sel):
        t, w = LINE3
        pts, length = _edge_points(space, space.boundary_edge_ids[sel], t)
        n = space.bnd_normal[sel]
        gx, gy = g(pts[..., 0], pts[..., 1], (np.broadcast_to(n[:, None, 0], pts.shape[:2]), np.broadcast_to(n[:, None, 1], pts.shape[:2])))
        gv = np.stack(np.broadcast_arrays(gx, gy), axis=-1)
        mean = np.einsum("q,nqc->nc", w, gv)
        dev = length * np.einsum("q,nqc->n", w, (gv - mean[:, None, :]) ** 2)
        osc_g = float(np.sqrt(np.sum(length * dev)))
    return osc_f, osc_g


# ----------------------------------------------------------------------
# assembly of the report

def patch_sizes(space):
    """h_p: the largest diameter among the elements containing node p."""
    hp = np.zeros(space.n_nodes)
    np.maximum.at(hp, space.cell_nodes.ravel(), np.repeat(space.diameters, 6))
    return hp


def assemble_report(space, solution, density, problem, eta5_mode="consistent"):
    """Collect all estimator contributions, element indicators and oscillations.

    ``density`` may be None when the mesh has no contact boundary.  The
    element indicators sum to eta^2: element residuals are weighted by the
    h_p^2 of their nodes, edge terms by h_p of the edge nodes (interior
    edges split evenly between both sides), eta6_p^2 goes in equal parts to
    the elements containing p and eta7^2 to the elements along the
    penetrating contact edges.
    """
    coeffs = solution.coeffs
    mat = problem.material
    m = space.mesh.n_triangles
    hp = patch_sizes(space)
    free = space.node_class != DIRICHLET_NODE
    sq = np.zeros((space.n_nodes, 6))
    ind = np.zeros(m)

    # eta1
    r2 = interior_residual(space, coeffs, mat, problem.f) ** 2
    w_node = np.where(free, hp**2, 0.0)
    cn = space.cell_nodes
    np.add.at(sq[:, 0], cn.ravel(), np.repeat(r2, 6) * w_node[cn.ravel()])
    ind += r2 * w_node[cn].sum(axis=1)

    def edge_terms(col, nodes, values, tri_a, tri_b=None):
        wn = np.where(free[nodes], hp[nodes], 0.0)  # (E, 3)
        np.add.at(sq[:, col], nodes.ravel(), (wn * values[:, None]).ravel())
        total = wn.sum(axis=1) * values
        if tri_b is None:
            np.add.at(ind, tri_a, total)
        else:
            np.add.at(ind, tri_a, 0.5 * total)
            np.add.at(ind, tri_b, 0.5 * total)

    ids, j2 = interior_jumps(space, coeffs, mat)
    edge_terms(1, space.edge_nodes[ids], j2, space.topology.edge_tris[ids, 0], space.topology.edge_tris[ids, 1])
    sel, n2 = neumann_jumps(space, coeffs, mat, problem.g)
    if len(sel):
        edge_terms(2, space.edge_nodes[space.boundary_edge_ids[sel]], n2, space.bnd_tri[sel])

    eta7, eta7_edges = 0.0, np.zeros(0)
    if len(space.contact_edges):
        t2, s2 = contact_jumps(space, coeffs, mat, density, eta5_mode)
        edge_terms(3, space.contact_edges, t2, space.contact_edge_tri)
        edge_terms(4, space.contact_edges, s2, space.contact_edge_tri)
        defect = contact_defect(space, coeffs, problem.obstacle)
        if density is not None:
            e6 = eta_six(space, density, defect)
            sq[density.nodes, 5] = e6**2
            # equal split over the elements containing the node
            inc = np.zeros(space.n_nodes)
            np.add.at(inc, cn.ravel(), 1.0)
            share = np.zeros(space.n_nodes)
            share[density.nodes] = e6**2
            ind += (share[cn] / np.maximum(inc[cn], 1.0)).sum(axis=1)
        eta7, eta7_edges = eta_seven(space, defect)
        np.add.at(ind, space.contact_edge_tri, eta7_edges)

    totals = {name: float(np.sqrt(sq[:, k].sum())) for k, name in enumerate(NAMES[:6])}
    totals["eta7"] = eta7
    totals["eta"] = float(np.sqrt(sq.sum() + eta7**2))
    osc_f, osc_g = oscillations(space, problem.f, problem.g)
    return EstimatorReport(np.sqrt(sq), totals, ind, osc_f, osc_g, eta7_edges)
