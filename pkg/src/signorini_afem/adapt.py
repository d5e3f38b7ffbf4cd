"""SOLVE -> ESTIMATE -> MARK -> REFINE."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import assemble_load, assemble_stiffness, constrain_system, stress_from_gradient
from .contact_force import classify_nodes, discrete_contact_density
from .contact_solver import SolverError, pdas_solve
from .estimator import NAMES, assemble_report
from .fespace import build_space, contact_gap, p2_basis
from .mesh import min_angle, nvb_refine
from .quadrature import TRI_DEG6

log = logging.getLogger(__name__)

COLUMNS = ("level", "ndof") + NAMES + ("eta", "err", "eff", "iters", "minangle")


class AdaptError(RuntimeError):
    pass


def dorfler_mark(indicators, theta):
    """Smallest set of elements carrying a ``theta`` share of the summed indicators.

    Elements are taken by decreasing indicator, ties by lower index.
    Returns sorted element indices.
    """
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    ind = np.asarray(indicators, dtype=float)
    if np.any(ind < 0) or not np.all(np.isfinite(ind)):
        raise ValueError("indicators must be finite and non-negative")
    total = ind.sum()
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(ind)), -ind))
    if theta == 1:
        return np.sort(order[ind[order] > 0])
    csum = np.cumsum(ind[order])
    k = int(np.searchsorted(csum, theta * total)) + 1
    return np.sort(order[: min(k, len(ind))])


def energy_error(space, coeffs, exact, exact_grad, material):
    """(H1 product-norm error, energy-norm error) against an exact displacement field."""
    bary, w = TRI_DEG6
    pts = space.physical_points(bary)
    x, y = pts[..., 0], pts[..., 1]
    ue = np.stack(np.broadcast_arrays(*exact(x, y)), axis=-1)
    uh = np.einsum("qk,mkc->mqc", p2_basis(bary), space.local_values(coeffs))
    ge = np.asarray(exact_grad(x, y), dtype=float)
    gh = space.gradients(coeffs, bary)
    de = ge - gh
    l2 = np.einsum("q,m,mqc->", w, space.areas, (ue - uh) ** 2)
    h1 = np.einsum("q,m,mqij->", w, space.areas, de**2)
    eps = 0.5 * (de + np.swapaxes(de, -1, -2))
    energy = np.einsum("q,m,mqij,mqij->", w, space.areas, stress_from_gradient(de, material), eps)
    return float(np.sqrt(l2 + h1)), float(np.sqrt(max(energy, 0.0)))


@dataclass
class LevelState:
    level: int
    mesh: object
    space: object
    solution: object
    density: object
    report: object
    K: object = None
    F: object = None


def solve_level(problem, mesh, level=0, eta5_mode="consistent", pdas_c=1.0, max_iter=100):
    """Solve and estimate on one mesh."""
    space = build_space(mesh)
    K = assemble_stiffness(space, problem.material)
    F = assemble_load(space, problem.f, problem.g)
    system = constrain_system(K, F, space, problem.dirichlet)
    gap = contact_gap(space, problem.obstacle)
    try:
        sol = pdas_solve(system, space.normal_dofs(gap.nodes), gap, c=pdas_c, max_iter=max_iter,
                         sign=space.contact_sign if len(gap.nodes) else 1.0)
    except SolverError as exc:
        raise AdaptError(f"level {level}: {exc}") from exc
    density = None
    if len(space.contact_edges):
        density = discrete_contact_density(space, sol, K, F)
        density.classes = classify_nodes(space, sol, gap, length_scale=problem.length_scale)
    report = assemble_report(space, sol, density, problem, eta5_mode=eta5_mode)
    return LevelState(level, mesh, space, sol, density, report, K, F)


@dataclass
class ConvergenceHistory:
    rows: list = field(default_factory=list)

    def append(self, row):
        if self.rows and row["ndof"] <= self.rows[-1]["ndof"]:
            raise AdaptError("number of dofs must increase from level to level")
        self.rows.append(row)

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def to_csv(self):
        lines = [",".join(COLUMNS)]
        for r in self.rows:
            lines.append(",".join(_fmt(r[c]) for c in COLUMNS))
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.10e}"


def history_row(state, problem):
    rep = state.report
    err = eff = None
    if problem.exact is not None and problem.exact_grad is not None:
        err, _ = energy_error(state.space, state.solution.coeffs, problem.exact, problem.exact_grad, problem.material)
        eff = rep.eta / err if err > 0 else None
    row = {"level": state.level, "ndof": int(state.space.n_dofs)}
    row.update({k: rep.totals[k] for k in NAMES})
    row.update(eta=rep.eta, err=err, eff=eff, iters=int(state.solution.iterations), minangle=min_angle(state.mesh))
    return row


def check_contact_consistency(problem, samples=101):
    """Complementarity residuals of the exact solution on the contact side, or None.

    Returns max(u_n - g)^+, max(sigma_nn)^+, max|sigma_nn (u_n - g)| and
    max|sigma_nt| along the contact side of the initial mesh.
    """
    if problem.exact is None or problem.exact_grad is None:
        return None
    space = build_space(problem.initial_mesh())
    if len(space.contact_edges) == 0:
        return None
    s = np.linspace(space.coords[space.contact_edges[0, 0], space.tangent_axis],
                    space.coords[space.contact_edges[-1, 2], space.tangent_axis], samples)
    pts = np.zeros((samples, 2))
    pts[:, space.tangent_axis] = s
    pts[:, space.contact_axis] = space.contact_line
    n = np.asarray(space.contact_normal, dtype=float)
    t = np.array([-n[1], n[0]])
    u = np.stack(np.broadcast_arrays(*problem.exact(pts[:, 0], pts[:, 1])), axis=-1)
    sig = stress_from_gradient(np.asarray(problem.exact_grad(pts[:, 0], pts[:, 1])), problem.material)
    sn = sig @ n
    gap = u @ n - problem.obstacle(s)
    out = {
        "penetration": float(np.max(np.maximum(gap, 0))),
        "tension": float(np.max(np.maximum(sn @ n, 0))),
        "complementarity": float(np.max(np.abs((sn @ n) * gap))),
        "friction": float(np.max(np.abs(sn @ t))),
    }
    log.info("contact consistency of the exact solution: %s", out)
    return out


def adaptive_solve(problem, theta=0.4, max_dof=20000, max_levels=50, eta5_mode="consistent",
                   on_level: Optional[Callable] = None, mesh=None, mark=None):
    """Run the adaptive loop until the dof count exceeds ``max_dof``.

    ``on_level(state, row)`` is called after each level is estimated.
    ``mark(indicators, theta)`` replaces Dörfler marking if given.
    """
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    mark = dorfler_mark if mark is None else mark
    check_contact_consistency(problem)
    mesh = problem.initial_mesh() if mesh is None else mesh
    history = ConvergenceHistory()
    for level in range(max_levels):
        state = solve_level(problem, mesh, level, eta5_mode=eta5_mode)
        row = history_row(state, problem)
        history.append(row)
        log.info("level %d: ndof=%d eta=%.4e err=%s iters=%d", level, row["ndof"], row["eta"], row["err"], row["iters"])
        if on_level is not None:
            on_level(state, row)
        if row["ndof"] > max_dof or state.report.eta == 0:
            break
        marked = mark(state.report.element_indicators, theta)
        if len(marked) == 0:
            break
        mesh = nvb_refine(mesh, marked)
    return history, state
