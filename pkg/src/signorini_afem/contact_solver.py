"""Primal-dual active set solver for nodal non-penetration constraints."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class PDASConvergenceError(SolverError):
    def __init__(self, iterations, delta):
        self.iterations = iterations
        self.delta = delta
        super().__init__(f"active set did not settle after {iterations} iterations (last change: {delta} nodes)")


@dataclass
class ContactSolution:
    coeffs: np.ndarray        # full dof vector, Dirichlet values included
    multipliers: np.ndarray   # one per constrained dof, >= 0 in compression
    active: np.ndarray        # bool mask over the constrained dofs
    iterations: int
    contact_dofs: np.ndarray
    sign: float = 1.0

    @property
    def active_set(self):
        return self.contact_dofs[self.active]


def solve_linear(K, F, rtol=1e-10):
    """Sparse direct solve with a residual check and iterative refinement."""
    F = np.asarray(F, dtype=float)
    if K.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(sp.csc_matrix(K))
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from None
    x = lu.solve(F)
    normF = np.linalg.norm(F)
    for _ in range(3):
        r = F - K @ x
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("non-finite solution")
        if np.linalg.norm(r) <= rtol * normF or normF == 0:
            return x
        x = x + lu.solve(r)
    r = F - K @ x
    if np.linalg.norm(r) > rtol * normF:
        raise SolverError(f"linear solve residual {np.linalg.norm(r):.3e} exceeds {rtol:g} * |F|")
    return x


def pdas_solve(system, contact_dofs, gap, c=1.0, max_iter=100, sign=1.0):
    """Minimise 1/2 u.Ku - F.u subject to sign * u[j] <= gap[j] for j in ``contact_dofs``.

    ``contact_dofs`` are global dof indices (members of ``system.free``).
    The active-set indicator is ``lam + c * diag(K) * (sign * u - gap)``.
    Starts from an empty active set; stops when the set repeats.
    """
    contact_dofs = np.asarray(contact_dofs, dtype=np.int64)
    gap = np.asarray(getattr(gap, "values", gap), dtype=float)
    K, F = system.K, system.F
    pos = np.searchsorted(system.free, contact_dofs)
    if len(contact_dofs) and (np.any(pos >= len(system.free)) or np.any(system.free[np.minimum(pos, len(system.free) - 1)] != contact_dofs)):
        raise ValueError("contact dofs must be free dofs")
    n = K.shape[0]
    diag = K.diagonal()[pos] if len(pos) else np.zeros(0)

    active = np.zeros(len(pos), dtype=bool)
    for it in range(1, max_iter + 1):
        x, lam = _solve_with_active(K, F, pos, active, gap, sign, n)
        if len(pos) == 0:
            return ContactSolution(system.expand(x), lam, active, it, contact_dofs, sign)
        indicator = lam + c * diag * (sign * x[pos] - gap)
        new_active = indicator > 0
        delta = int(np.count_nonzero(new_active != active))
        log.debug("pdas iteration %d: %d active, %d changed", it, new_active.sum(), delta)
        if delta == 0:
            return ContactSolution(system.expand(x), lam, active, it, contact_dofs, sign)
        active = new_active
    raise PDASConvergenceError(max_iter, delta)


def _solve_with_active(K, F, pos, active, gap, sign, n):
    fixed = pos[active]
    x = np.zeros(n)
    x[fixed] = sign * gap[active]
    keep = np.ones(n, dtype=bool)
    keep[fixed] = False
    idx = np.flatnonzero(keep)
    rhs = F[idx] - K[idx][:, fixed] @ x[fixed]
    x[idx] = solve_linear(K[idx][:, idx], rhs)
    lam = np.zeros(len(pos))
    if len(fixed):
        lam[active] = sign * (F[fixed] - K[fixed] @ x)
    return x, lam
