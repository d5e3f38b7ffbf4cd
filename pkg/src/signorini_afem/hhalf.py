"""H^{1/2} norm of piecewise quadratic traces on a straight boundary segment.

A trace is a list of panels ``[a, a + L]`` carrying a polynomial
``c0 + c1 tau + c2 tau^2`` in the local variable ``tau in [0, 1]``.  The
Sobolev-Slobodeckij seminorm

    |v|^2 = int int (v(x) - v(y))^2 / (x - y)^2 dx dy

is split into panel pairs: same-panel blocks are integrated in closed
form, touching panels through a Duffy substitution at the shared point,
well separated panels by tensor Gauss rules and close panels by
bisection until they are well separated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_line

_GX, _GW = gauss_line(8)
_L3X, _L3W = gauss_line(3)


@dataclass
class Panels:
    start: np.ndarray    # (P,)
    length: np.ndarray   # (P,)
    coef: np.ndarray     # (P, 3) polynomial in tau
    owner: np.ndarray    # (P,) index of the source edge, -1 for merged zero runs

    def __len__(self):
        return len(self.start)

    def live(self):
        return np.any(self.coef != 0.0, axis=1)


def quadratic_coefficients(values):
    """Coefficients of the quadratic through (0, v0), (1/2, vm), (1, v1); ``values`` (..., 3)."""
    v0, vm, v1 = values[..., 0], values[..., 1], values[..., 2]
    return np.stack([v0, -3 * v0 + 4 * vm - v1, 2 * v0 - 4 * vm + 2 * v1], axis=-1)


def restrict(coef, t0, t1):
    """Re-parametrise a polynomial in t to tau on the sub-interval t = t0 + (t1 - t0) tau."""
    c0, c1, c2 = coef[..., 0], coef[..., 1], coef[..., 2]
    d = t1 - t0
    return np.stack([c0 + c1 * t0 + c2 * t0**2, (c1 + 2 * c2 * t0) * d, c2 * d**2], axis=-1)


def polyval(coef, tau):
    return coef[..., 0] + tau * (coef[..., 1] + tau * coef[..., 2])


def _roots01(c):
    c0, c1, c2 = c
    scale = max(abs(c0), abs(c1), abs(c2))
    if scale == 0.0:
        return []
    if abs(c2) <= 1e-14 * scale:
        r = [] if c1 == 0 else [-c0 / c1]
    else:
        r = [z.real for z in np.roots([c2, c1, c0]) if abs(z.imag) <= 1e-12 * (1 + abs(z.real))]
    return sorted(t for t in r if 1e-12 < t < 1 - 1e-12)


def trace_panels(start, end, values):
    """Panels of a continuous piecewise quadratic trace given at (start, mid, end) of every edge."""
    start = np.asarray(start, dtype=float)
    length = np.asarray(end, dtype=float) - start
    coef = quadratic_coefficients(np.asarray(values, dtype=float))
    return Panels(start, length, coef, np.arange(len(start)))


def positive_part(panels):
    """Panels of v^+; pieces where v <= 0 become zero panels and consecutive ones are merged."""
    starts, lengths, coefs, owners = [], [], [], []

    def push(a, length, c, owner):
        zero = not np.any(c)
        if zero and coefs and not np.any(coefs[-1]) and abs(starts[-1] + lengths[-1] - a) <= 1e-14 * max(1.0, abs(a)):
            lengths[-1] += length
            return
        starts.append(a)
        lengths.append(length)
        coefs.append(np.zeros(3) if zero else c)
        owners.append(-1 if zero else owner)

    for a, length, c, owner in zip(panels.start, panels.length, panels.coef, panels.owner):
        cuts = [0.0] + _roots01(c) + [1.0]
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            sub = restrict(c, t0, t1)
            positive = polyval(sub, 0.5) > 0
            push(a + t0 * length, (t1 - t0) * length, sub if positive else np.zeros(3), owner)
    return Panels(np.array(starts), np.array(lengths), np.array(coefs).reshape(-1, 3), np.array(owners, dtype=np.int64))


def l2_squared(panels):
    """Per-panel squared L2 norm (exact for quadratics)."""
    vals = polyval(panels.coef[:, None, :], _L3X[None, :])
    return panels.length * (vals**2 @ _L3W)


def _same_panel(coef):
    # (v(x)-v(y))/(x-y) = (c1 + c2 (tx + ty)) / L; moments of tx + ty on the unit square
    c1, c2 = coef[:, 1], coef[:, 2]
    return c1**2 + 2 * c1 * c2 + 7.0 / 6.0 * c2**2


def _far(aI, LI, cI, aJ, LJ, cJ):
    x = aI[:, None] + LI[:, None] * _GX
    y = aJ[:, None] + LJ[:, None] * _GX
    vx = polyval(cI[:, None, :], _GX[None, :])
    vy = polyval(cJ[:, None, :], _GX[None, :])
    diff = (vx[:, :, None] - vy[:, None, :]) / (x[:, :, None] - y[:, None, :])
    return LI * LJ * np.einsum("i,j,nij->n", _GW, _GW, diff**2)


def _touching(LI, cI, LJ, cJ):
    """Panel I = [c - LI, c] and J = [c, c + LJ] sharing the point c."""
    u = _GX[:, None]
    w = _GX[None, :]
    total = np.zeros(len(LI))
    for swap in (False, True):
        # alpha = c - x, beta = y - c; triangle split along the diagonal of [0, LI] x [0, LJ]
        if not swap:
            alpha, beta = LI[:, None, None] * u, LJ[:, None, None] * u * w
        else:
            alpha, beta = LI[:, None, None] * u * w, LJ[:, None, None] * u
        tx = 1.0 - alpha / LI[:, None, None]
        ty = beta / LJ[:, None, None]
        vx = polyval(cI[:, None, None, :], tx)
        vy = polyval(cJ[:, None, None, :], ty)
        f = ((vx - vy) / (alpha + beta)) ** 2 * (LI * LJ)[:, None, None] * u
        total += np.einsum("i,j,nij->n", _GW, _GW, f)
    return total


def _halves(a, L, c):
    return (a, 0.5 * L, restrict(c, 0.0, 0.5)), (a + 0.5 * L, 0.5 * L, restrict(c, 0.5, 1.0))


def pair_integrals(panels):
    """Per-panel shares of the seminorm; the shares sum to |v|^2_{1/2}.

    Pairs involving only zero panels are skipped; a pair of a live and a
    zero panel is credited to the live one, two live panels split evenly.
    """
    n = len(panels)
    share = np.zeros(n)
    live = panels.live()
    if not live.any():
        return share
    share[live] += _same_panel(panels.coef[live])  # diagonal blocks
    far, touch = [], []
    stack = []
    for i in range(n):
        for j in range(i + 1, n):
            if live[i] or live[j]:
                stack.append((i, j, panels.start[i], panels.length[i], panels.coef[i], panels.start[j], panels.length[j], panels.coef[j]))
    while stack:
        i, j, aI, LI, cI, aJ, LJ, cJ = stack.pop()
        gap = aJ - (aI + LI)
        big = max(LI, LJ)
        if gap <= 1e-14 * big:
            # touching: make the lengths comparable first
            if LJ > 2 * LI:
                (a1, L1, c1), (a2, L2, c2) = (aJ, LI, restrict(cJ, 0.0, LI / LJ)), (aJ + LI, LJ - LI, restrict(cJ, LI / LJ, 1.0))
                stack.append((i, j, aI, LI, cI, a1, L1, c1))
                stack.append((i, j, aI, LI, cI, a2, L2, c2))
            elif LI > 2 * LJ:
                r = 1.0 - LJ / LI
                stack.append((i, j, aI + r * LI, LJ, restrict(cI, r, 1.0), aJ, LJ, cJ))
                stack.append((i, j, aI, r * LI, restrict(cI, 0.0, r), aJ, LJ, cJ))
            else:
                touch.append((i, j, LI, cI, LJ, cJ))
        elif gap >= big:
            far.append((i, j, aI, LI, cI, aJ, LJ, cJ))
        elif LI >= LJ:
            h1, h2 = _halves(aI, LI, cI)
            stack.append((i, j) + h1 + (aJ, LJ, cJ))
            stack.append((i, j) + h2 + (aJ, LJ, cJ))
        else:
            h1, h2 = _halves(aJ, LJ, cJ)
            stack.append((i, j, aI, LI, cI) + h1)
            stack.append((i, j, aI, LI, cI) + h2)

    def credit(idx_i, idx_j, vals):
        # off-diagonal blocks appear twice in the double integral
        vals = 2.0 * vals
        li, lj = live[idx_i], live[idx_j]
        both = li & lj
        np.add.at(share, idx_i[both], 0.5 * vals[both])
        np.add.at(share, idx_j[both], 0.5 * vals[both])
        np.add.at(share, idx_i[li & ~lj], vals[li & ~lj])
        np.add.at(share, idx_j[lj & ~li], vals[lj & ~li])

    if far:
        i, j = (np.array([p[k] for p in far], dtype=np.int64) for k in (0, 1))
        aI, LI, aJ, LJ = (np.array([p[k] for p in far]) for k in (2, 3, 5, 6))
        cI, cJ = (np.array([p[k] for p in far]) for k in (4, 7))
        credit(i, j, _far(aI, LI, cI, aJ, LJ, cJ))
    if touch:
        i, j = (np.array([p[k] for p in touch], dtype=np.int64) for k in (0, 1))
        LI, LJ = (np.array([p[k] for p in touch]) for k in (2, 4))
        cI, cJ = (np.array([p[k] for p in touch]) for k in (3, 5))
        credit(i, j, _touching(LI, cI, LJ, cJ))
    return share


def h_half_squared_shares(panels):
    """Per-panel shares of the squared H^{1/2} norm (L2 part plus seminorm part)."""
    return l2_squared(panels) + pair_integrals(panels)


def h_half_norm(panels):
    return float(np.sqrt(max(h_half_squared_shares(panels).sum(), 0.0)))


def seminorm(panels):
    return float(np.sqrt(max(pair_integrals(panels).sum(), 0.0)))
