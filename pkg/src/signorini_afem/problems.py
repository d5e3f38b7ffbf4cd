"""Benchmark problem definitions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .assembly import MaterialParams, lame_from_young_poisson
from .mesh import unit_square_mesh


@dataclass(frozen=True)
class Problem:
    """Data of a unilateral contact problem.

    ``f(x, y)`` and ``dirichlet(x, y)`` return component pairs, the Neumann
    traction is ``g(x, y, (nx, ny))`` and ``obstacle(s)`` is the gap as a
    function of the tangential coordinate along the contact side.
    """

    name: str
    initial_mesh: Callable
    material: MaterialParams
    f: Optional[Callable] = None
    g: Optional[Callable] = None
    dirichlet: Optional[Callable] = None
    obstacle: Callable = field(default=lambda s: np.zeros_like(s))
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    length_scale: float = 1.0

    def with_material(self, material):
        return replace(self, material=material)


def _traction(stress_fn):
    def g(x, y, n):
        s = stress_fn(x, y)
        return s[..., 0, 0] * n[0] + s[..., 0, 1] * n[1], s[..., 1, 0] * n[0] + s[..., 1, 1] * n[1]

    return g


# example61: u = (y^2 (y - 1), (x - 2) y (1 - y) e^y), mu = chi = 1
def _ex61_u(x, y):
    return y**2 * (y - 1) + 0 * x, (x - 2) * y * (1 - y) * np.exp(y)


def _ex61_grad(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    ey = np.exp(y)
    G = np.zeros(x.shape + (2, 2))
    G[..., 0, 1] = 3 * y**2 - 2 * y
    G[..., 1, 0] = (y - y**2) * ey
    G[..., 1, 1] = (x - 2) * (1 - y - y**2) * ey
    return G


def _ex61(mu=1.0, chi=1.0, n0=2):
    def stress(x, y):
        G = _ex61_grad(x, y)
        eps = 0.5 * (G + np.swapaxes(G, -1, -2))
        tr = eps[..., 0, 0] + eps[..., 1, 1]
        return chi * tr[..., None, None] * np.eye(2) + 2 * mu * eps

    def f(x, y):
        ey = np.exp(y)
        f1 = chi * (1 - y - y**2) * ey + mu * (6 * y - 2 + (1 - y - y**2) * ey)
        f2 = (chi + 2 * mu) * (x - 2) * (-3 * y - y**2) * ey
        return -f1, -f2

    return Problem(
        name="example61",
        initial_mesh=lambda: unit_square_mesh(n0, "example61"),
        material=MaterialParams(mu=mu, chi=chi),
        f=f,
        g=_traction(stress),
        exact=_ex61_u,
        exact_grad=_ex61_grad,
    )


def example61(n0=2):
    return _ex61(n0=n0)


def example62(n0=2):
    return Problem(
        name="example62",
        initial_mesh=lambda: unit_square_mesh(n0, "example62"),
        material=lame_from_young_poisson(500.0, 0.3),
        dirichlet=lambda x, y: (0.1 + 0 * x, 0 * x),
        obstacle=lambda s: -0.2 + 0.5 * np.abs(s - 0.5),
    )


def uncontacted(n0=2, mu=1.0, chi=1.0):
    """Smooth manufactured problem whose contact side stays traction free and open.

    u = y^2 (1 - y) (e^x, sin x): zero traction on y = 0, zero on y = 1;
    the gap of 0.5 is never reached.
    """

    def u(x, y):
        w = y**2 * (1 - y)
        return w * np.exp(x), w * np.sin(x)

    def grad(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        w = y**2 * (1 - y)
        dw = 2 * y - 3 * y**2
        G = np.zeros(x.shape + (2, 2))
        G[..., 0, 0] = w * np.exp(x)
        G[..., 0, 1] = dw * np.exp(x)
        G[..., 1, 0] = w * np.cos(x)
        G[..., 1, 1] = dw * np.sin(x)
        return G

    def stress(x, y):
        G = grad(x, y)
        eps = 0.5 * (G + np.swapaxes(G, -1, -2))
        tr = eps[..., 0, 0] + eps[..., 1, 1]
        return chi * tr[..., None, None] * np.eye(2) + 2 * mu * eps

    def f(x, y):
        # -div sigma with sigma = chi div(u) I + mu (grad u + grad u^T)
        w = y**2 * (1 - y)
        dw = 2 * y - 3 * y**2
        d2w = 2 - 6 * y
        ex, s, c = np.exp(x), np.sin(x), np.cos(x)
        # div u = w e^x + dw sin x
        ddiv_dx = w * ex + dw * c
        ddiv_dy = dw * ex + d2w * s
        lap1 = w * ex + d2w * ex
        lap2 = -w * s + d2w * s
        f1 = (chi + mu) * ddiv_dx + mu * lap1
        f2 = (chi + mu) * ddiv_dy + mu * lap2
        return -f1, -f2

    return Problem(
        name="uncontacted",
        initial_mesh=lambda: unit_square_mesh(n0, "example61"),
        material=MaterialParams(mu=mu, chi=chi),
        f=f,
        g=_traction(stress),
        obstacle=lambda s: 0.5 + 0 * s,
        exact=u,
        exact_grad=grad,
    )


BUILTIN = {"example61": example61, "example62": example62, "uncontacted": uncontacted}


def get_problem(name, **kwargs):
    try:
        return BUILTIN[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(BUILTIN)}") from None
