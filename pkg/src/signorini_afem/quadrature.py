"""Quadrature rules on the reference triangle (barycentric) and on [0, 1]."""

import numpy as np


def _sym(points):
    """Expand barycentric orbit generators into (points, weights)."""
    pts, wts = [], []
    for w, (a, b, c) in points:
        orbit = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
        for p in sorted(orbit):
            pts.append(p)
            wts.append(w)
    return np.array(pts), np.array(wts)


# weights sum to 1: multiply by the triangle area
_A4, _B4 = 0.445948490915965, 0.091576213509771
TRI_DEG4 = _sym([
    (0.223381589678011, (_A4, _A4, 1 - 2 * _A4)),
    (0.109951743655322, (_B4, _B4, 1 - 2 * _B4)),
])

_A6, _B6 = 0.249286745170910, 0.063089014491502
_C6 = (0.053145049844817, 0.310352451033784, 0.636502499121399)
TRI_DEG6 = _sym([
    (0.116786275726379, (_A6, _A6, 1 - 2 * _A6)),
    (0.050844906370207, (_B6, _B6, 1 - 2 * _B6)),
    (0.082851075618374, _C6),
])


def gauss_line(n):
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


LINE3 = gauss_line(3)
