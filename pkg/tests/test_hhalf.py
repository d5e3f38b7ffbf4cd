import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from signorini_afem.hhalf import (
    h_half_norm,
    l2_squared,
    positive_part,
    quadratic_coefficients,
    restrict,
    polyval,
    seminorm,
    trace_panels,
)


def panels_of(f, knots):
    knots = np.asarray(knots, dtype=float)
    a, b = knots[:-1], knots[1:]
    vals = np.column_stack([f(a), f(0.5 * (a + b)), f(b)])
    return trace_panels(a, b, vals)


def reference_seminorm_sq(f, lo, hi, breaks=()):
    """Brute-force double integral split along the diagonal and at the kinks."""
    pts = sorted({lo, hi, *breaks})
    total = 0.0
    kernel = lambda y, x: 0.0 if x == y else (f(x) - f(y)) ** 2 / (x - y) ** 2  # noqa: E731
    for i in range(len(pts) - 1):
        for j in range(len(pts) - 1):
            a, b, c, d = pts[i], pts[i + 1], pts[j], pts[j + 1]
            if i == j:
                # lower triangle y < x, doubled
                v, _ = dblquad(kernel, a, b, lambda x: a, lambda x: x, epsabs=1e-13, epsrel=1e-11)
                total += 2 * v
            else:
                v, _ = dblquad(kernel, a, b, lambda x: c, lambda x: d, epsabs=1e-13, epsrel=1e-11)
                total += v
    return total


def test_linear_and_quadratic_closed_forms():
    # v = x on [0, 1]: integrand 1; v = x^2: (x + y)^2 -> 7/6
    assert seminorm(panels_of(lambda x: x, [0, 1])) ** 2 == pytest.approx(1.0, rel=1e-13)
    assert seminorm(panels_of(lambda x: x**2, [0, 1])) ** 2 == pytest.approx(7 / 6, rel=1e-13)


@pytest.mark.parametrize("knots", [[0, 0.3, 1], [0, 0.1, 0.2, 0.6, 1.0], np.linspace(0, 1, 9)])
def test_split_panels_give_same_value(knots):
    # a smooth quadratic split into panels: touching, near and far pairs all contribute
    assert seminorm(panels_of(lambda x: x**2, knots)) ** 2 == pytest.approx(7 / 6, rel=1e-9)


def test_constant_and_zero():
    p = panels_of(lambda x: 2.0 + 0 * x, [0.0, 0.5, 1.5])
    assert seminorm(p) == pytest.approx(0.0, abs=1e-14)
    assert h_half_norm(p) == pytest.approx(2.0 * np.sqrt(1.5))
    assert h_half_norm(panels_of(lambda x: 0 * x, [0, 1])) == 0.0


def test_hat_function_against_quadrature():
    f = lambda x: 1 - abs(2 * x - 1)  # noqa: E731
    ref = reference_seminorm_sq(f, 0.0, 1.0, breaks=[0.5])
    assert seminorm(panels_of(f, [0, 0.5, 1])) ** 2 == pytest.approx(ref, rel=1e-7)


def test_positive_part_against_quadrature():
    # v = (x - 0.3)(x - 0.8) on two panels; its positive part has kinks at 0.3 and 0.8
    g = lambda x: (x - 0.3) * (x - 0.8)  # noqa: E731
    p = positive_part(panels_of(g, [0, 0.6, 1]))
    fp = lambda x: max(g(x), 0.0)  # noqa: E731
    ref = reference_seminorm_sq(fp, 0.0, 1.0, breaks=[0.3, 0.6, 0.8])
    assert seminorm(p) ** 2 == pytest.approx(ref, rel=1e-6)
    l2, _ = quad(lambda x: fp(x) ** 2, 0, 1, points=[0.3, 0.8])
    assert l2_squared(p).sum() == pytest.approx(l2, rel=1e-12)


def test_positive_part_structure():
    p = positive_part(panels_of(lambda x: x - 0.25, [0, 0.5, 1]))
    # zero run [0, 0.25], then the two live pieces
    assert np.allclose(p.start, [0, 0.25, 0.5]) and np.allclose(p.length, [0.25, 0.25, 0.5])
    assert list(p.owner) == [-1, 0, 1]
    q = positive_part(panels_of(lambda x: -1 - x, [0, 0.5, 1]))
    assert len(q) == 1 and not q.live().any()


@settings(max_examples=50, deadline=None)
@given(v=st.lists(st.floats(-3, 3), min_size=3, max_size=3), t0=st.floats(0, 0.5), t1=st.floats(0.5, 1))
def test_restrict_is_reparametrisation(v, t0, t1):
    c = quadratic_coefficients(np.array(v))
    assert np.allclose(polyval(c, np.array([0, 0.5, 1])), v)
    sub = restrict(c, t0, t1)
    tau = np.linspace(0, 1, 5)
    assert np.allclose(polyval(sub, tau), polyval(c, t0 + (t1 - t0) * tau))


@settings(max_examples=30, deadline=None)
@given(v=st.lists(st.floats(-1, 1), min_size=5, max_size=5), scale=st.floats(0.1, 10))
def test_seminorm_homogeneity_and_scale_invariance(v, scale):
    vals = np.array([v[0:3], v[2:5]])
    p = trace_panels([0.0, 1.0], [1.0, 2.0], vals)
    q = trace_panels([0.0, scale], [scale, 2 * scale], 2 * vals)
    # the seminorm is invariant under dilation and 1-homogeneous in v
    assert seminorm(q) == pytest.approx(2 * seminorm(p), rel=1e-9, abs=1e-12)
