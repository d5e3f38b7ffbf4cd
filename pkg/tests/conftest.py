import numpy as np
import pytest

from signorini_afem.assembly import MaterialParams
from signorini_afem.mesh import make_mesh, nvb_refine, unit_square_mesh

# acceptance outcomes, filled by test_acceptance.py and printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def unit_material():
    return MaterialParams(mu=1.0, chi=1.0)


def perturbed_square(n, layout, rng, amount=0.2, refinements=0):
    """Structured mesh with jittered interior vertices and a few random bisections."""
    mesh = unit_square_mesh(n, layout)
    v = mesh.vertices.copy()
    inner = np.all((v > 1e-12) & (v < 1 - 1e-12), axis=1)
    v[inner] += rng.uniform(-amount, amount, size=(inner.sum(), 2)) / n
    mesh = make_mesh(v, mesh.triangles, mesh.boundary_edges, mesh.boundary_markers)
    for _ in range(refinements):
        k = max(1, mesh.n_triangles // 4)
        mesh = nvb_refine(mesh, rng.choice(mesh.n_triangles, size=k, replace=False))
    return mesh


def projected_gradient_qp(K, F, pos, gap, sign, iters=200000, tol=1e-15):
    """Minimise 1/2 x.Kx - F.x with sign * x[pos] <= gap by plain projected gradient.

    Dense and slow on purpose: an independent reference for small systems.
    Returns the minimiser and the reactions sign * (F - K x)[pos].
    """
    A = K.toarray() if hasattr(K, "toarray") else np.asarray(K)
    step = 1.0 / np.linalg.eigvalsh(A)[-1]
    x = np.zeros(len(F))

    def project(z):
        z[pos] = sign * np.minimum(sign * z[pos], gap)
        return z

    x = project(x)
    for _ in range(iters):
        nxt = project(x - step * (A @ x - F))
        if np.max(np.abs(nxt - x)) <= tol * max(1.0, np.max(np.abs(x))):
            x = nxt
            break
        x = nxt
    return x, sign * (F - A @ x)[pos]


def small_contact_system(rng, max_free=30):
    """A random small mesh with random loads and gaps: (space, system, contact dofs, gap, sign)."""
    from signorini_afem.assembly import assemble_stiffness, constrain_system
    from signorini_afem.fespace import build_space

    layout = rng.choice(["example61", "example62"])
    mesh = unit_square_mesh(1, layout)
    while True:
        cand = nvb_refine(mesh, [rng.integers(mesh.n_triangles)])
        if len(build_space(cand).free_dofs) > max_free:
            break
        mesh = cand
    space = build_space(mesh)
    mat = MaterialParams(mu=rng.uniform(0.5, 2.0), chi=rng.uniform(0.5, 2.0))
    K = assemble_stiffness(space, mat)
    F = rng.normal(size=space.n_dofs)
    system = constrain_system(K, F, space, lambda x, y: (0 * x, 0 * x))
    nodes = space.contact_nodes
    dofs = space.normal_dofs(nodes)
    gap = rng.uniform(-0.05, 0.05, size=len(nodes))
    return space, system, dofs, gap, space.contact_sign
