"""Output files: history table, mesh snapshots, VTK fields, density profiles."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .contact_force import density_profile
from .estimator import NAMES, format_report
from .mesh import format_mesh, load_mesh

# VTK quadratic triangle: vertices, then midpoints of (v0 v1), (v1 v2), (v2 v0)
VTK_QUADRATIC_TRIANGLE = 22
_VTK_ORDER = [0, 1, 2, 5, 3, 4]


def write_mesh(path, mesh):
    Path(path).write_text(format_mesh(mesh))


def read_mesh(path):
    return load_mesh(Path(path).read_text())


def vtk_text(space, coeffs, title="displacement"):
    """Legacy ASCII VTK unstructured grid with the displacement as point vectors."""
    pts = space.coords
    cells = space.cell_nodes[:, _VTK_ORDER]
    u = np.asarray(coeffs).reshape(-1, 2)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    out += [f"{x!r} {y!r} 0.0" for x, y in pts.tolist()]
    out.append(f"CELLS {len(cells)} {7 * len(cells)}")
    out += ["6 " + " ".join(map(str, c)) for c in cells.tolist()]
    out.append(f"CELL_TYPES {len(cells)}")
    out += [str(VTK_QUADRATIC_TRIANGLE)] * len(cells)
    out.append(f"POINT_DATA {len(pts)}")
    out.append("VECTORS displacement double")
    out += [f"{a!r} {b!r} 0.0" for a, b in u.tolist()]
    return "\n".join(out) + "\n"


def write_vtk(path, space, coeffs):
    Path(path).write_text(vtk_text(space, coeffs))


def write_density(path, density):
    """Two columns: tangential coordinate along the contact side and s1."""
    rows = density_profile(density)
    np.savetxt(path, rows, fmt="%.12e", header="s density")


def write_history(path, history):
    Path(path).write_text(history.to_csv())


def write_estimator_columns(path, history):
    """Whitespace-separated ndof and estimator contributions, one row per level (gnuplot-ready)."""
    cols = ("ndof",) + NAMES + ("eta",)
    data = np.column_stack([history.column(c) for c in cols])
    np.savetxt(path, data, fmt="%.10e", header=" ".join(cols))


def write_report(path, report):
    Path(path).write_text(format_report(report))
