import numpy as np
import pytest

from signorini_afem import io
from signorini_afem.cli import ConfigError, RunConfig, main, parse_config_text, resolve_config
from signorini_afem.adapt import COLUMNS
from signorini_afem.mesh import nvb_refine, unit_square_mesh


def test_parse_config_text():
    vals = parse_config_text("# run\nproblem = example62\ntheta=0.3  # bulk\n\nmax-dof=5000\ntest_mode=yes\n")
    assert vals == {"problem": "example62", "theta": 0.3, "max_dof": 5000, "test_mode": True}
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("theta 0.3")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("colour=red")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("max_dof=lots")


def test_flags_override_config(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("problem=example62\ntheta=0.3\nmax_dof=5000\n")
    cfg, _ = resolve_config(["--config", str(cfg_file), "--theta", "0.6"])
    assert cfg.problem == "example62" and cfg.theta == 0.6 and cfg.max_dof == 5000


def test_validation():
    with pytest.raises(ConfigError, match="theta"):
        RunConfig(theta=1.3).validate()
    with pytest.raises(ConfigError, match="unknown problem"):
        RunConfig(problem="example99").validate()
    with pytest.raises(ConfigError, match="mesh"):
        RunConfig(problem="custom").validate()


def test_bad_theta_exit_code(tmp_path, capsys):
    assert main(["--theta", "1.3", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error stage=config type=ConfigError")


def test_max_dof_below_initial(tmp_path, capsys):
    assert main(["--max-dof", "10", "--out", str(tmp_path), "--quiet"]) == 2
    assert "initial dof count" in capsys.readouterr().err


def test_small_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["--problem", "example62", "--max-dof", "400", "--out", str(out), "--test-mode", "--quiet"]) == 0
    assert capsys.readouterr().out.startswith("levels=")
    header, *rows = (out / "history.csv").read_text().splitlines()
    assert header == ",".join(COLUMNS)
    ndof = [int(r.split(",")[1]) for r in rows]
    assert ndof == sorted(set(ndof))
    for L in range(len(rows)):
        for name in (f"mesh_{L}.txt", f"field_{L}.vtk", f"density_{L}.dat", f"estimator_{L}.txt"):
            assert (out / name).exists(), name
    est = np.loadtxt(out / "estimator.dat")
    assert est.shape == (len(rows), 9)
    dens = np.loadtxt(out / "density_0.dat")
    assert dens.shape[1] == 2 and np.all(np.diff(dens[:, 0]) > 0)


def test_mesh_snapshot_roundtrip(tmp_path):
    m = nvb_refine(unit_square_mesh(2, "example62"), [1, 4])
    io.write_mesh(tmp_path / "m.txt", m)
    again = io.read_mesh(tmp_path / "m.txt")
    assert again == m
    assert np.array_equal(again.vertices, m.vertices) and np.array_equal(again.triangles, m.triangles)
    assert list(again.boundary_markers) == list(m.boundary_markers)


def test_vtk_layout():
    from signorini_afem.fespace import build_space

    V = build_space(unit_square_mesh(1))
    u = V.interpolate(lambda x, y: (x, -y))
    lines = io.vtk_text(V, u).splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    i = lines.index("CELLS 2 14")
    cell = [int(v) for v in lines[i + 1].split()]
    assert cell[0] == 6
    # points 3..5 of a VTK quadratic triangle are the midpoints of (0,1), (1,2), (2,0)
    p = V.coords[cell[1:]]
    for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        assert np.allclose(p[3 + k], 0.5 * (p[a] + p[b]))
    assert lines[lines.index("CELL_TYPES 2") + 1] == "22"
    j = lines.index("VECTORS displacement double")
    vec = np.array([[float(t) for t in ln.split()] for ln in lines[j + 1 : j + 1 + V.n_nodes]])
    assert np.allclose(vec[:, :2], V.coords * [1, -1])


def test_custom_mesh_problem(tmp_path):
    io.write_mesh(tmp_path / "m.txt", unit_square_mesh(2, "example61"))
    out = tmp_path / "o"
    rc = main(["--problem", "custom", "--mesh", str(tmp_path / "m.txt"), "--max-dof", "200", "--out", str(out), "--quiet"])
    assert rc == 0
    assert (out / "history.csv").exists()


def test_custom_mesh_errors_are_one_line(tmp_path, capsys):
    (tmp_path / "bad.txt").write_text("$nodes 1\n0 0 0\n")
    rc = main(["--problem", "custom", "--mesh", str(tmp_path / "bad.txt"), "--out", str(tmp_path), "--quiet"])
    assert rc == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error stage=run type=MeshError")
