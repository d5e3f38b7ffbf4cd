"""Command-line front end.

Settings come from an optional ``key=value`` config file and from flags;
flags given on the command line win.  Any failure ends the run with one
``error stage=... type=... message=...`` line on stderr and a nonzero exit.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import io
from .adapt import adaptive_solve
from .assembly import MaterialParams
from .fespace import build_space
from .problems import BUILTIN, Problem, get_problem

log = logging.getLogger("signorini_afem")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "example61"
    theta: float = 0.4
    max_dof: int = 20000
    out: str = "out"
    mesh: str | None = None
    mu: float | None = None
    chi: float | None = None
    n0: int = 2
    eta5_mode: str = "consistent"
    test_mode: bool = False
    # data of a file-based custom problem (constants)
    force: str = "0,0"
    traction: str = "0,0"
    dirichlet: str = "0,0"
    gap: float = 0.0

    def validate(self):
        if self.problem not in BUILTIN and self.problem != "custom":
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(BUILTIN) + ['custom']}")
        if not 0 < self.theta <= 1:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta}")
        if self.max_dof <= 0:
            raise ConfigError(f"max_dof must be positive, got {self.max_dof}")
        if self.problem == "custom" and not self.mesh:
            raise ConfigError("problem=custom needs mesh=<file>")
        if self.eta5_mode not in ("consistent", "literal"):
            raise ConfigError(f"eta5_mode must be 'consistent' or 'literal', got {self.eta5_mode!r}")
        for name in ("mu", "chi"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, value):
    kind = _TYPES[key]
    try:
        if "bool" in kind:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if "int" in kind:
            return int(value)
        if "float" in kind:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_config_text(text):
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return values


def _pair(text, what):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{what} must be 'x,y', got {text!r}") from None
    return a, b


def build_problem(cfg):
    if cfg.problem == "custom":
        mesh = io.read_mesh(cfg.mesh)
        fx, fy = _pair(cfg.force, "force")
        gx, gy = _pair(cfg.traction, "traction")
        dx, dy = _pair(cfg.dirichlet, "dirichlet")
        gap = cfg.gap
        problem = Problem(
            name="custom",
            initial_mesh=lambda: mesh,
            material=MaterialParams(mu=cfg.mu or 1.0, chi=cfg.chi or 1.0),
            f=(lambda x, y: (fx + 0 * x, fy + 0 * x)) if (fx or fy) else None,
            g=(lambda x, y, n: (gx + 0 * x, gy + 0 * x)) if (gx or gy) else None,
            dirichlet=(lambda x, y: (dx + 0 * x, dy + 0 * x)) if (dx or dy) else None,
            obstacle=lambda s: gap + 0 * s,
        )
        return problem
    kwargs = {"n0": cfg.n0}
    problem = get_problem(cfg.problem, **kwargs)
    if cfg.mu is not None or cfg.chi is not None:
        if problem.exact is not None:
            log.warning("material override: the manufactured data no longer match the exact solution")
        problem = problem.with_material(MaterialParams(mu=cfg.mu or problem.material.mu, chi=cfg.chi or problem.material.chi))
    return problem


def build_parser():
    p = argparse.ArgumentParser(prog="signorini-afem", description="Adaptive P2 finite elements for Signorini contact.")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--problem", help="example61 | example62 | uncontacted | custom")
    p.add_argument("--theta", type=float, help="Dörfler bulk parameter in (0, 1]")
    p.add_argument("--max-dof", type=int, dest="max_dof", help="stop once the dof count exceeds this")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mesh", help="mesh file (custom problem)")
    p.add_argument("--mu", type=float, help="shear modulus override")
    p.add_argument("--chi", type=float, help="first Lamé parameter override")
    p.add_argument("--n0", type=int, help="cells per side of the initial structured mesh")
    p.add_argument("--eta5-mode", dest="eta5_mode", choices=("consistent", "literal"))
    p.add_argument("--test-mode", dest="test_mode", action="store_true", default=None,
                   help="deterministic sequential run")
    p.add_argument("--quiet", action="store_true")
    return p


def resolve_config(argv):
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        values.update(parse_config_text(text))
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg, args


def run(cfg):
    """Run the adaptive loop and write all output files into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    initial = problem.initial_mesh()
    ndof0 = build_space(initial).n_dofs
    if cfg.max_dof < ndof0:
        raise ConfigError(f"max_dof={cfg.max_dof} is below the initial dof count {ndof0}")

    def on_level(state, row):
        L = state.level
        io.write_mesh(out / f"mesh_{L}.txt", state.mesh)
        io.write_vtk(out / f"field_{L}.vtk", state.space, state.solution.coeffs)
        if state.density is not None:
            io.write_density(out / f"density_{L}.dat", state.density)
        io.write_report(out / f"estimator_{L}.txt", state.report)

    history, _ = adaptive_solve(problem, cfg.theta, cfg.max_dof, eta5_mode=cfg.eta5_mode, on_level=on_level)
    io.write_history(out / "history.csv", history)
    io.write_estimator_columns(out / "estimator.dat", history)
    return history


def _error_line(stage, exc):
    msg = " ".join(str(exc).split()) or exc.__class__.__name__
    return f"error stage={stage} type={exc.__class__.__name__} message={msg!r}"


def main(argv=None):
    stage = "config"
    try:
        cfg, args = resolve_config(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
        stage = "run"
        if cfg.test_mode:
            # one BLAS thread: reductions happen in a fixed order
            with threadpool_limits(limits=1):
                history = run(cfg)
        else:
            history = run(cfg)
    except SystemExit:
        raise
    except ConfigError as exc:
        print(_error_line(stage, exc), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - one line per failure, by contract
        print(_error_line(stage, exc), file=sys.stderr)
        return 1
    last = history.rows[-1]
    print(f"levels={len(history)} ndof={last['ndof']} eta={last['eta']:.6e} out={cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
