"""Command-line driver for dimension checks, interpolation and PDE convergence studies."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .fespace import dimension_formula
from .functions import EXACT_SOLUTIONS, exact_solution
from .lattice import ConstraintViolation, SmoothnessVector
from .mesh import Mesh, builtin_mesh, load_mesh, parse_mesh_spec
from .polyharmonic import ConvergenceRow, ConvergenceTable, SolverError, convergence_study

log = logging.getLogger("smoothfem")

BUILTIN_KIND = {1: "interval", 2: "square", 3: "cube"}
DEFAULT_EXACT = {1: "sin2pi1d", 2: "sincos45", 3: "sin2pi3d"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    dim: int = 2
    degree: int | None = None
    smoothness: int | None = None
    rvec: tuple[int, ...] | None = None
    mesh: str | None = None
    levels: int = 1
    exact: str | None = None
    output: str | None = None
    format: str = "csv"
    threads: int = 1

    def smoothness_vector(self) -> SmoothnessVector:
        if self.rvec is not None:
            if len(self.rvec) != self.dim + 1:
                raise ConfigError(f"--rvec needs {self.dim + 1} entries for dim {self.dim}")
            r = self.rvec
            k = self.degree if self.degree is not None else 2 * r[0] + 1
            return SmoothnessVector(r, k)
        m = 1 if self.smoothness is None else self.smoothness
        return SmoothnessVector.minimal(m, self.dim, self.degree)

    def validate(self) -> SmoothnessVector:
        if self.dim not in (1, 2, 3):
            raise ConfigError("--dim must be 1, 2 or 3")
        if self.levels < 1:
            raise ConfigError("--levels must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be positive")
        if self.exact is not None and self.exact not in EXACT_SOLUTIONS:
            raise ConfigError(f"unknown --exact {self.exact!r}; choose from {sorted(EXACT_SOLUTIONS)}")
        try:
            sm = self.smoothness_vector()
        except ConstraintViolation as exc:
            raise ConfigError(f"inadmissible smoothness: {exc}") from exc
        return sm

    def meshes(self) -> list[tuple[float, Mesh]]:
        spec = self.mesh or f"builtin:{BUILTIN_KIND[self.dim]}"
        try:
            kind, n, path = parse_mesh_spec(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if kind == "file":
            if self.levels != 1:
                raise ConfigError("file meshes are not refined; use --levels 1")
            try:
                mesh = load_mesh(path)
            except OSError as exc:
                raise ConfigError(f"cannot read mesh file: {exc}") from exc
            if mesh.dim != self.dim:
                raise ConfigError(f"mesh dimension {mesh.dim} does not match --dim {self.dim}")
            return [(mesh.h(), mesh)]
        if BUILTIN_KIND.get(self.dim) != kind:
            raise ConfigError(f"builtin:{kind} does not match --dim {self.dim}")
        n0 = n or 1
        return [(1.0 / (n0 * 2**i), builtin_mesh(kind, n0 * 2**i)) for i in range(self.levels)]


def run(config: ExperimentConfig, out=None) -> tuple[int, ConvergenceTable | None]:
    """Execute one experiment; returns an exit code and the table (if any)."""
    out = out or sys.stdout
    if config.experiment == "selftest":
        from .selftest import run_selftest

        return (0 if run_selftest(out) else 1), None
    sm = config.validate()
    meshes = config.meshes()
    cfg = asdict(config)
    cfg["rvec"] = list(sm.r)
    cfg["degree"] = sm.k
    if config.experiment == "dimcheck":
        rows = []
        for h, mesh in meshes:
            n = dimension_formula(mesh, sm)
            print(f"dim={n}", file=out)
            rows.append(ConvergenceRow(h, n, [], []))
        table = ConvergenceTable(cfg, rows)
    elif config.experiment in ("interpolate", "polyharmonic"):
        name = config.exact or DEFAULT_EXACT[config.dim]
        u = exact_solution(name)
        if u.dim != config.dim:
            raise ConfigError(f"exact solution {name} is {u.dim}-dimensional, not {config.dim}")
        orders = range(sm.m + 2)
        cfg["exact"] = name
        table = convergence_study(meshes, sm, u, config.experiment, orders, config.threads, cfg)
    else:
        raise ConfigError(f"unknown experiment {config.experiment!r}")
    if config.experiment != "dimcheck" or config.output:
        text = emit(table, config.format)
        if config.output:
            try:
                with open(config.output, "w") as fh:
                    fh.write(text)
            except OSError as exc:
                raise ConfigError(f"cannot write {config.output}: {exc}") from exc
        else:
            out.write(text)
    return 0, table


def _orders(table: ConvergenceTable) -> int:
    if table.rows:
        return len(table.rows[0].errors)
    m = table.config.get("smoothness")
    rvec = table.config.get("rvec")
    if rvec:
        return rvec[-2] + 2 if len(rvec) > 1 else 0
    return (m or 1) + 2


def emit(table: ConvergenceTable, fmt: str = "csv") -> str:
    """Serialise a table; CSV uses 3 significant digits for errors and 2 decimals for rates."""
    if fmt == "json":
        rows = [{"h": r.h, "ndof": r.ndof, "errors": r.errors, "rates": r.rates} for r in table.rows]
        return json.dumps({"config": table.config, "rows": rows}, indent=2) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = _orders(table)
    header = ["h", "ndof"]
    for j in range(n):
        header += [f"err_H{j}", f"rate_H{j}"]
    w.writerow(header)
    for r in table.rows:
        row = [f"{r.h:.6g}", str(r.ndof)]
        for j in range(len(r.errors)):
            rate = r.rates[j] if j < len(r.rates) else None
            row += [f"{r.errors[j]:.2e}", "-" if rate is None else f"{rate:.2f}"]
        w.writerow(row)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothfem", description=__doc__)
    p.add_argument("--experiment", required=True, choices=["interpolate", "polyharmonic", "dimcheck", "selftest"])
    p.add_argument("--dim", type=int, default=2, choices=[1, 2, 3])
    p.add_argument("--degree", type=int, metavar="K")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--smoothness", type=int, metavar="M")
    g.add_argument("--rvec", metavar="r0,...,rd", help="full smoothness vector")
    p.add_argument("--mesh", metavar="SPEC", help="builtin:square:N, builtin:cube:N or file:PATH")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--exact", metavar="NAME", help=f"one of {', '.join(sorted(EXACT_SOLUTIONS))}")
    p.add_argument("--output", metavar="PATH")
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--threads", type=int, default=1, metavar="T")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        rvec = tuple(int(v) for v in args.rvec.split(",")) if args.rvec else None
    except ValueError:
        print("error: --rvec must be comma-separated integers", file=sys.stderr)
        return 2
    config = ExperimentConfig(
        experiment=args.experiment,
        dim=args.dim,
        degree=args.degree,
        smoothness=args.smoothness,
        rvec=rvec,
        mesh=args.mesh,
        levels=args.levels,
        exact=args.exact,
        output=args.output,
        format=args.format,
        threads=args.threads,
    )
    try:
        code, _ = run(config)
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":
    sys.exit(main())
