"""Command line: run, sweep, mesh-info, check and plot-script."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adaptivity import ADAPTIVE, UNIFORM, AdaptiveOptions, adaptive_loop
from .afc import LIMITERS, SolverOptions
from .estimators import TECHNIQUES, EstimatorConstants
from .mesh import compute_cell_geometry, is_delaunay, min_angle, read_mesh, refine_uniform, unit_square_macro
from .problems import PROBLEMS, get_problem

log = logging.getLogger("afcpost")

DEFAULT_EPSILON = {"boundary_layer": 1e-3, "hmm86": 1e-4}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "boundary_layer"
    epsilon: Optional[float] = None  # None: the problem's default
    limiter: str = "kuzmin"
    technique: str = "afc_energy"
    refinement: str = ADAPTIVE
    theta: float = 0.5
    min_fraction: float = 0.1
    max_dofs: int = 100_000
    eta_tol: float = 1e-3
    start_level: int = 2
    uniform_until: int = 4
    omega: float = 1.0
    tol: float = 1e-10
    max_iter: int = 25000
    init: str = "supg"
    C_inv: float = 1.0
    edge_scaling: str = "scaled"
    gamma: object = "patch"
    supg_tau: str = "classical"
    supg_scale: float = 1.0
    output_dir: str = "out"
    dump: bool = False
    timing: bool = True

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.limiter not in LIMITERS:
            raise ConfigError(f"unknown limiter {self.limiter!r}; choose from {LIMITERS}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not (isinstance(self.gamma, (int, float)) and self.gamma > 0) and self.gamma != "patch":
            raise ConfigError("gamma must be 'patch' or a positive number")
        try:
            self.adaptive_options()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def eps(self) -> float:
        return self.epsilon if self.epsilon is not None else DEFAULT_EPSILON[self.problem]

    def adaptive_options(self) -> AdaptiveOptions:
        solver = SolverOptions(omega=self.omega, tol=self.tol, max_iter=self.max_iter, init=self.init,
                               gamma=self.gamma)
        dump = str(Path(self.output_dir) / "levels") if self.dump else None
        return AdaptiveOptions(technique=self.technique, limiter=self.limiter, refinement=self.refinement,
                               theta=self.theta, min_fraction=self.min_fraction, max_dofs=self.max_dofs,
                               eta_tol=self.eta_tol, start_level=self.start_level,
                               uniform_until=self.uniform_until, solver=solver, C_inv=self.C_inv,
                               edge_scaling=self.edge_scaling, supg_tau=self.supg_tau,
                               supg_scale=self.supg_scale, timing=self.timing, dump_dir=dump)


_FIELD_TYPES = {"epsilon": float, "max_dofs": int, "max_iter": int, "start_level": int, "uniform_until": int,
                "theta": float, "min_fraction": float, "eta_tol": float, "omega": float, "tol": float,
                "C_inv": float, "supg_scale": float}


def _coerce(name: str, value):
    if name in ("dump", "timing"):
        if isinstance(value, str):
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ConfigError(f"{name} must be a boolean")
            return value.lower() in ("1", "true", "yes")
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if name == "gamma":
        if value == "patch":
            return value
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError("gamma must be 'patch' or a positive number") from None
    kind = _FIELD_TYPES.get(name)
    if kind is None:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    if value is None and name == "epsilon":
        return None
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be numeric")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be {kind.__name__}") from None
    if kind is int and float(value) != out:
        raise ConfigError(f"{name} must be an integer")
    return out


def build_config(data: dict, overrides: Optional[dict] = None) -> RunConfig:
    """Flat dict (JSON config) plus CLI overrides -> validated RunConfig."""
    known = {f.name for f in fields(RunConfig)}
    merged = dict(data)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    cfg.validate()
    return cfg


def load_config(path: Optional[str], overrides: Optional[dict] = None) -> RunConfig:
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    return build_config(data, overrides)


def run(cfg: RunConfig) -> Path:
    """Run one configuration; writes run.csv and config.json into output_dir."""
    prob = get_problem(cfg.problem, cfg.eps)
    out = Path(cfg.output_dir)
    record = adaptive_loop(prob, cfg.technique, cfg.limiter, cfg.adaptive_options())
    out.mkdir(parents=True, exist_ok=True)
    # write to a temporary name first so a crash never leaves a partial table
    tmp = out / "run.csv.tmp"
    tmp.write_text(record.to_csv())
    tmp.replace(out / "run.csv")
    (out / "config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n")
    return out / "run.csv"


def _run_one(cfg: RunConfig) -> tuple[str, str]:
    try:
        return cfg.output_dir, str(run(cfg))
    except Exception as exc:  # reported per config, the sweep continues
        return cfg.output_dir, f"error: {exc}"


def sweep(configs: Sequence[RunConfig], workers: int = 1) -> list[tuple[str, str]]:
    if workers <= 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, configs))


def mesh_info(level: int = 2, path: Optional[str] = None) -> dict:
    mesh = read_mesh(path) if path else refine_uniform(unit_square_macro(), level)
    geo = compute_cell_geometry(mesh)
    ok, bad = is_delaunay(mesh)
    return {
        "vertices": mesh.n_vertices,
        "cells": mesh.n_cells,
        "edges": mesh.n_edges,
        "h_max": float(geo.h.max()),
        "min_angle_deg": float(np.degrees(min_angle(mesh))),
        "c_edge_max": geo.c_edge_max,
        "C_edge_max_scaled": EstimatorConstants.for_mesh(mesh).C_edge_max,
        "c_shrg": geo.c_shrg,
        "delaunay": bool(ok),
        "non_delaunay_edges": int(len(bad)),
    }


GNUPLOT_TEMPLATE = """set datafile separator ','
set key autotitle columnhead
set logscale xy
set format x '10^{{%L}}'
set xlabel '# dof'
set ylabel '{ylabel}'
set grid
plot {plots}
"""


def plot_script(csv_paths: Sequence[str], column: str = "error_energy") -> str:
    plots = ", ".join(f"'{p}' using 'dofs':'{column}' with linespoints title '{Path(p).parent.name}'"
                      for p in csv_paths)
    return GNUPLOT_TEMPLATE.format(ylabel=column, plots=plots)


def _add_overrides(p: argparse.ArgumentParser) -> None:
    for f in fields(RunConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None)


def _overrides(ns: argparse.Namespace) -> dict:
    return {f.name: getattr(ns, f.name) for f in fields(RunConfig) if getattr(ns, f.name, None) is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afcpost", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config", nargs="?", help="flat JSON config")
    _add_overrides(p)

    p = sub.add_parser("sweep", help="run several configurations")
    p.add_argument("configs", nargs="+")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("mesh-info", help="geometry metrics of a mesh")
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--mesh", help="mesh file written by write_mesh")

    p = sub.add_parser("check", help="run the randomized property checks")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("plot-script", help="print a gnuplot script for run.csv files")
    p.add_argument("csv", nargs="+")
    p.add_argument("--column", default="error_energy")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            path = run(load_config(args.config, _overrides(args)))
            print(path)
        elif args.command == "sweep":
            configs = [load_config(c) for c in args.configs]
            failed = 0
            for out, status in sweep(configs, args.workers):
                print(f"{out}: {status}")
                failed += status.startswith("error")
            return 1 if failed else 0
        elif args.command == "mesh-info":
            for k, v in mesh_info(args.level, args.mesh).items():
                print(f"{k}: {v}")
        elif args.command == "check":
            from .checks import run_all
            results = run_all(args.seed)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
            return 0 if all(r.passed for r in results) else 1
        elif args.command == "plot-script":
            print(plot_script(args.csv, args.column), end="")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
