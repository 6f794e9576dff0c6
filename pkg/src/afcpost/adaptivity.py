"""Maximum marking and the solve/estimate/mark/refine driver."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .afc import SolverOptions, solve_afc
from .assembly import assemble_galerkin, energy_norm_error
from .estimators import (AFC_ENERGY, AFC_SUPG_ENERGY, TECHNIQUES, EstimatorConstants,
                         afc_energy_estimate, afc_supg_energy_estimate, effectivity_index, smear_int)
from .mesh import Mesh, check_admissible, refine_adaptive, refine_uniform, unit_square_macro, write_mesh
from .problems import ProblemSpec
from .supg import solve_supg, stabilization_parameters

log = logging.getLogger(__name__)

UNIFORM = "uniform"
ADAPTIVE = "adaptive"


def mark_cells(eta_K, theta: float = 0.5, min_fraction: float = 0.1) -> np.ndarray:
    """Maximum strategy: mark ``eta_K >= theta * max(eta)``.

    If fewer than ``min_fraction`` of the cells are marked, ``theta`` is
    halved and marking repeated, until the fraction is reached or
    ``theta < 1e-3``. Returns sorted cell indices.
    """
    eta = np.asarray(eta_K, dtype=float)
    if eta.ndim != 1 or eta.size == 0:
        raise ValueError("expected a nonempty 1d array of indicators")
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise ValueError("indicators must be finite and nonnegative")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    top = eta.max()
    if top == 0:
        raise ValueError("all indicators vanish; nothing to refine")
    marked = np.flatnonzero(eta >= theta * top)
    while marked.size < min_fraction * eta.size:
        theta *= 0.5
        if theta < 1e-3:
            break
        marked = np.flatnonzero(eta >= theta * top)
    return marked


@dataclass
class AdaptiveOptions:
    technique: str = AFC_ENERGY
    limiter: str = "kuzmin"
    refinement: str = ADAPTIVE
    theta: float = 0.5
    min_fraction: float = 0.1
    max_dofs: int = 100_000
    eta_tol: float = 1e-3
    start_level: int = 2
    uniform_until: int = 4
    solver: SolverOptions = field(default_factory=SolverOptions)
    C_inv: float = 1.0
    edge_scaling: str = "scaled"
    supg_tau: str = "classical"
    supg_scale: float = 1.0
    smear: Optional[bool] = None  # None: only for problems without an exact solution
    timing: bool = True
    dump_dir: Optional[str] = None

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise ValueError(f"unknown technique {self.technique!r}; choose from {TECHNIQUES}")
        if self.refinement not in (UNIFORM, ADAPTIVE):
            raise ValueError(f"unknown refinement {self.refinement!r}")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not 0 <= self.min_fraction <= 1:
            raise ValueError("min_fraction must lie in [0, 1]")
        if self.max_dofs < 1 or self.eta_tol < 0:
            raise ValueError("max_dofs must be positive and eta_tol nonnegative")
        if self.start_level < 0 or self.uniform_until < self.start_level:
            raise ValueError("need 0 <= start_level <= uniform_until")


@dataclass
class LevelRow:
    level: int
    dofs: int
    cells: int
    error_energy: Optional[float]
    eta: float
    eta1: Optional[float]
    eta2: Optional[float]
    eta3: Optional[float]
    eta_supg: Optional[float]
    eta_afc_supg: Optional[float]
    eta_dh_total: Optional[float]
    effectivity: Optional[float]
    smear_int: Optional[float]
    nl_iters: int
    converged: bool
    seconds: Optional[float]
    u_min: float = field(default=np.nan, repr=False)
    u_max: float = field(default=np.nan, repr=False)


CSV_COLUMNS = [f.name for f in fields(LevelRow) if f.name not in ("u_min", "u_max")]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class AdaptiveRunRecord:
    rows: list = field(default_factory=list)
    options: Optional[AdaptiveOptions] = None
    problem: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]


def _initial_mesh(prob: ProblemSpec, level: int) -> Mesh:
    return refine_uniform(unit_square_macro(prob.boundary_marker), level)


def adaptive_loop(prob: ProblemSpec, technique: Optional[str] = None, limiter_kind: Optional[str] = None,
                  opts: Optional[AdaptiveOptions] = None,
                  on_level: Optional[Callable] = None) -> AdaptiveRunRecord:
    """Run the refinement loop from the level-``start_level`` grid.

    Levels up to ``uniform_until`` are refined uniformly (all levels in
    uniform mode). A level whose dof count exceeds ``max_dofs`` is not
    solved; the loop also stops once ``eta < eta_tol``. ``on_level`` is
    called as ``on_level(row, mesh, u_h)`` after every level.
    """
    opts = opts or AdaptiveOptions()
    technique = technique or opts.technique
    limiter_kind = limiter_kind or opts.limiter
    if technique not in TECHNIQUES:
        raise ValueError(f"unknown technique {technique!r}")
    want_smear = opts.smear if opts.smear is not None else prob.exact is None
    dump = Path(opts.dump_dir) if opts.dump_dir else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)

    record = AdaptiveRunRecord(options=opts, problem=prob.name)
    level = opts.start_level
    mesh = _initial_mesh(prob, level)
    while mesh.n_vertices <= opts.max_dofs:
        t0 = time.perf_counter()
        check_admissible(mesh)
        system = assemble_galerkin(mesh, prob)
        u_supg = None
        if technique == AFC_SUPG_ENERGY or opts.solver.init == "supg":
            tau = stabilization_parameters(mesh, prob, opts.supg_tau, opts.supg_scale)
            u_supg = solve_supg(mesh, prob, tau)
        sol = solve_afc(mesh, prob, limiter_kind, opts.solver,
                        u0=u_supg if opts.solver.init == "supg" else None, system=system)
        if not sol.stats.converged:
            log.warning("level %d: nonlinear solver stopped at residual %.3e after %d iterations",
                        level, sol.stats.residual, sol.stats.iterations)
        consts = EstimatorConstants.for_mesh(mesh, C_inv=opts.C_inv, edge_scaling=opts.edge_scaling)
        if technique == AFC_ENERGY:
            rep = afc_energy_estimate(sol.u, sol.limiter, system.D, mesh, prob, consts)
        else:
            rep = afc_supg_energy_estimate(sol.u, u_supg, mesh, prob, consts)
        err = energy_norm_error(sol.u, prob, mesh) if prob.exact is not None else None
        eff = effectivity_index(rep.eta, err) if err is not None else None
        smear = smear_int(sol.u, mesh) if want_smear else None
        dh_total = float(np.sqrt(np.sum(rep.parts["dh"]))) if technique == AFC_ENERGY else None
        seconds = time.perf_counter() - t0 if opts.timing else None
        row = LevelRow(level, mesh.n_vertices, mesh.n_cells, err, rep.eta, rep.eta1, rep.eta2, rep.eta3,
                       rep.eta_supg, rep.eta_afc_supg, dh_total, eff, smear,
                       sol.stats.iterations, sol.stats.converged, seconds,
                       float(sol.u.min()), float(sol.u.max()))
        record.rows.append(row)
        log.info("level %d: %d dofs, eta=%.4g, error=%s, iters=%d", level, mesh.n_vertices, rep.eta,
                 "-" if err is None else f"{err:.4g}", sol.stats.iterations)
        if dump:
            write_mesh(mesh, dump / f"mesh_{level:03d}.txt")
            np.savetxt(dump / f"solution_{level:03d}.txt", sol.u, fmt="%.17g")
        if on_level is not None:
            on_level(row, mesh, sol.u)
        if rep.eta < opts.eta_tol:
            break
        if opts.refinement == UNIFORM or level < opts.uniform_until:
            mesh = refine_uniform(mesh)
        else:
            try:
                marked = mark_cells(rep.per_cell, opts.theta, opts.min_fraction)
            except ValueError:
                break
            mesh = refine_adaptive(mesh, marked)
        level += 1
    return record
