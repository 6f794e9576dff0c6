"""Randomized self-checks of the discrete invariants, usable without benchmark data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .afc import BJK, KUZMIN, LimiterState, SolverOptions, bjk_alpha, dh_edge, dh_point, kuzmin_alpha, solve_afc
from .assembly import assemble_galerkin
from .linalg import pattern_of
from .mesh import Mesh, compute_cell_geometry, is_delaunay, refine_adaptive, refine_uniform, unit_square_macro
from .problems import constant_problem, example_boundary_layer


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def sample_meshes(seed: int = 0) -> list[Mesh]:
    """A uniform grid and a red-green grid with green cells."""
    rng = np.random.default_rng(seed)
    uniform = refine_uniform(unit_square_macro(), 3)
    m = refine_uniform(unit_square_macro(), 2)
    for _ in range(3):
        m = refine_adaptive(m, rng.choice(m.n_cells, max(1, m.n_cells // 5), replace=False))
    return [uniform, m]


def random_symmetric_state(D, rng) -> LimiterState:
    p = pattern_of(D)
    a = rng.uniform(0.0, 1.0, len(D.data))
    a = np.where(p.rows < p.cols, a, a[p.transpose])
    a[~p.offdiag] = 1.0
    return LimiterState(p.matrix(a), "random")


def check_dh_forms(seed: int = 0, trials: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mesh in sample_meshes(seed):
        D = assemble_galerkin(mesh, example_boundary_layer()).D
        for _ in range(trials):
            state = random_symmetric_state(D, rng)
            u, v = rng.normal(size=(2, mesh.n_vertices))
            a, b = dh_point(state, D, u, v), dh_edge(state, D, mesh, u, v)
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return CheckResult("dh point form equals edge form", worst <= 1e-12, f"max rel diff {worst:.2e}")


def check_diffusion_invariants(seed: int = 0) -> CheckResult:
    worst = 0.0
    for mesh in sample_meshes(seed):
        for prob in (example_boundary_layer(), constant_problem(0.1, b=(1.0, -0.5), c=1.0)):
            D = assemble_galerkin(mesh, prob).D
            off = D - sp.diags(D.diagonal())
            scale = abs(D).max()
            worst = max(worst, abs(D - D.T).max() / scale, max(off.max(), 0.0) / scale,
                        np.abs(np.asarray(D.sum(axis=1))).max() / scale)
    delaunay_zero = True
    for mesh in sample_meshes(seed):
        if is_delaunay(mesh)[0]:
            D = assemble_galerkin(mesh, constant_problem(1.0)).D
            delaunay_zero &= abs(D).max() <= 1e-12
    ok = worst <= 1e-12 and delaunay_zero
    return CheckResult("artificial diffusion symmetric, M-shaped, zero row sums", ok,
                       f"max violation {worst:.2e}; D = 0 for diffusion on Delaunay grids: {delaunay_zero}")


def check_limiter_bounds(seed: int = 0, trials: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = True
    for mesh in sample_meshes(seed):
        sys = assemble_galerkin(mesh, example_boundary_layer())
        for _ in range(trials):
            u = rng.normal(size=mesh.n_vertices)
            u[rng.random(mesh.n_vertices) < 0.2] = 0.5  # plateaus give zero fluxes
            p = sys.pattern
            zero_flux = p.offdiag & (sys.D.data * (u[p.cols] - u[p.rows]) == 0)
            for state in (kuzmin_alpha(sys.A, sys.D, u, sys.dirichlet, p),
                          bjk_alpha(sys.D, u, rng.uniform(0.5, 3.0), sys.dirichlet, p)):
                a = state.values
                ok &= bool(np.all((a >= 0) & (a <= 1)))
                ok &= bool(np.all(a[zero_flux & (sys.D.data != 0)] == 1.0))
    return CheckResult("limiter values in [0, 1], alpha = 1 on zero fluxes", ok, f"{trials} states per mesh")


def check_constant_reproduction(seed: int = 0) -> CheckResult:
    worst = 0.0
    for mesh in sample_meshes(seed):
        prob = constant_problem(1e-3, b=(1.0, 0.5), c=2.0, f=2.0 * 0.7, u_D=0.7)
        for kind in (KUZMIN, BJK):
            sol = solve_afc(mesh, prob, kind)
            worst = max(worst, np.abs(sol.u - 0.7).max())
    return CheckResult("constant solution reproduced", worst <= 1e-10, f"max deviation {worst:.2e}")


def check_edge_trace(seed: int = 0, samples: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mesh in sample_meshes(seed):
        geo = compute_cell_geometry(mesh)
        X = mesh.vertices[mesh.cells]  # (M, 3, 2)
        lengths = mesh.local_edge_lengths
        tang = np.stack([X[:, 2] - X[:, 1], X[:, 0] - X[:, 2], X[:, 1] - X[:, 0]], axis=1) / lengths[..., None]
        for _ in range(samples // 100):
            g = rng.normal(size=(100, 2))
            lhs = np.sum(np.einsum("sd,mkd->msk", g, tang) ** 2 * lengths[:, None, :], axis=2)
            rhs = geo.c_edge[:, None] * mesh.areas[:, None] * np.sum(g**2, axis=1)[None, :]
            worst = max(worst, float(np.max(lhs / rhs)))
    return CheckResult("edge trace bound with c_edge", worst <= 1.0, f"max lhs/rhs {worst:.3e}")


def check_diffusion_one_step(seed: int = 0) -> CheckResult:
    ok = True
    detail = []
    # D = 0 needs a Delaunay grid; elsewhere the limiter is active
    for mesh in (m for m in sample_meshes(seed) if is_delaunay(m)[0]):
        prob = constant_problem(1.0, f=1.0)
        for kind in (KUZMIN, BJK):
            sol = solve_afc(mesh, prob, kind, SolverOptions(init="zero"))
            ok &= sol.stats.converged and sol.stats.iterations == 1
            detail.append(sol.stats.iterations)
    return CheckResult("pure diffusion converges in one iteration", ok, f"iterations {detail}")


def check_solver_residual(seed: int = 0) -> CheckResult:
    worst = 0.0
    mesh = refine_uniform(unit_square_macro(), 3)
    prob = example_boundary_layer()
    for kind in (KUZMIN, BJK):
        sol = solve_afc(mesh, prob, kind)
        if sol.stats.converged:
            worst = max(worst, sol.stats.residual)
    return CheckResult("converged residual below tolerance", worst <= 1e-10, f"max residual {worst:.2e}")


ALL_CHECKS: list[Callable[..., CheckResult]] = [
    check_dh_forms, check_diffusion_invariants, check_limiter_bounds, check_constant_reproduction,
    check_edge_trace, check_diffusion_one_step, check_solver_residual,
]


def run_all(seed: int = 0) -> list[CheckResult]:
    return [check(seed) for check in ALL_CHECKS]
