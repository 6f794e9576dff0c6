"""SUPG discretisation and the SUPG error norm."""
from __future__ import annotations

import numpy as np

from .assembly import (ERROR_POINTS, ERROR_WEIGHTS, TRI_POINTS, TRI_WEIGHTS, DiscreteSystem, _scatter, apply_dirichlet,
                       assemble_galerkin, error_cellwise, fe_values, quadrature_points)
from .linalg import sparse_solve
from .mesh import Mesh
from .problems import ProblemSpec


def _b_norm_inf(mesh: Mesh, prob: ProblemSpec) -> np.ndarray:
    X = np.concatenate([quadrature_points(mesh), mesh.vertices[mesh.cells]], axis=1)
    b = prob.b_at(X[..., 0], X[..., 1])
    return np.sqrt(b[0] ** 2 + b[1] ** 2).max(axis=1)


def stabilization_parameters(mesh: Mesh, prob: ProblemSpec, kind: str = "classical",
                             scale: float = 1.0) -> np.ndarray:
    """Per-cell SUPG parameter.

    ``classical``: ``h/(2|b|) (coth(Pe) - 1/Pe)`` with ``Pe = |b| h / (2 eps)``;
    ``constant``: ``scale * h``. Both vanish where ``b = 0``.
    """
    h = mesh.diameters
    bn = _b_norm_inf(mesh, prob)
    tau = np.zeros(mesh.n_cells)
    moving = bn > 0
    if kind == "classical":
        pe = bn[moving] * h[moving] / (2.0 * prob.epsilon)
        small = pe < 1e-3
        xi = np.empty_like(pe)
        # series of coth(x) - 1/x avoids cancellation for small Peclet numbers
        ps = pe[small]
        xi[small] = ps / 3.0 - ps**3 / 45.0 + 2.0 * ps**5 / 945.0
        pl = pe[~small]
        xi[~small] = 1.0 / np.tanh(pl) - 1.0 / pl
        tau[moving] = scale * h[moving] / (2.0 * bn[moving]) * xi
    elif kind == "constant":
        tau[moving] = scale * h[moving]
    else:
        raise ValueError(f"unknown SUPG parameter kind {kind!r}")
    return tau


def assemble_supg(mesh: Mesh, prob: ProblemSpec, tau: np.ndarray) -> tuple[DiscreteSystem, np.ndarray, np.ndarray]:
    """Galerkin system plus the SUPG terms; returns (galerkin system, matrix, rhs)."""
    sys = assemble_galerkin(mesh, prob)
    G = mesh.gradients
    X = quadrature_points(mesh)
    x, y = X[..., 0], X[..., 1]
    b = prob.b_at(x, y)
    bgrad = np.einsum("dmq,mjd->mqj", b, G)  # b.grad(phi_j) at the quadrature points
    c = prob.c_at(x, y)
    f = prob.f_at(x, y)
    w = (tau * sys.mesh.areas)[:, None]
    trial = bgrad + c[:, :, None] * TRI_POINTS[None, :, :]
    local = np.einsum("m,q,mqj,mqi->mij", w[:, 0], TRI_WEIGHTS, trial, bgrad)
    load = np.einsum("m,q,mq,mqi->mi", w[:, 0], TRI_WEIGHTS, f, bgrad)
    matrix = sys.A + _scatter(mesh, local)
    rhs = sys.F + np.bincount(mesh.cells.ravel(), weights=load.ravel(), minlength=mesh.n_vertices)
    return sys, matrix, rhs


def solve_supg(mesh: Mesh, prob: ProblemSpec, tau: np.ndarray | None = None,
               kind: str = "classical", scale: float = 1.0) -> np.ndarray:
    if tau is None:
        tau = stabilization_parameters(mesh, prob, kind, scale)
    sys, matrix, rhs = assemble_supg(mesh, prob, tau)
    M, r = apply_dirichlet(matrix, rhs, sys.dirichlet, sys.u_dirichlet)
    return sparse_solve(M, r)


def supg_norm_error(u_h: np.ndarray, prob: ProblemSpec, mesh: Mesh, tau: np.ndarray) -> float:
    """``(||u - u_h||_a^2 + sum_K tau_K ||b.grad(u - u_h)||_K^2)^(1/2)``."""
    h1, l2 = error_cellwise(mesh, u_h, prob)
    X = quadrature_points(mesh, ERROR_POINTS)
    x, y = X[..., 0], X[..., 1]
    _, grad = fe_values(mesh, u_h, ERROR_POINTS)
    ge = prob.exact.grad(x, y) - grad.T[:, :, None]
    b = prob.b_at(x, y)
    stream = (b[0] * ge[0] + b[1] * ge[1]) ** 2
    s = mesh.areas * (stream @ ERROR_WEIGHTS)
    total = prob.epsilon * h1.sum() + prob.sigma0 * l2.sum() + np.sum(tau * s)
    return float(np.sqrt(total))
