"""Residual a posteriori estimators for AFC solutions.

Two techniques are provided:

* ``afc_energy``: interior residuals, face jumps and an edge term that
  measures the nonlinear stabilisation ``d_h``;
* ``afc_supg_energy``: a residual estimate of the SUPG solution plus the
  computable energy distance between the AFC and SUPG solutions.

Per-cell indicators distribute every face and edge term evenly over its
adjacent cells, so that ``sum_K eta_K^2 == eta^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .afc import LimiterState, edge_weights
from .assembly import (EDGE_POINTS, EDGE_WEIGHTS, ERROR_POINTS, ERROR_WEIGHTS, energy_norm_cellwise, fe_values,
                       integrate, quadrature_points)
from .mesh import DIRICHLET, NEUMANN, Mesh, compute_cell_geometry
from .problems import ProblemSpec

AFC_ENERGY = "afc_energy"
AFC_SUPG_ENERGY = "afc_supg_energy"
TECHNIQUES = (AFC_ENERGY, AFC_SUPG_ENERGY)


@dataclass(frozen=True)
class EstimatorConstants:
    """Constants of the upper bound.

    ``C_edge_max`` is the dimensionless trace constant ``max_K c_edge(K) h_K``
    (``edge_scaling="scaled"``) or the raw ``max_K c_edge(K)``
    (``edge_scaling="raw"``).
    """

    C_edge_max: float
    C_I: float = 1.0
    C_F: float = 1.0
    C_inv: float = 1.0
    C_Y: float = 4.0

    def __post_init__(self):
        for name in ("C_edge_max", "C_I", "C_F", "C_inv"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def kappa1(self) -> float:
        return self.C_edge_max * (1.0 + (1.0 + self.C_I) ** 2)

    @property
    def kappa2(self) -> float:
        return self.C_inv**2 * self.kappa1

    @classmethod
    def for_mesh(cls, mesh: Mesh, C_inv: float = 1.0, edge_scaling: str = "scaled",
                 **kw) -> "EstimatorConstants":
        geo = compute_cell_geometry(mesh)
        if edge_scaling == "scaled":
            c = float(np.max(geo.c_edge * geo.h))
        elif edge_scaling == "raw":
            c = float(np.max(geo.c_edge))
        else:
            raise ValueError(f"unknown edge scaling {edge_scaling!r}")
        return cls(C_edge_max=c, C_inv=C_inv, **kw)


@dataclass
class EstimatorReport:
    technique: str
    eta: float
    per_cell: np.ndarray
    eta1: Optional[float] = None
    eta2: Optional[float] = None
    eta3: Optional[float] = None
    eta_supg: Optional[float] = None
    eta_afc_supg: Optional[float] = None
    parts: dict = field(default_factory=dict)  # per-cell squared contributions
    effectivity: Optional[float] = None

    @property
    def eta_dh(self) -> Optional[float]:
        return self.eta3


def _weight(a: np.ndarray, b) -> np.ndarray:
    """``min(a, b)`` where ``b = inf`` selects ``a`` (sigma0 = 0)."""
    return np.minimum(a, b)


def _div(num: float, den: float) -> float:
    return num / den if den > 0 else np.inf


def interior_residual_sq(mesh: Mesh, prob: ProblemSpec, u_h: np.ndarray) -> np.ndarray:
    """``||f - b.grad(u_h) - c u_h||_{0,K}^2`` per cell (``lap u_h = 0`` on P1)."""
    X = quadrature_points(mesh, ERROR_POINTS)
    x, y = X[..., 0], X[..., 1]
    vals, grad = fe_values(mesh, u_h, ERROR_POINTS)
    b = prob.b_at(x, y)
    r = prob.f_at(x, y) - (b[0] * grad[:, 0, None] + b[1] * grad[:, 1, None]) - prob.c_at(x, y) * vals
    return integrate(mesh, r**2, ERROR_WEIGHTS)


def face_residual_sq(mesh: Mesh, prob: ProblemSpec, u_h: np.ndarray) -> np.ndarray:
    """``||R_F||_{0,F}^2`` per edge: ``eps`` times the normal-flux jump inside,
    ``g - eps grad(u_h).n`` on Neumann edges and zero on Dirichlet edges."""
    E = mesh.n_edges
    ec = mesh.edge_cells
    grad = np.einsum("mi,mid->md", u_h[mesh.cells], mesh.gradients)
    t = mesh.edge_tangents
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    h = mesh.edge_lengths
    out = np.zeros(E)
    inner = ec[:, 1] >= 0
    jump = np.sum((grad[ec[inner, 0]] - grad[ec[inner, 1]]) * n[inner], axis=1)
    out[inner] = (prob.epsilon * jump) ** 2 * h[inner]
    neu = (~inner) & (mesh.edge_markers == NEUMANN)
    if neu.any():
        k = np.flatnonzero(neu)
        cell = ec[k, 0]
        # outward normal: away from the vertex of the cell opposite to the edge
        centroid = mesh.vertices[mesh.cells[cell]].mean(axis=1)
        e = mesh.edges[k]
        mid = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
        nk = n[k] * np.sign(np.sum((mid - centroid) * n[k], axis=1))[:, None]
        flux = prob.epsilon * np.sum(grad[cell] * nk, axis=1)
        pa, pb = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
        s = EDGE_POINTS
        pts = pa[:, None, :] * (1 - s)[None, :, None] + pb[:, None, :] * s[None, :, None]
        g = prob.g_at(pts[..., 0], pts[..., 1])
        out[k] = h[k] * (((g - flux[:, None]) ** 2) @ EDGE_WEIGHTS)
    return out


def _edge_share(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Distribute per-edge values evenly over the adjacent cells."""
    ec = mesh.edge_cells
    count = (ec >= 0).sum(axis=1)
    share = values / count
    out = np.bincount(ec[:, 0], weights=share, minlength=mesh.n_cells)
    inner = ec[:, 1] >= 0
    out += np.bincount(ec[inner, 1], weights=share[inner], minlength=mesh.n_cells)
    return out


def _residual_terms(mesh: Mesh, prob: ProblemSpec, u_h: np.ndarray, factor: float,
                    C_I: float, C_F: float):
    eps, s0 = prob.epsilon, prob.sigma0
    h = mesh.diameters
    w_int = factor * _weight(C_I**2 * h**2 / eps, _div(C_I**2, s0))
    int_sq = w_int * interior_residual_sq(mesh, prob, u_h)
    hF = mesh.edge_lengths
    w_face = factor * _weight(C_F**2 * hF / eps, _div(C_F**2, np.sqrt(s0 * eps)))
    face_sq = w_face * face_residual_sq(mesh, prob, u_h)
    return int_sq, face_sq


def dh_edge_terms(mesh: Mesh, prob: ProblemSpec, u_h: np.ndarray, state: LimiterState,
                  D: sp.csr_matrix, consts: EstimatorConstants) -> np.ndarray:
    """Squared edge indicators
    ``min(4 k1 h_E^2/eps, 4 k2/sigma0) ((1-alpha_E) d_E)^2 h_E^-1 ||grad u_h . t_E||_E^2``."""
    hE = mesh.edge_lengths
    e = mesh.edges
    du = u_h[e[:, 1]] - u_h[e[:, 0]]
    tangential_sq = du**2 / hE  # constant tangential derivative on E
    w = _weight(4.0 * consts.kappa1 * hE**2 / prob.epsilon, _div(4.0 * consts.kappa2, prob.sigma0))
    return w * edge_weights(state, D, mesh) ** 2 / hE * tangential_sq


def afc_energy_estimate(u_h: np.ndarray, state: Optional[LimiterState], D: sp.csr_matrix,
                        mesh: Mesh, prob: ProblemSpec, consts: EstimatorConstants) -> EstimatorReport:
    if state is None:
        raise ValueError("the AFC-energy estimate needs the limiter state of u_h")
    c = consts.C_Y**2 / (2.0 * (consts.C_Y - 2.0))  # = 4 for C_Y = 4
    int_sq, face_sq = _residual_terms(mesh, prob, u_h, c, consts.C_I, consts.C_F)
    dh_sq = dh_edge_terms(mesh, prob, u_h, state, D, consts) * (c / 4.0)
    face_cell = _edge_share(mesh, face_sq)
    dh_cell = _edge_share(mesh, dh_sq)
    per_cell = int_sq + face_cell + dh_cell
    e1, e2, e3 = (float(np.sqrt(np.sum(v))) for v in (int_sq, face_sq, dh_sq))
    eta = float(np.sqrt(np.sum(int_sq) + np.sum(face_sq) + np.sum(dh_sq)))
    return EstimatorReport(AFC_ENERGY, eta, np.sqrt(per_cell), eta1=e1, eta2=e2, eta3=e3,
                           parts={"int": int_sq, "face": face_cell, "dh": dh_cell,
                                  "face_edges": face_sq, "dh_edges": dh_sq})


def supg_residual_estimate(u_supg: np.ndarray, mesh: Mesh, prob: ProblemSpec,
                           consts: EstimatorConstants) -> tuple[np.ndarray, np.ndarray]:
    """Cellwise squared surrogate for the SUPG error estimate (no Young factor)."""
    int_sq, face_sq = _residual_terms(mesh, prob, u_supg, 1.0, consts.C_I, consts.C_F)
    return int_sq, _edge_share(mesh, face_sq)


def afc_supg_energy_estimate(u_afc: np.ndarray, u_supg: np.ndarray, mesh: Mesh,
                             prob: ProblemSpec, consts: EstimatorConstants) -> EstimatorReport:
    """``eta^2 = 2 (eta_SUPG^2 + ||u_AFC - u_SUPG||_a^2)``."""
    if len(u_afc) != mesh.n_vertices or len(u_supg) != mesh.n_vertices:
        raise ValueError("solutions do not live on the given mesh")
    int_sq, face_cell = supg_residual_estimate(u_supg, mesh, prob, consts)
    supg_cell = int_sq + face_cell
    diff_cell = energy_norm_cellwise(mesh, u_afc - u_supg, prob.epsilon, prob.sigma0)
    per_cell = 2.0 * (supg_cell + diff_cell)
    eta_supg = float(np.sqrt(np.sum(supg_cell)))
    eta_diff = float(np.sqrt(np.sum(diff_cell)))
    eta = float(np.sqrt(2.0 * (eta_supg**2 + eta_diff**2)))
    return EstimatorReport(AFC_SUPG_ENERGY, eta, np.sqrt(per_cell), eta_supg=eta_supg,
                           eta_afc_supg=eta_diff,
                           parts={"supg": supg_cell, "afc_supg": diff_cell})


def effectivity_index(eta: float, error: float) -> Optional[float]:
    """``eta / error``; ``None`` when the error vanishes."""
    if not error > 0:
        return None
    return eta / error


def smear_int(u_h: np.ndarray, mesh: Mesh, y0: float = 0.25, low: float = 0.1,
              high: float = 0.9, n_samples: int = 1000) -> Optional[float]:
    """Width of the interior layer along the line ``y = y0``.

    ``u_h`` is sampled at the crossings of the line with mesh edges and at
    ``n_samples`` uniform points; ``x_low``/``x_high`` are the first
    (linearly interpolated) crossings of ``low`` and ``high``. Returns
    ``x_high - x_low`` or ``None`` when a level is never reached.
    """
    xs = _cut_samples(mesh, y0, n_samples)
    vals = evaluate_on_line(u_h, mesh, xs, y0)
    x1 = _first_crossing(xs, vals, low)
    x2 = _first_crossing(xs, vals, high)
    if x1 is None or x2 is None:
        return None
    return x2 - x1


def _cut_samples(mesh: Mesh, y0: float, n: int) -> np.ndarray:
    V = mesh.vertices
    e = mesh.edges
    ya, yb = V[e[:, 0], 1], V[e[:, 1], 1]
    cross = (np.minimum(ya, yb) <= y0) & (np.maximum(ya, yb) >= y0) & (ya != yb)
    s = (y0 - ya[cross]) / (yb[cross] - ya[cross])
    xc = V[e[cross, 0], 0] + s * (V[e[cross, 1], 0] - V[e[cross, 0], 0])
    lo, hi = V[:, 0].min(), V[:, 0].max()
    return np.unique(np.concatenate([xc, np.linspace(lo, hi, n)]))


def evaluate_on_line(u_h: np.ndarray, mesh: Mesh, xs: np.ndarray, y0: float) -> np.ndarray:
    """P1 values of ``u_h`` at the points ``(xs, y0)``."""
    pts = np.column_stack([xs, np.full_like(xs, y0)])
    V = mesh.vertices[mesh.cells]
    # candidate cells: those whose y-range contains y0
    ymin, ymax = V[..., 1].min(axis=1), V[..., 1].max(axis=1)
    cand = np.flatnonzero((ymin <= y0 + 1e-14) & (ymax >= y0 - 1e-14))
    out = np.full(len(xs), np.nan)
    xmin, xmax = V[cand, :, 0].min(axis=1), V[cand, :, 0].max(axis=1)
    order = np.argsort(xmin)
    cand, xmin, xmax = cand[order], xmin[order], xmax[order]
    for m, a, b in zip(cand, xmin, xmax):
        lo, hi = np.searchsorted(xs, a - 1e-14), np.searchsorted(xs, b + 1e-14, side="right")
        if hi <= lo:
            continue
        idx = np.arange(lo, hi)
        idx = idx[np.isnan(out[idx])]
        if idx.size == 0:
            continue
        lam = _barycentric(V[m], pts[idx])
        inside = np.all(lam >= -1e-12, axis=1)
        out[idx[inside]] = lam[inside] @ u_h[mesh.cells[m]]
    if np.isnan(out).any():
        # points missed through round-off: fall back to the nearest vertex
        tree = cKDTree(mesh.vertices)
        miss = np.isnan(out)
        out[miss] = u_h[tree.query(pts[miss])[1]]
    return out


def _barycentric(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    l12 = np.linalg.solve(T, (pts - tri[0]).T).T
    return np.column_stack([1.0 - l12.sum(axis=1), l12])


def _first_crossing(xs: np.ndarray, vals: np.ndarray, level: float) -> Optional[float]:
    above = np.flatnonzero(vals >= level)
    if above.size == 0:
        return None
    k = above[0]
    if k == 0:
        return float(xs[0])
    x0, x1, v0, v1 = xs[k - 1], xs[k], vals[k - 1], vals[k]
    return float(x0 + (level - v0) / (v1 - v0) * (x1 - x0))
