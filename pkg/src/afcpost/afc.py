"""Algebraic flux correction: limiters, the stabilisation form d_h and the
fixed-point solver.

Limiter values live in arrays aligned with the CSR storage of ``D`` (one
value per stored entry); :class:`LimiterState` wraps them as a matrix.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull

from .assembly import DiscreteSystem, apply_dirichlet, assemble_galerkin
from .linalg import Factorization, Pattern, pattern_of
from .mesh import _EDGE_LOCAL, Mesh, cosines
from .problems import ProblemSpec

KUZMIN = "kuzmin"
BJK = "bjk"
LIMITERS = (KUZMIN, BJK)


@dataclass
class LimiterState:
    alpha: sp.csr_matrix
    limiter_kind: str
    gamma: Optional[np.ndarray] = None

    @property
    def values(self) -> np.ndarray:
        return self.alpha.data


def _pattern(M: sp.csr_matrix, pattern: Optional[Pattern]) -> Pattern:
    return pattern if pattern is not None else pattern_of(M)


def _mask(n: int, dirichlet) -> np.ndarray:
    if dirichlet is None:
        return np.zeros(n, dtype=bool)
    return np.asarray(dirichlet, dtype=bool)


def _ratio(Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``min(1, Q/P)`` with ``R = 1`` where ``P = 0``."""
    R = np.ones_like(P)
    nz = P != 0
    R[nz] = np.minimum(1.0, Q[nz] / P[nz])
    return R


def _by_sign(flux, rows, Rp, Rm) -> np.ndarray:
    return np.where(flux > 0, Rp[rows], np.where(flux < 0, Rm[rows], 1.0))


def fluxes(D: sp.csr_matrix, u: np.ndarray, pattern: Optional[Pattern] = None) -> np.ndarray:
    """``f_ij = d_ij (u_j - u_i)`` per stored entry (zero on the diagonal)."""
    p = _pattern(D, pattern)
    f = D.data * (u[p.cols] - u[p.rows])
    f[~p.offdiag] = 0.0
    return f


def kuzmin_alpha(A: sp.csr_matrix, D: sp.csr_matrix, u: np.ndarray, dirichlet=None,
                 pattern: Optional[Pattern] = None) -> LimiterState:
    """Kuzmin's limiter, made symmetric per pair.

    For the pair ``{i, j}`` the row with ``a_ji < a_ij`` (ties: lower
    index) computes the value, which is copied to the partner entry.
    """
    p = _pattern(D, pattern)
    n = p.n
    fixed = _mask(n, dirichlet)
    a = A.data
    at = a[p.transpose]
    f = fluxes(D, u, p)
    upwind_row = p.offdiag & (at <= a)
    fp, fm = np.maximum(f, 0.0), np.minimum(f, 0.0)
    P_plus = np.bincount(p.rows, weights=np.where(upwind_row, fp, 0.0), minlength=n)
    P_minus = np.bincount(p.rows, weights=np.where(upwind_row, fm, 0.0), minlength=n)
    Q_plus = -np.bincount(p.rows, weights=fm, minlength=n)
    Q_minus = -np.bincount(p.rows, weights=fp, minlength=n)
    R_plus, R_minus = _ratio(Q_plus, P_plus), _ratio(Q_minus, P_minus)
    R_plus[fixed] = 1.0
    R_minus[fixed] = 1.0
    row_alpha = _by_sign(f, p.rows, R_plus, R_minus)
    owner = (at < a) | ((at == a) & (p.rows < p.cols))
    alpha = np.where(owner, row_alpha, row_alpha[p.transpose])
    alpha[~p.offdiag] = 1.0
    return LimiterState(p.matrix(alpha), KUZMIN)


def bjk_alpha(D: sp.csr_matrix, u: np.ndarray, gamma=1.0, dirichlet=None,
              pattern: Optional[Pattern] = None) -> LimiterState:
    """The linearity-preserving limiter with local bounds ``u_min, u_max``.

    ``gamma`` is a scalar or one positive value per dof (only non-Dirichlet
    values are used).
    """
    p = _pattern(D, pattern)
    n = p.n
    fixed = _mask(n, dirichlet)
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (n,)).copy()
    if np.any(~(g[~fixed] > 0)):
        raise ValueError("gamma must be positive at all non-Dirichlet dofs")
    f = fluxes(D, u, p)
    P_plus = np.bincount(p.rows, weights=np.maximum(f, 0.0), minlength=n)
    P_minus = np.bincount(p.rows, weights=np.minimum(f, 0.0), minlength=n)
    # every row stores its diagonal, so no segment is empty
    starts = p.indptr[:-1]
    uc = u[p.cols]
    u_max = np.maximum.reduceat(uc, starts)
    u_min = np.minimum.reduceat(uc, starts)
    q = g * np.bincount(p.rows, weights=np.where(p.offdiag, D.data, 0.0), minlength=n)
    R_plus = _ratio(q * (u - u_max), P_plus)
    R_minus = _ratio(q * (u - u_min), P_minus)
    R_plus[fixed] = 1.0
    R_minus[fixed] = 1.0
    bar = _by_sign(f, p.rows, R_plus, R_minus)
    bar_t = bar[p.transpose]
    fr, fc = fixed[p.rows], fixed[p.cols]
    alpha = np.minimum(bar, bar_t)
    alpha = np.where(~fr & fc, bar, alpha)
    alpha = np.where(fr & ~fc, bar_t, alpha)
    alpha = np.where(fr & fc, 1.0, alpha)
    alpha[~p.offdiag] = 1.0
    return LimiterState(p.matrix(alpha), BJK, g)


def patch_gamma(mesh: Mesh) -> np.ndarray:
    """Per-vertex ``max_j |x_i - x_j| / dist(x_i, boundary of hull(patch))``.

    Vertices on the domain boundary get 1. For a convex patch the distance
    is the smallest cell height over ``x_i``; other patches go through a
    convex hull.
    """
    n = mesh.n_vertices
    X = mesh.vertices
    gamma = np.ones(n)
    on_boundary = np.zeros(n, dtype=bool)
    on_boundary[mesh.boundary.ravel()] = True
    e = mesh.edges
    h = mesh.edge_lengths
    reach = np.zeros(n)
    np.maximum.at(reach, e[:, 0], h)
    np.maximum.at(reach, e[:, 1], h)
    # height over local vertex k is 2|K| / (length of the opposite edge)
    heights = 2.0 * mesh.areas[:, None] / mesh.local_edge_lengths
    dist = np.full(n, np.inf)
    np.minimum.at(dist, mesh.cells.ravel(), heights.ravel())
    # the patch of i is convex iff at every neighbour a the two cells along
    # edge (i, a) meet with an angle sum <= pi
    angles = np.arccos(cosines(mesh))
    pair_angle = np.zeros((mesh.n_edges, 2))
    ce = mesh.cell_edges
    for k in range(3):
        a, b = _EDGE_LOCAL[k]
        np.add.at(pair_angle[:, 0], ce[:, k], np.where(mesh.cells[:, a] == e[ce[:, k], 1], angles[:, a], angles[:, b]))
        np.add.at(pair_angle[:, 1], ce[:, k], np.where(mesh.cells[:, a] == e[ce[:, k], 0], angles[:, a], angles[:, b]))
    # pair_angle[:, 0]: angle sum at the high-index end, seen from the low end; and vice versa
    reflex = np.zeros(n, dtype=bool)
    reflex[e[pair_angle[:, 0] > np.pi + 1e-12, 0]] = True
    reflex[e[pair_angle[:, 1] > np.pi + 1e-12, 1]] = True
    inner = ~on_boundary
    gamma[inner] = reach[inner] / dist[inner]
    hard = np.flatnonzero(inner & reflex)
    if hard.size:
        nbrs = [[] for _ in range(n)]
        for a, b in e:
            nbrs[a].append(b)
            nbrs[b].append(a)
        for i in hard:
            hull = ConvexHull(X[nbrs[i]])
            d = np.min(-(hull.equations[:, :2] @ X[i] + hull.equations[:, 2]))
            gamma[i] = reach[i] / d
    return gamma


def resolve_gamma(mesh: Mesh, gamma) -> np.ndarray:
    """Accepts ``None``/number (constant), ``"patch"`` or a per-dof array."""
    if gamma is None:
        return np.ones(mesh.n_vertices)
    if isinstance(gamma, str):
        if gamma == "patch":
            return patch_gamma(mesh)
        raise ValueError(f"unknown gamma rule {gamma!r}")
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (mesh.n_vertices,)).copy()
    if np.any(~(g > 0)):
        raise ValueError("gamma must be positive")
    return g


def compute_alpha(kind: str, system: DiscreteSystem, u: np.ndarray, gamma=None) -> LimiterState:
    if kind == KUZMIN:
        return kuzmin_alpha(system.A, system.D, u, system.dirichlet, system.pattern)
    if kind == BJK:
        g = 1.0 if gamma is None else gamma
        return bjk_alpha(system.D, u, g, system.dirichlet, system.pattern)
    raise ValueError(f"unknown limiter {kind!r}; choose from {LIMITERS}")


# -- the stabilisation form ----------------------------------------------------------


def dh_point(state: LimiterState, D: sp.csr_matrix, u: np.ndarray, v: np.ndarray) -> float:
    """``sum_ij (1 - alpha_ij) d_ij (u_j - u_i) v_i``.

    Both forms of ``d_h`` accumulate in extended precision: for random
    arguments the sum can be far smaller than its terms.
    """
    p = pattern_of(D)
    u, v = np.asarray(u, dtype=np.longdouble), np.asarray(v, dtype=np.longdouble)
    w = (1 - state.alpha.data.astype(np.longdouble)) * D.data * (u[p.cols] - u[p.rows]) * v[p.rows]
    return float(np.sum(w[p.offdiag]))


def _edge_positions(D: sp.csr_matrix, mesh: Mesh) -> np.ndarray:
    try:
        return pattern_of(D).lookup(mesh.edges[:, 0], mesh.edges[:, 1])
    except KeyError:
        raise ValueError("mesh edge without a matrix entry") from None


def edge_weights(state: LimiterState, D: sp.csr_matrix, mesh: Mesh) -> np.ndarray:
    """``(1 - alpha_E) |d_E|`` per mesh edge."""
    pos = _edge_positions(D, mesh)
    return (1.0 - state.alpha.data[pos]) * np.abs(D.data[pos])


def dh_edge(state: LimiterState, D: sp.csr_matrix, mesh: Mesh, u: np.ndarray, v: np.ndarray) -> float:
    """``sum_E (1 - alpha_E) |d_E| h_E (grad u . t_E, grad v . t_E)_E``.

    For P1 functions ``h_E grad u . t_E`` is the difference of the end
    values, so the edge integral is ``(u_b - u_a)(v_b - v_a) / h_E``.
    """
    pos = _edge_positions(D, mesh)
    w = (1 - state.alpha.data[pos].astype(np.longdouble)) * np.abs(D.data[pos])
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    u, v = np.asarray(u, dtype=np.longdouble), np.asarray(v, dtype=np.longdouble)
    return float(np.sum(w * (u[b] - u[a]) * (v[b] - v[a])))


def dh_residual(state: LimiterState, D: sp.csr_matrix, u: np.ndarray,
                pattern: Optional[Pattern] = None) -> np.ndarray:
    """Vector ``r_i = d_h(u; u, phi_i)``."""
    p = _pattern(D, pattern)
    w = (1.0 - state.alpha.data) * D.data * (u[p.cols] - u[p.rows])
    return np.bincount(p.rows, weights=np.where(p.offdiag, w, 0.0), minlength=p.n)


# -- fixed-point solver --------------------------------------------------------------


@dataclass
class SolverOptions:
    omega: float = 1.0
    tol: float = 1e-10
    max_iter: int = 25000
    init: str = "supg"
    omega_min: float = 1.0 / 64.0
    gamma: object = "patch"  # BJK only: "patch", a number or a per-dof array

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise ValueError("omega must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init not in ("supg", "zero", "upwind"):
            raise ValueError(f"unknown initial guess {self.init!r}")


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    reference_norm: float
    seconds: float
    residual_history: list = field(default_factory=list)
    nonmonotone_steps: int = 0


@dataclass
class AfcSolution:
    u: np.ndarray
    stats: SolveStats
    system: DiscreteSystem
    limiter: LimiterState


class _Residual:
    """Nonlinear residual ``(A + D) u - F - g(u)`` on the free rows."""

    def __init__(self, system: DiscreteSystem, kind: str, gamma):
        self.system = system
        self.kind = kind
        self.gamma = gamma
        self.AD = system.A + system.D
        self.free = ~system.dirichlet

    def __call__(self, u: np.ndarray):
        state = compute_alpha(self.kind, self.system, u, self.gamma)
        s = self.system
        g = dh_correction(state, s.D, u, s.pattern)
        r = self.AD @ u - s.F - g
        return float(np.linalg.norm(r[self.free])), g, state


def dh_correction(state: LimiterState, D: sp.csr_matrix, u: np.ndarray,
                  pattern: Optional[Pattern] = None) -> np.ndarray:
    """``g_i = sum_j alpha_ij d_ij (u_j - u_i)``, the explicit part of the iteration."""
    p = _pattern(D, pattern)
    w = state.alpha.data * D.data * (u[p.cols] - u[p.rows])
    return np.bincount(p.rows, weights=np.where(p.offdiag, w, 0.0), minlength=p.n)


def initial_guess(mesh: Mesh, prob: ProblemSpec, system: DiscreteSystem, init: str,
                  upwind: Optional[Factorization] = None) -> np.ndarray:
    if init == "zero":
        return np.where(system.dirichlet, system.u_dirichlet, 0.0)
    if init == "upwind":
        M, rhs = apply_dirichlet(system.A + system.D, system.F, system.dirichlet, system.u_dirichlet)
        lu = upwind if upwind is not None else Factorization(M)
        return lu.solve(rhs)
    if init == "supg":
        from .supg import solve_supg
        return solve_supg(mesh, prob)
    raise ValueError(f"unknown initial guess {init!r}")


def solve_afc(mesh: Mesh, prob: ProblemSpec, limiter_kind: str,
              opts: Optional[SolverOptions] = None, u0: Optional[np.ndarray] = None,
              system: Optional[DiscreteSystem] = None) -> AfcSolution:
    """Damped fixed-point iteration ``(A + D) u~ = F + g(u)``, ``u <- u + w (u~ - u)``.

    The matrix ``A + D`` is factorised once. ``w`` starts at ``opts.omega``
    and is halved (down to ``opts.omega_min``) while the nonlinear residual
    grows; it is reset after every accepted step. The iteration count is the
    number of linear solves.
    """
    opts = opts or SolverOptions()
    if limiter_kind not in LIMITERS:
        raise ValueError(f"unknown limiter {limiter_kind!r}; choose from {LIMITERS}")
    t0 = time.perf_counter()
    system = system or assemble_galerkin(mesh, prob)
    gamma = resolve_gamma(mesh, opts.gamma) if limiter_kind == BJK else None
    mask, ud = system.dirichlet, system.u_dirichlet
    M, rhs0 = apply_dirichlet(system.A + system.D, system.F, mask, ud)
    lu = Factorization(M)
    ref = float(np.linalg.norm(rhs0))
    if ref == 0.0:
        ref = 1.0
    residual = _Residual(system, limiter_kind, gamma)

    if u0 is None:
        u = initial_guess(mesh, prob, system, opts.init, lu if opts.init == "upwind" else None)
    else:
        u = np.array(u0, dtype=float)
    u = np.where(mask, ud, u)

    res, g, state = residual(u)
    history = [res / ref]
    iters = 0
    nonmono = 0
    while res > opts.tol * ref and iters < opts.max_iter:
        target = lu.solve(np.where(mask, rhs0, rhs0 + g))
        iters += 1
        omega = opts.omega
        while True:
            cand = u + omega * (target - u)
            c_res, c_g, c_state = residual(cand)
            if c_res <= res or omega <= opts.omega_min:
                break
            omega *= 0.5
        if c_res > res:
            nonmono += 1
        u, res, g, state = cand, c_res, c_g, c_state
        history.append(res / ref)

    stats = SolveStats(iters, res / ref, bool(res <= opts.tol * ref), ref,
                       time.perf_counter() - t0, history, nonmono)
    return AfcSolution(u, stats, system, state)

