"""P1 assembly of the Galerkin system, artificial diffusion, Dirichlet
elimination and quadrature-based norms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import csr, pattern_of
from .mesh import NEUMANN, Mesh
from .problems import ProblemSpec

# 7-point rule, exact for polynomials of degree 5; barycentric points, weights sum to 1
_S15 = np.sqrt(15.0)
_A1, _A2 = (6.0 - _S15) / 21.0, (6.0 + _S15) / 21.0
_W1, _W2 = (155.0 - _S15) / 1200.0, (155.0 + _S15) / 1200.0
DEG5_POINTS = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [1 - 2 * _A1, _A1, _A1], [_A1, 1 - 2 * _A1, _A1], [_A1, _A1, 1 - 2 * _A1],
    [1 - 2 * _A2, _A2, _A2], [_A2, 1 - 2 * _A2, _A2], [_A2, _A2, 1 - 2 * _A2],
])
DEG5_WEIGHTS = np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2])


def _orbit3(a):
    return [[1 - 2 * a, a, a], [a, 1 - 2 * a, a], [a, a, 1 - 2 * a]]


def _orbit6(a, b):
    c = 1 - a - b
    return [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]


# Dunavant's 16-point rule, exact for degree 8. Its points lie close to the
# cell edges, which matters when integrating errors of unresolved layers.
DEG8_POINTS = np.array(
    [[1 / 3, 1 / 3, 1 / 3]]
    + _orbit3(0.459292588292723) + _orbit3(0.170569307751760) + _orbit3(0.050547228317031)
    + _orbit6(0.008394777409958, 0.263112829634638)
)
DEG8_WEIGHTS = np.array([0.144315607677787] + [0.095091634267285] * 3 + [0.103217370534718] * 3
                        + [0.032458497623198] * 3 + [0.027230314174435] * 6)

RULES = {"deg5": (DEG5_POINTS, DEG5_WEIGHTS), "deg8": (DEG8_POINTS, DEG8_WEIGHTS)}
TRI_POINTS, TRI_WEIGHTS = RULES["deg8"]
ERROR_POINTS, ERROR_WEIGHTS = RULES["deg8"]

# 3-point Gauss rule on [0, 1]
EDGE_POINTS = 0.5 + 0.5 * np.sqrt(0.6) * np.array([-1.0, 0.0, 1.0])
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def quadrature_points(mesh: Mesh, points: np.ndarray = None) -> np.ndarray:
    """Physical quadrature points, shape (M, Q, 2)."""
    bary = TRI_POINTS if points is None else points
    return np.einsum("qi,mid->mqd", bary, mesh.vertices[mesh.cells])


def integrate(mesh: Mesh, values: np.ndarray, weights: np.ndarray = None) -> np.ndarray:
    """Per-cell integrals of values sampled at :func:`quadrature_points`."""
    return mesh.areas * (values @ (TRI_WEIGHTS if weights is None else weights))


@dataclass
class DiscreteSystem:
    """Assembled (uneliminated) Galerkin system on a mesh.

    ``A`` and ``D`` share one structurally symmetric pattern.
    """

    mesh: Mesh
    A: sp.csr_matrix
    F: np.ndarray
    dirichlet: np.ndarray
    u_dirichlet: np.ndarray
    D: sp.csr_matrix = None
    pattern: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.pattern is None:
            self.pattern = pattern_of(self.A)
        if self.D is None:
            self.D = artificial_diffusion(self.A, self.pattern)

    @property
    def n_dofs(self) -> int:
        return self.A.shape[0]


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    n = mesh.n_vertices
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    return csr(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def local_galerkin(mesh: Mesh, prob: ProblemSpec) -> np.ndarray:
    """Element matrices ``[m, i, j] = a(phi_j, phi_i)`` restricted to cell m."""
    G = mesh.gradients
    area = mesh.areas
    X = quadrature_points(mesh)
    x, y = X[..., 0], X[..., 1]
    local = prob.epsilon * area[:, None, None] * np.einsum("mid,mjd->mij", G, G)
    b = prob.b_at(x, y)  # (2, M, Q)
    bgrad = np.einsum("dmq,mjd->mqj", b, G)
    local += area[:, None, None] * np.einsum("q,mqj,qi->mij", TRI_WEIGHTS, bgrad, TRI_POINTS)
    c = prob.c_at(x, y)
    local += area[:, None, None] * np.einsum("q,mq,qi,qj->mij", TRI_WEIGHTS, c, TRI_POINTS, TRI_POINTS)
    return local


def load_vector(mesh: Mesh, prob: ProblemSpec) -> np.ndarray:
    X = quadrature_points(mesh)
    f = prob.f_at(X[..., 0], X[..., 1])
    local = mesh.areas[:, None] * np.einsum("q,mq,qi->mi", TRI_WEIGHTS, f, TRI_POINTS)
    F = np.bincount(mesh.cells.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)
    neu = mesh.boundary_markers == NEUMANN
    if neu.any():
        a, b = mesh.boundary[neu, 0], mesh.boundary[neu, 1]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        length = np.hypot(*(pb - pa).T)
        t = EDGE_POINTS
        pts = pa[:, None, :] * (1 - t)[None, :, None] + pb[:, None, :] * t[None, :, None]
        g = prob.g_at(pts[..., 0], pts[..., 1])
        F += np.bincount(a, weights=length * (g @ (EDGE_WEIGHTS * (1 - t))), minlength=mesh.n_vertices)
        F += np.bincount(b, weights=length * (g @ (EDGE_WEIGHTS * t)), minlength=mesh.n_vertices)
    return F


def dirichlet_data(mesh: Mesh, prob: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet mask and nodal values of ``u_D`` (zero off the Dirichlet boundary)."""
    mask = mesh.dirichlet_vertices
    values = np.zeros(mesh.n_vertices)
    x, y = mesh.vertices[mask, 0], mesh.vertices[mask, 1]
    values[mask] = prob.u_D_at(x, y)
    return mask, values


def assemble_galerkin(mesh: Mesh, prob: ProblemSpec) -> DiscreteSystem:
    if np.any(mesh.areas <= 0):
        raise ValueError("degenerate or clockwise cell; quadrature undefined")
    A = _scatter(mesh, local_galerkin(mesh, prob))
    F = load_vector(mesh, prob)
    mask, values = dirichlet_data(mesh, prob)
    return DiscreteSystem(mesh, A, F, mask, values)


def artificial_diffusion(A: sp.csr_matrix, pattern=None) -> sp.csr_matrix:
    """``d_ij = -max(a_ij, 0, a_ji)`` off the diagonal, zero row sums."""
    p = pattern if pattern is not None else pattern_of(A)
    a = A.data
    d = -np.maximum(np.maximum(a, a[p.transpose]), 0.0)
    d[~p.offdiag] = 0.0
    diag = -np.bincount(p.rows, weights=d, minlength=p.n)
    d[~p.offdiag] = diag[p.rows[~p.offdiag]]
    return p.matrix(d)


def apply_dirichlet(matrix: sp.csr_matrix, rhs: np.ndarray, mask: np.ndarray,
                    values: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Identity rows at Dirichlet dofs and symmetric column elimination.

    The input matrix is left untouched.
    """
    m = csr(matrix)
    keep = (~mask).astype(float)
    lifted = np.where(mask, values, 0.0)
    out_rhs = np.where(mask, values, rhs - m @ lifted)
    K = sp.diags(keep)
    out = csr(K @ m @ K + sp.diags(mask.astype(float)))
    return out, out_rhs


# -- norms ---------------------------------------------------------------------------


def fe_values(mesh: Mesh, u_h: np.ndarray, points: np.ndarray = None) -> tuple[np.ndarray, np.ndarray]:
    """P1 function values at quadrature points (M, Q) and cell gradients (M, 2)."""
    uc = u_h[mesh.cells]
    bary = TRI_POINTS if points is None else points
    return uc @ bary.T, np.einsum("mi,mid->md", uc, mesh.gradients)


def energy_norm_cellwise(mesh: Mesh, u_h: np.ndarray, epsilon: float, sigma0: float) -> np.ndarray:
    """Squared energy norm per cell of a P1 function, evaluated exactly."""
    uc = u_h[mesh.cells]
    grad = np.einsum("mi,mid->md", uc, mesh.gradients)
    # P1 mass matrix on K: |K|/12 * (1 + delta_ij)
    l2 = mesh.areas / 12.0 * (np.sum(uc**2, axis=1) + np.sum(uc, axis=1) ** 2)
    return epsilon * mesh.areas * np.sum(grad**2, axis=1) + sigma0 * l2


def energy_norm(mesh: Mesh, u_h: np.ndarray, epsilon: float, sigma0: float) -> float:
    return float(np.sqrt(energy_norm_cellwise(mesh, u_h, epsilon, sigma0).sum()))


def error_cellwise(mesh: Mesh, u_h: np.ndarray, prob: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell squared ``|u - u_h|_1`` and ``||u - u_h||_0`` (degree-8 rule)."""
    if prob.exact is None:
        raise ValueError(f"problem {prob.name!r} has no exact solution")
    X = quadrature_points(mesh, ERROR_POINTS)
    x, y = X[..., 0], X[..., 1]
    vals, grad = fe_values(mesh, u_h, ERROR_POINTS)
    e = prob.exact.u(x, y) - vals
    ge = prob.exact.grad(x, y) - grad.T[:, :, None]
    return integrate(mesh, ge[0] ** 2 + ge[1] ** 2, ERROR_WEIGHTS), integrate(mesh, e**2, ERROR_WEIGHTS)


def energy_norm_error(u_h: np.ndarray, prob: ProblemSpec, mesh: Mesh) -> float:
    """``(eps |u - u_h|_1^2 + sigma0 ||u - u_h||_0^2)^(1/2)``."""
    h1, l2 = error_cellwise(mesh, u_h, prob)
    return float(np.sqrt(prob.epsilon * h1.sum() + prob.sigma0 * l2.sum()))
