"""Steady convection-diffusion-reaction problems and the two benchmarks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import DIRICHLET, NEUMANN

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExactSolution:
    u: Field
    grad: Field  # returns shape (2, *x.shape)
    laplacian: Optional[Field] = None


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of ``-eps*lap(u) + b.grad(u) + c*u = f``.

    All callbacks take coordinate arrays ``(x, y)`` and must broadcast;
    ``b`` returns an array of shape ``(2, *x.shape)``. ``sigma0`` is a lower
    bound of ``c - div(b)/2``; ``boundary_marker`` tags boundary edges by
    their midpoint.
    """

    name: str
    epsilon: float
    b: Field
    c: Field
    f: Field
    u_D: Field
    g: Field
    sigma0: float
    exact: Optional[ExactSolution] = None
    boundary_marker: Callable[[float, float], str] = lambda x, y: DIRICHLET
    bounds: Optional[tuple] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be non-negative")

    # broadcasting wrappers, so constant callbacks may return scalars
    def b_at(self, x, y):
        bx, by = self.b(x, y)
        return np.stack([np.broadcast_to(bx, np.shape(x)), np.broadcast_to(by, np.shape(x))])

    def c_at(self, x, y):
        return np.broadcast_to(np.asarray(self.c(x, y), dtype=float), np.shape(x))

    def f_at(self, x, y):
        return np.broadcast_to(np.asarray(self.f(x, y), dtype=float), np.shape(x))

    def g_at(self, x, y):
        return np.broadcast_to(np.asarray(self.g(x, y), dtype=float), np.shape(x))

    def u_D_at(self, x, y):
        return np.broadcast_to(np.asarray(self.u_D(x, y), dtype=float), np.shape(x))


def strong_residual(prob: ProblemSpec, x, y) -> np.ndarray:
    """``f + eps*lap(u) - b.grad(u) - c*u`` for the exact solution."""
    if prob.exact is None or prob.exact.laplacian is None:
        raise ValueError(f"problem {prob.name!r} has no exact solution with laplacian")
    ex = prob.exact
    bx, by = prob.b_at(x, y)
    gx, gy = ex.grad(x, y)
    return (prob.f_at(x, y) + prob.epsilon * ex.laplacian(x, y) - bx * gx - by * gy
            - prob.c_at(x, y) * ex.u(x, y))


def example_boundary_layer(epsilon: float = 1e-3) -> ProblemSpec:
    """Manufactured solution with an exponential layer at ``x = 1``.

    ``u = y(1-y) (x - (exp((x-1)/eps) - exp(-1/eps)) / (1 - exp(-1/eps)))``
    with ``b = (2, 1)``, ``c = 1`` and homogeneous Dirichlet data.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eps = float(epsilon)
    tail = np.exp(-1.0 / eps)  # underflows to 0 for small eps, which is harmless
    denom = -np.expm1(-1.0 / eps)

    def layer(x):
        # exp((x-1)/eps) <= 1 on the closed domain, so no overflow
        return (np.exp((x - 1.0) / eps) - tail) / denom

    def dlayer(x):
        return np.exp((x - 1.0) / eps) / (eps * denom)

    def u(x, y):
        return y * (1 - y) * (x - layer(x))

    def grad(x, y):
        return np.stack([y * (1 - y) * (1 - dlayer(x)), (1 - 2 * y) * (x - layer(x))])

    def laplacian(x, y):
        return -y * (1 - y) * dlayer(x) / eps - 2 * (x - layer(x))

    def f(x, y):
        # -eps*lap(u) + (2, 1).grad(u) + u, simplified by hand
        Y = y * (1 - y)
        s = x - layer(x)
        return 2 * Y - Y * dlayer(x) + s * (2 * eps + 1 - 2 * y + Y)

    return ProblemSpec(
        name="boundary_layer",
        epsilon=eps,
        b=lambda x, y: (2.0, 1.0),
        c=lambda x, y: 1.0,
        f=f,
        u_D=lambda x, y: 0.0,
        g=lambda x, y: 0.0,
        sigma0=1.0,
        exact=ExactSolution(u, grad, laplacian),
    )


def hmm86_dirichlet(x, y):
    """Boundary datum: 1 on ``{y=1, x>0}`` and ``{x=0, y>0.7}``, 0 elsewhere."""
    tol = 1e-12
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    top = (np.abs(y - 1.0) <= tol) & (x > tol)
    left = (np.abs(x) <= tol) & (y > 0.7)
    return np.where(top | left, 1.0, 0.0)


def example_hmm86(epsilon: float = 1e-4) -> ProblemSpec:
    """Interior and boundary layers, ``b = (cos(-pi/3), sin(-pi/3))``, ``c = f = 0``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    bx, by = np.cos(-np.pi / 3), np.sin(-np.pi / 3)
    return ProblemSpec(
        name="hmm86",
        epsilon=float(epsilon),
        b=lambda x, y: (bx, by),
        c=lambda x, y: 0.0,
        f=lambda x, y: 0.0,
        u_D=hmm86_dirichlet,
        g=lambda x, y: 0.0,
        sigma0=0.0,
        bounds=(0.0, 1.0),
    )


def constant_problem(epsilon: float, b=(0.0, 0.0), c: float = 0.0, f: float = 0.0,
                     u_D: float = 0.0, g: float = 0.0, sigma0: Optional[float] = None,
                     neumann_sides=()) -> ProblemSpec:
    """Problem on the unit square with constant data.

    ``neumann_sides`` is a subset of ``{"left", "right", "bottom", "top"}``.
    ``sigma0`` defaults to ``c`` (the field ``b`` is divergence free).
    """
    sides = set(neumann_sides)
    unknown = sides - {"left", "right", "bottom", "top"}
    if unknown:
        raise ValueError(f"unknown boundary sides {sorted(unknown)}")
    tol = 1e-12

    def marker(x, y):
        hit = ((abs(x) < tol and "left" in sides) or (abs(x - 1) < tol and "right" in sides)
               or (abs(y) < tol and "bottom" in sides) or (abs(y - 1) < tol and "top" in sides))
        return NEUMANN if hit else DIRICHLET

    bx, by = (float(v) for v in b)
    return ProblemSpec(
        name="constant",
        epsilon=float(epsilon),
        b=lambda x, y: (bx, by),
        c=lambda x, y: float(c),
        f=lambda x, y: float(f),
        u_D=lambda x, y: float(u_D),
        g=lambda x, y: float(g),
        sigma0=float(c if sigma0 is None else sigma0),
        boundary_marker=marker,
    )


PROBLEMS = {
    "boundary_layer": example_boundary_layer,
    "hmm86": example_hmm86,
}


def get_problem(name: str, epsilon: float) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(epsilon)
