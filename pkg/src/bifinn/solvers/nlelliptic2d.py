"""2D nonlinear elliptic problem on the unit square, 5-point finite differences.

    -Lap u + mu1/mu2 (exp(mu2 u) - 1) = 100 sin(2 pi x) sin(2 pi y),  u = 0 on the boundary

Unknowns are the n x n interior nodes of a uniform grid with h = 1/(n+1),
flattened with x along the first axis.  Solved by damped Newton.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..pod import FieldVector

RESIDUAL_TOL = 1e-10
MAX_NEWTON = 50
MAX_HALVINGS = 10


class NewtonFailure(RuntimeError):
    pass


@dataclass
class NewtonInfo:
    residuals: list = field(default_factory=list)
    iterations: int = 0


def grid_id(n: int) -> str:
    return f"fd{n}x{n}"


def interior_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    h = 1.0 / (n + 1)
    t = h * np.arange(1, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    return X.ravel(), Y.ravel()


@lru_cache(maxsize=8)
def laplacian(n: int) -> sp.csr_matrix:
    """Discrete -Lap with homogeneous Dirichlet data (SPD)."""
    h = 1.0 / (n + 1)
    T = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    I = sp.identity(n)
    return ((sp.kron(T, I) + sp.kron(I, T)) / h**2).tocsr()


def forcing(n: int) -> np.ndarray:
    x, y = interior_nodes(n)
    return 100.0 * np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)


def reaction(u, mu1: float, mu2: float) -> np.ndarray:
    """s(u) = mu1/mu2 (exp(mu2 u) - 1), via expm1 so small mu2 stays accurate."""
    if mu1 == 0.0:
        return np.zeros_like(u)
    return mu1 * np.expm1(mu2 * u) / mu2


def reaction_slope(u, mu1: float, mu2: float) -> np.ndarray:
    return mu1 * np.exp(mu2 * u)


def residual(u, mu, n: int) -> np.ndarray:
    mu1, mu2 = float(mu[0]), float(mu[1])
    return laplacian(n) @ u + reaction(u, mu1, mu2) - forcing(n)


def solve_nlelliptic2d(mu, n: int = 55, info: NewtonInfo | None = None) -> FieldVector:
    mu1, mu2 = float(mu[0]), float(mu[1])
    A = laplacian(n)
    f = forcing(n)
    u = np.zeros(n * n)
    info = info if info is not None else NewtonInfo()

    def F(v):
        with np.errstate(over="ignore"):
            return A @ v + reaction(v, mu1, mu2) - f

    res = F(u)
    norm = np.max(np.abs(res))
    info.residuals.append(norm)
    for it in range(MAX_NEWTON):
        if norm < RESIDUAL_TOL:
            info.iterations = it
            return FieldVector(u, grid_id(n))
        J = A + sp.diags(reaction_slope(u, mu1, mu2))
        du = spla.spsolve(J.tocsc(), -res)
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = u + step * du
            cres = F(cand)
            cnorm = np.max(np.abs(cres))
            if np.isfinite(cnorm) and cnorm < norm:
                break
            step *= 0.5
        else:
            raise NewtonFailure(f"no residual decrease after {MAX_HALVINGS} halvings, residual {norm:.3e}")
        u, res, norm = cand, cres, cnorm
        info.residuals.append(norm)
    if norm < RESIDUAL_TOL:
        info.iterations = MAX_NEWTON
        return FieldVector(u, grid_id(n))
    raise NewtonFailure(f"Newton did not converge in {MAX_NEWTON} iterations, residual {norm:.3e}")


def linear_limit_exact(n: int) -> np.ndarray:
    """Continuous solution for s = 0 sampled at the interior nodes."""
    return forcing(n) / (8.0 * np.pi**2)
