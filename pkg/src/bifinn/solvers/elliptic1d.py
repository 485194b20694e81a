"""1D elliptic problem with random diffusivity, Chebyshev collocation.

    -(a(x, z) u'(x))' = 1 on (0, 1),  u(0) = u(1) = 0,
    a(x, z) = 1 + 1/2 * sum_k cos(2 k pi x) z_k / (k pi)

Solutions are reported on a common 100-point uniform mesh of [0, 1] so both
fidelities share one vector space.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..pod import FieldVector

N_MESH = 100
GRID_ID = f"uniform{N_MESH}"
MESH = np.linspace(0.0, 1.0, N_MESH)


def cheb_nodes(K: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto points cos(j pi / (K-1)), j = 0..K-1, computed as sines for symmetry."""
    N = K - 1
    return np.sin(np.pi * (N - 2.0 * np.arange(K)) / (2.0 * N))


@lru_cache(maxsize=8)
def cheb_diff(K: int) -> tuple[np.ndarray, np.ndarray]:
    """Differentiation matrix on ``K`` Gauss-Lobatto points of [-1, 1].

    Off-diagonal node differences use x_i - x_j = 2 sin((i+j)t) sin((j-i)t),
    t = pi / (2(K-1)); the diagonal is the negative row sum.
    """
    if K < 2:
        raise ValueError("need at least two collocation points")
    N = K - 1
    x = cheb_nodes(K)
    i = np.arange(K)
    t = np.pi / (2.0 * N)
    dx = 2.0 * np.sin((i[:, None] + i[None, :]) * t) * np.sin((i[None, :] - i[:, None]) * t)
    np.fill_diagonal(dx, 1.0)
    c = np.ones(K)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** i
    D = np.outer(c, 1.0 / c) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    x.flags.writeable = False
    D.flags.writeable = False
    return x, D


def diffusivity(x, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    k = np.arange(1, z.size + 1)
    return 1.0 + 0.5 * np.cos(2.0 * np.pi * np.outer(x, k)) @ (z / (k * np.pi))


def bary_weights(K: int) -> np.ndarray:
    w = (-1.0) ** np.arange(K)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def bary_interp(nodes: np.ndarray, values: np.ndarray, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric (second-form) interpolation; exact at coinciding nodes."""
    diff = x[:, None] - nodes[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    q = w[None, :] / diff
    out = (q @ values) / q.sum(axis=1)
    rows, cols = np.nonzero(hit)
    out[rows] = values[cols]
    return out


def solve_on_nodes(z, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Collocation solution on the ``K`` mapped nodes ``x = (xi + 1) / 2``."""
    xi, D = cheb_diff(K)
    x = 0.5 * (xi + 1.0)
    Dx = 2.0 * D
    L = -Dx @ (diffusivity(x, z)[:, None] * Dx)
    rhs = np.ones(K)
    for b in (0, K - 1):
        L[b, :] = 0.0
        L[b, b] = 1.0
        rhs[b] = 0.0
    try:
        u = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular collocation system for K={K}") from exc
    return x, u


def solve_elliptic1d(z, K: int = 128, mesh: np.ndarray = MESH) -> FieldVector:
    z = np.asarray(z, dtype=float)
    x, u = solve_on_nodes(z, K)
    values = bary_interp(x, u, bary_weights(K), np.asarray(mesh, dtype=float))
    return FieldVector(values, GRID_ID if mesh is MESH else f"mesh{len(mesh)}")


def exact_constant_coefficient(x) -> np.ndarray:
    """Solution for a = 1."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x * (1.0 - x)
