"""Proper orthogonal decomposition of snapshot matrices.

Snapshots are stored column-wise (one PDE solution per column).  A
:class:`PodBasis` keeps the maximal set of left singular vectors so bases of
different rank are prefixes of one decomposition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# singular values below ZERO_SV_RTOL * sigma_1 are treated as zero
ZERO_SV_RTOL = 1e-12


@dataclass(frozen=True)
class FieldVector:
    """A discrete solution on a named grid."""

    values: np.ndarray
    grid_id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("FieldVector values must be one-dimensional")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SnapshotMatrix:
    data: np.ndarray
    grid_id: str
    fidelity: str
    param_ids: Sequence = field(default_factory=list)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"snapshot matrix must be 2-D and nonempty, got shape {data.shape}")
        if self.fidelity not in ("low", "high"):
            raise ValueError(f"unknown fidelity {self.fidelity!r}")
        ids = list(self.param_ids) if len(self.param_ids) else list(range(data.shape[1]))
        if len(ids) != data.shape[1]:
            raise ValueError(f"{len(ids)} param ids for {data.shape[1]} columns")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "param_ids", ids)

    @classmethod
    def from_fields(cls, fields: Sequence[FieldVector], fidelity: str, param_ids=()):
        grids = {f.grid_id for f in fields}
        if len(grids) != 1:
            raise ValueError(f"fields live on different grids: {sorted(grids)}")
        return cls(np.column_stack([f.values for f in fields]), grids.pop(), fidelity, param_ids)

    @property
    def n_dof(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PodBasis:
    """Orthonormal POD basis.

    ``modes`` holds all R nonzero-energy left singular vectors; :attr:`V` is the
    rank-``r`` prefix actually used for projection.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    r: int
    fidelity: str = "high"
    grid_id: str = ""

    def __post_init__(self):
        R = self.singular_values.shape[0]
        if self.modes.shape[1] != R:
            raise ValueError("one stored mode per singular value required")
        if not 1 <= self.r <= R:
            raise ValueError(f"rank r={self.r} outside [1, R={R}]")

    @property
    def V(self) -> np.ndarray:
        return self.modes[:, : self.r]

    @property
    def R(self) -> int:
        return self.singular_values.shape[0]

    @property
    def n_dof(self) -> int:
        return self.modes.shape[0]

    def truncate(self, r: int) -> "PodBasis":
        """Same decomposition, different rank (bases are nested)."""
        if r > self.R:
            raise ValueError(f"requested rank {r} exceeds snapshot rank R={self.R}")
        return PodBasis(self.modes, self.singular_values, r, self.fidelity, self.grid_id)

    def energy_fraction(self, k: int | None = None) -> float:
        k = self.r if k is None else k
        s2 = self.singular_values**2
        return float(s2[:k].sum() / s2.sum())


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive.

    ``argmax`` returns the first maximiser, which breaks ties by lowest index.
    """
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _left_singular(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, p = S.shape
    if n >= p:
        U, s, _ = np.linalg.svd(S, full_matrices=False)
        return U, s
    # wide matrix: eigendecomposition of the small Gram matrix S S^T
    w, U = np.linalg.eigh(S @ S.T)
    order = np.argsort(w)[::-1]
    w, U = w[order], U[:, order]
    return U, np.sqrt(np.clip(w, 0.0, None))


def compute_pod(S, r: int | None = None, energy: float | None = None,
                fidelity: str | None = None, grid_id: str | None = None) -> PodBasis:
    """Build a POD basis from snapshot columns.

    Exactly one of ``r`` (fixed rank) or ``energy`` (smallest k whose cumulative
    energy fraction reaches the threshold) may be given; neither means r = R.
    """
    if isinstance(S, SnapshotMatrix):
        data = S.data
        fidelity = fidelity or S.fidelity
        grid_id = S.grid_id if grid_id is None else grid_id
    else:
        data = np.asarray(S, dtype=float)
    if data.ndim != 2 or data.size == 0:
        raise ValueError("snapshot matrix must be 2-D and nonempty")
    if not np.all(np.isfinite(data)):
        raise ValueError("snapshot matrix contains non-finite entries")
    if r is not None and energy is not None:
        raise ValueError("give either a fixed rank or an energy fraction, not both")
    if r is not None and not 1 <= r <= min(data.shape):
        raise ValueError(f"rank r={r} outside [1, min(N_dof, P)={min(data.shape)}]")

    U, s = _left_singular(data)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("snapshot matrix is identically zero")
    keep = s > s[0] * ZERO_SV_RTOL
    R = int(np.count_nonzero(keep))
    U, s = fix_signs(U[:, :R]), s[:R]

    if energy is not None:
        if not 0.0 < energy <= 1.0:
            raise ValueError(f"energy fraction must lie in (0, 1], got {energy}")
        cum = np.cumsum(s**2) / np.sum(s**2)
        r = int(np.searchsorted(cum, energy - 1e-15) + 1)
        r = min(r, R)
    elif r is None:
        r = R
    elif r > R:
        raise ValueError(f"requested rank {r} exceeds numerical rank R={R} of the snapshots")
    return PodBasis(U, s, r, fidelity or "high", grid_id or "")


def _values(basis: PodBasis, u) -> np.ndarray:
    if isinstance(u, FieldVector):
        if basis.grid_id and u.grid_id != basis.grid_id:
            raise ValueError(f"field on grid {u.grid_id!r}, basis on {basis.grid_id!r}")
        u = u.values
    u = np.asarray(u, dtype=float)
    if u.shape[0] != basis.n_dof:
        raise ValueError(f"field has {u.shape[0]} dofs, basis expects {basis.n_dof}")
    return u


def project(basis: PodBasis, u) -> np.ndarray:
    """POD coefficients ``V^T u``; ``u`` may be a field or a matrix of columns."""
    return basis.V.T @ _values(basis, u)


def reconstruct(basis: PodBasis, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[0] != basis.r:
        raise ValueError(f"coefficient vector of length {c.shape[0]} for rank-{basis.r} basis")
    return basis.V @ c


def projection_error(basis: PodBasis, u) -> float:
    """Relative Euclidean distance from ``u`` to the span of the basis."""
    u = _values(basis, u)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ValueError("projection error undefined for a zero field")
    return float(np.linalg.norm(u - basis.V @ (basis.V.T @ u)) / norm)
