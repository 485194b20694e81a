"""Error decomposition of reduced-order predictions.

For a high-fidelity field u, its reduced prediction u~ = V c~ and true
coefficients c = V^T u::

    e_a = |u - u~| / |u|      approximation error
    e_p = |u - V V^T u| / |u| projection error
    e_c = |c - c~| / |u|      coefficient error

With V orthonormal, e_p <= e_a <= e_p + e_c holds exactly; the same chain holds
for test-set means.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BOUND_RTOL = 1e-12


@dataclass(frozen=True)
class SampleErrors:
    e_a: float
    e_p: float
    e_c: float
    sample_id: object = None


@dataclass(frozen=True)
class AggregateErrors:
    eps_a: float
    eps_c: float
    eps_p: float
    M: int
    r: int | None = None
    variant: str | None = None
    N_train: int | None = None


@dataclass
class BoundReport:
    holds: bool
    worst_margin: float
    violations: list = field(default_factory=list)

    def format(self) -> str:
        if self.holds:
            return f"OK bound e_p <= e_a <= e_p + e_c holds (worst margin {self.worst_margin:.3e})"
        lines = [f"VIOLATION {len(self.violations)} bound violation(s), worst margin {self.worst_margin:.3e}"]
        lines += [f"  {sid}: {what}" for sid, what in self.violations]
        return "\n".join(lines)


def sample_errors(u_h, u_pred, c_h, c_pred, V, sample_id=None) -> SampleErrors:
    u_h = np.asarray(u_h, dtype=float)
    norm = np.linalg.norm(u_h)
    if norm == 0.0:
        raise ValueError("relative errors undefined for a zero high-fidelity field")
    c_h, c_pred = np.asarray(c_h, dtype=float), np.asarray(c_pred, dtype=float)
    if c_h.shape != c_pred.shape or c_h.shape[0] != V.shape[1]:
        raise ValueError("coefficient vectors must both have length r")
    e_a = np.linalg.norm(u_h - np.asarray(u_pred, dtype=float)) / norm
    e_p = np.linalg.norm(u_h - V @ (V.T @ u_h)) / norm
    e_c = np.linalg.norm(c_h - c_pred) / norm
    return SampleErrors(float(e_a), float(e_p), float(e_c), sample_id)


def batch_errors(U_h, U_pred, C_h, C_pred, V, ids=None) -> list[SampleErrors]:
    """Per-column :func:`sample_errors` for fields stored as columns."""
    ids = range(U_h.shape[1]) if ids is None else ids
    return [sample_errors(U_h[:, j], U_pred[:, j], C_h[:, j], C_pred[:, j], V, sid)
            for j, sid in enumerate(ids)]


def aggregate(errors: Sequence[SampleErrors], r=None, variant=None, N_train=None) -> AggregateErrors:
    if not errors:
        raise ValueError("cannot aggregate an empty error list")
    M = len(errors)
    # summed in index order for reproducibility
    eps_a = sum(e.e_a for e in errors) / M
    eps_c = sum(e.e_c for e in errors) / M
    eps_p = sum(e.e_p for e in errors) / M
    return AggregateErrors(eps_a, eps_c, eps_p, M, r, variant, N_train)


def _margins(e_a, e_p, e_c):
    return e_a - e_p, e_p + e_c - e_a


def verify_bound(errors: Sequence[SampleErrors], agg: AggregateErrors | None = None) -> BoundReport:
    """Check the two-sided bound per sample and on the means.

    Margins are scaled by the tolerance ``1e-12 * (1 + e_a)``; a negative
    margin beyond that is a violation.
    """
    violations = []
    worst = np.inf
    checks = [(e.sample_id, e.e_a, e.e_p, e.e_c) for e in errors]
    if errors:
        agg = agg or aggregate(errors)
    if agg is not None:
        checks.append(("aggregate", agg.eps_a, agg.eps_p, agg.eps_c))
    for sid, a, p, c in checks:
        tol = BOUND_RTOL * (1.0 + a)
        lower, upper = _margins(a, p, c)
        worst = min(worst, lower, upper)
        if lower < -tol:
            violations.append((sid, f"e_p={p:.6e} > e_a={a:.6e}"))
        if upper < -tol:
            violations.append((sid, f"e_a={a:.6e} > e_p+e_c={p + c:.6e}"))
    worst = 0.0 if worst == np.inf else float(worst)
    return BoundReport(not violations, worst, violations)
