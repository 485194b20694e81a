"""Summaries of metrics tables used to judge convergence trends.

Rows are dicts as written to ``metrics.csv`` (values may be strings).
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np


def _key(row, *names):
    return tuple(int(float(row[n])) if n != "variant" else row[n] for n in names)


def seed_values(rows, metric: str) -> dict:
    """``{(variant, N, r): {seed: value}}``."""
    out = defaultdict(dict)
    for row in rows:
        out[_key(row, "variant", "N_train", "r")][int(float(row["seed"]))] = float(row[metric])
    return dict(out)


def seed_mean_curve(rows, metric: str, variant: str, N: int):
    """Ranks and seed-mean metric along r for one (variant, N)."""
    vals = seed_values(rows, metric)
    ranks = sorted(r for (v, n, r) in vals if v == variant and n == N)
    return np.array(ranks), np.array([np.mean(list(vals[variant, N, r].values())) for r in ranks])


def decreases_then_saturates(eps_a, eps_p, drop=0.5, flat=0.3, floor=2.0) -> bool:
    """True when a curve over increasing r first falls and then stops improving.

    Requires ``eps_a[-1] <= drop * eps_a[0]``, a last step that improves by
    less than the fraction ``flat`` (a rise counts as saturated) and a final
    level at least ``floor`` times the projection error, i.e. the plateau is
    set by the coefficient error rather than by r.
    """
    eps_a, eps_p = np.asarray(eps_a, float), np.asarray(eps_p, float)
    if eps_a.size < 3:
        return False
    falls = eps_a[-1] <= drop * eps_a[0]
    levels = eps_a[-1] >= (1.0 - flat) * eps_a[-2]
    return bool(falls and levels and eps_a[-1] >= floor * eps_p[-1])


def plateau_level(eps_a, k=2) -> float:
    """Saturation level: mean of the last ``k`` points of a curve over r."""
    return float(np.mean(np.asarray(eps_a, float)[-k:]))


def paired_wins(rows, metric: str, better: str, worse: str, N: int, r: int) -> tuple[int, int]:
    """Number of seeds where ``better`` beats ``worse`` at (N, r), and seeds compared."""
    vals = seed_values(rows, metric)
    a, b = vals.get((better, N, r), {}), vals.get((worse, N, r), {})
    seeds = sorted(set(a) & set(b))
    return sum(a[s] < b[s] for s in seeds), len(seeds)
