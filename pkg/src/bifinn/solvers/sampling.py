"""Parameter boxes and samplers for the benchmark problems."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLERS = ("monte_carlo_uniform", "lhs", "uniform_grid")

# parameter box I_z per problem: (lower, upper) arrays
BOXES = {
    "elliptic1d": (np.full(10, -1.0), np.full(10, 1.0)),
    "nlelliptic2d": (np.array([0.01, 0.01]), np.array([10.0, 10.0])),
    "vorticity2d": (np.array([2e-3]), np.array([5e-3])),
}

# tensor grids explode with dimension; only allow them in low d
MAX_GRID_DIM = 3


@dataclass(frozen=True)
class ParamSample:
    z: np.ndarray
    id: str
    sampler: str


def box(problem: str):
    try:
        return BOXES[problem]
    except KeyError:
        raise ValueError(f"unknown problem {problem!r}; expected one of {sorted(BOXES)}") from None


def lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube in [0,1]^d: one permutation per axis, jitter inside each stratum."""
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + rng.uniform(size=(n, d))) / n


def sample_box(lo, hi, n: int, sampler: str, seed: int) -> np.ndarray:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    d = lo.size
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    if sampler == "monte_carlo_uniform":
        unit = rng.uniform(size=(n, d))
    elif sampler == "lhs":
        unit = lhs_unit(n, d, rng)
    elif sampler == "uniform_grid":
        if d > MAX_GRID_DIM:
            raise ValueError(f"uniform_grid sampling unsupported in d={d} > {MAX_GRID_DIM}")
        m = math.ceil(round(n ** (1.0 / d), 12))
        axes = [np.linspace(0.0, 1.0, m)] * d
        unit = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    return lo + unit * (hi - lo)


def sample_params(problem: str, n: int, sampler: str, seed: int) -> list[ParamSample]:
    lo, hi = box(problem)
    Z = sample_box(lo, hi, n, sampler, seed)
    return [ParamSample(z, f"{sampler}-{seed}-{i}", sampler) for i, z in enumerate(Z)]
