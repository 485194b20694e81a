"""Bi-fidelity benchmark solvers.

Each problem has a low- and a high-fidelity resolution; :func:`make_solver`
turns a :class:`SolverConfig` into a callable ``z -> FieldVector``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

from ..pod import FieldVector
from .elliptic1d import solve_elliptic1d
from .nlelliptic2d import solve_nlelliptic2d
from .sampling import BOXES, SAMPLERS, ParamSample, box, sample_box, sample_params
from .vorticity2d import solve_vorticity2d

PROBLEMS = ("elliptic1d", "nlelliptic2d", "vorticity2d")

# collocation points (elliptic1d), interior nodes per axis (nlelliptic2d),
# grid points per axis (vorticity2d)
DEFAULT_RESOLUTION = {
    "elliptic1d": {"low": 32, "high": 128},
    "nlelliptic2d": {"low": 11, "high": 55},
    "vorticity2d": {"low": 16, "high": 128},
}


@dataclass(frozen=True)
class SolverConfig:
    problem: str
    fidelity: str
    resolution: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if self.fidelity not in ("low", "high"):
            raise ValueError(f"unknown fidelity {self.fidelity!r}")
        if self.resolution is None:
            object.__setattr__(self, "resolution", DEFAULT_RESOLUTION[self.problem][self.fidelity])
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")

    def to_dict(self) -> dict:
        return asdict(self)


def fidelity_pair(problem: str, low: int | None = None, high: int | None = None, seed: int = 0):
    lo = SolverConfig(problem, "low", low, seed)
    hi = SolverConfig(problem, "high", high, seed)
    if lo.resolution >= hi.resolution:
        raise ValueError(f"low resolution {lo.resolution} must be coarser than high {hi.resolution}")
    return lo, hi


def solve(cfg: SolverConfig, z) -> FieldVector:
    if cfg.problem == "elliptic1d":
        return solve_elliptic1d(z, K=cfg.resolution)
    if cfg.problem == "nlelliptic2d":
        return solve_nlelliptic2d(z, n=cfg.resolution)
    return solve_vorticity2d(z, n=cfg.resolution, seed=cfg.seed)


class CountingSolver:
    """Callable solver that counts its invocations."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.calls = 0

    def __call__(self, z) -> FieldVector:
        self.calls += 1
        return solve(self.cfg, z)


def make_solver(cfg: SolverConfig) -> CountingSolver:
    return CountingSolver(cfg)


__all__ = [
    "BOXES", "PROBLEMS", "SAMPLERS", "CountingSolver", "ParamSample", "SolverConfig", "box",
    "fidelity_pair", "make_solver", "sample_box", "sample_params", "solve",
]
