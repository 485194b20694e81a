"""Experiment configuration shared by every CLI verb."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .pipelines import VARIANTS
from .solvers import PROBLEMS, SAMPLERS

# per-problem defaults for the parameter sets: (sampler, size)
PROBLEM_DEFAULTS = {
    "elliptic1d": {"basis": ("monte_carlo_uniform", 100), "train": "monte_carlo_uniform",
                   "test": ("monte_carlo_uniform", 100)},
    "nlelliptic2d": {"basis": ("uniform_grid", 225), "train": "lhs", "test": ("uniform_grid", 256)},
    "vorticity2d": {"basis": ("lhs", 100), "train": "lhs", "test": ("lhs", 100)},
}


@dataclass
class ExperimentConfig:
    problem: str
    variants: list = field(default_factory=lambda: ["mpodnn", "bifinn"])
    N_train: list = field(default_factory=lambda: [100])
    r: list = field(default_factory=lambda: [16])
    H: list = field(default_factory=lambda: list(range(1, 25)))
    n_restarts: int = 10
    max_iters: int = 1000
    patience: int | None = None
    val_fraction: float = 0.25
    seeds: list = field(default_factory=lambda: [0])
    data_seed: int = 0
    n_basis: int | None = None
    n_test: int | None = None
    basis_sampler: str | None = None
    train_sampler: str | None = None
    test_sampler: str | None = None
    low_resolution: int | None = None
    high_resolution: int | None = None
    noise_seed: int = 0
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        for name in ("variants", "N_train", "r", "H", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a nonempty list")
        bad = set(self.variants) - set(VARIANTS)
        if bad:
            raise ValueError(f"unknown variants {sorted(bad)}")
        d = PROBLEM_DEFAULTS[self.problem]
        self.basis_sampler = self.basis_sampler or d["basis"][0]
        self.n_basis = self.n_basis or d["basis"][1]
        self.train_sampler = self.train_sampler or d["train"]
        self.test_sampler = self.test_sampler or d["test"][0]
        self.n_test = self.n_test or d["test"][1]
        for s in (self.basis_sampler, self.train_sampler, self.test_sampler):
            if s not in SAMPLERS:
                raise ValueError(f"unknown sampler {s!r}")

    @property
    def n_train_max(self) -> int:
        return max(self.N_train)

    def data_seeds(self, rep_seed: int = 0, N: int = 0) -> dict:
        """Disjoint sampler seeds for the basis, test, train and validation sets.

        Train/validation sets are drawn afresh for every (repetition, N) pair.
        """
        base = 1_000_003 * (self.data_seed + 1)
        train = base + 100_000 * (rep_seed + 1) + 2 * N
        return {"basis": base + 1, "test": base + 2, "train": train, "val": train + 1}

    def n_val(self, N: int) -> int:
        return max(1, math.ceil(self.val_fraction * N))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
