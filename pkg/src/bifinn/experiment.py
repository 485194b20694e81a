"""Data generation, training and evaluation cells used by the CLI and scripts."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .lm import TrainOptions
from .metrics import aggregate, batch_errors, verify_bound
from .parallel import pmap
from .pipelines import (RomModel, coefficients, offline_bifinn, offline_mpodnn, offline_podnn_joint, predict,
                        predict_batch)
from .pod import PodBasis, compute_pod
from .solvers import CountingSolver, SolverConfig, box, fidelity_pair, sample_box, solve

log = logging.getLogger(__name__)


def solver_configs(cfg: ExperimentConfig) -> tuple[SolverConfig, SolverConfig]:
    return fidelity_pair(cfg.problem, cfg.low_resolution, cfg.high_resolution, cfg.noise_seed)


def _solve_pair(args):
    lo, hi, z = args
    return (None if lo is None else solve(lo, z).values), solve(hi, z).values


def generate_split(problem: str, n: int, sampler: str, seed: int, lo: SolverConfig | None,
                   hi: SolverConfig) -> dict:
    """Sample ``n`` parameters and solve both fidelities at each."""
    Z = sample_box(*box(problem), n, sampler, seed)
    pairs = pmap(_solve_pair, [(lo, hi, z) for z in Z])
    low = None if lo is None else np.column_stack([p[0] for p in pairs])
    return {"Z": Z, "high": np.column_stack([p[1] for p in pairs]), "low": low,
            "meta": {"problem": problem, "sampler": sampler, "seed": int(seed), "n": int(Z.shape[0]),
                     "low_config": None if lo is None else lo.to_dict(), "high_config": hi.to_dict()}}


def build_bases(basis_split: dict) -> tuple[PodBasis, PodBasis | None]:
    """Full-rank POD bases of both fidelities; truncate per cell."""
    meta = basis_split.get("meta", {})
    hi_grid = _grid_tag(meta.get("high_config"))
    bh = compute_pod(basis_split["high"], fidelity="high", grid_id=hi_grid)
    bl = None
    if basis_split.get("low") is not None:
        bl = compute_pod(basis_split["low"], fidelity="low", grid_id=_grid_tag(meta.get("low_config")))
    return bh, bl


def _grid_tag(solver_cfg) -> str:
    if not solver_cfg:
        return ""
    return f"{solver_cfg['problem']}-{solver_cfg['resolution']}"


def low_rank(basis_low: PodBasis, r: int) -> int:
    """Low-fidelity rank matching r, capped at the low snapshots' numerical rank."""
    return min(r, basis_low.R)


def train_options(cfg: ExperimentConfig, seed: int) -> TrainOptions:
    return TrainOptions(max_iters=cfg.max_iters, n_restarts=cfg.n_restarts, patience=cfg.patience,
                        val_fraction=cfg.val_fraction, seed=seed)


def train_cell(variant: str, train: dict, val: dict, basis_high: PodBasis, basis_low: PodBasis | None,
               r: int, opts: TrainOptions, H_range, meta=None) -> RomModel:
    bh = basis_high.truncate(r)
    meta = dict(meta or {})
    if variant == "podnn_joint":
        return offline_podnn_joint(train["Z"], train["high"], bh, opts, H_range, val["Z"], val["high"], meta)
    if variant == "mpodnn":
        return offline_mpodnn(train["Z"], train["high"], bh, opts, H_range, val["Z"], val["high"], meta)
    bl = basis_low.truncate(low_rank(basis_low, r))
    return offline_bifinn(train["Z"], train["low"], train["high"], bl, bh, opts, H_range,
                          val["Z"], val["low"], val["high"], meta)


@dataclass
class Evaluation:
    errors: list
    aggregate: object
    bound: object
    low_solves: int
    high_solves: int
    seconds: float


def evaluate_model(model: RomModel, test: dict, low_solver: CountingSolver | None = None) -> Evaluation:
    """Online predictions over a test split plus the error decomposition.

    With ``low_solver`` every sample goes through the per-query online stage and
    low-fidelity solves are counted; otherwise stored low-fidelity snapshots
    are used in one vectorised pass.
    """
    t0 = time.perf_counter()
    U_h = test["high"]
    high_solver = CountingSolver(SolverConfig(model.meta.get("problem", "elliptic1d"), "high"))
    if low_solver is not None or model.variant != "bifinn":
        preds = [predict(model, z, low_solver) for z in test["Z"]]
        C_pred = np.column_stack([p.coeffs for p in preds])
        U_pred = np.column_stack([p.field for p in preds])
        low = sum(p.low_solves for p in preds)
        high = sum(p.high_solves for p in preds) + high_solver.calls
        if low_solver is not None and low_solver.calls != low:
            raise RuntimeError(f"solver reported {low_solver.calls} calls, predictions {low}")
    else:
        C, U_pred = predict_batch(model, test["Z"], test["low"])
        C_pred = C.T
        low, high = 0, 0
    C_h = coefficients(model.basis_high, U_h).T
    ids = test.get("ids") or list(range(U_h.shape[1]))
    errs = batch_errors(U_h, U_pred, C_h, C_pred, model.basis_high.V, ids)
    agg = aggregate(errs, model.r, model.variant, model.meta.get("N"))
    return Evaluation(errs, agg, verify_bound(errs, agg), low, high, time.perf_counter() - t0)
