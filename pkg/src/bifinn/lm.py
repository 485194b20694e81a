"""Levenberg-Marquardt training of shallow nets.

All arithmetic happens in the net's normalized output space: residuals are
``r = Y_hat - f(X_hat; theta)`` and the step solves

    (J^T J + lambda * diag(J^T J)) delta = J^T r

with ``J = df/dtheta``.  A step is accepted only if the mean squared residual
strictly decreases.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .net import NetLayout, ShallowNet, fit_normalizers, forward_normalized, init_net, jacobian_normalized

log = logging.getLogger(__name__)

LAMBDA_MIN = 1e-15
DIAG_FLOOR = 1e-12

STOP_MAX_ITERS = "max_iters"
STOP_GRAD_TOL = "grad_tol"
STOP_LAMBDA_MAX = "lambda_max"
STOP_PATIENCE = "val_patience"
STOP_NON_FINITE = "non_finite"


@dataclass(frozen=True)
class TrainOptions:
    max_iters: int = 1000
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e10
    grad_tol: float = 1e-10
    val_fraction: float = 0.25
    n_restarts: int = 10
    seed: int = 0
    # stop after this many accepted steps without a new best validation MSE
    patience: int | None = None

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.lambda_up <= 1.0 or self.lambda_down <= 1.0:
            raise ValueError("damping factors must exceed 1")
        if min(self.lambda0, self.lambda_max, self.grad_tol) <= 0.0:
            raise ValueError("damping and tolerances must be positive")
        if self.max_iters < 0 or self.n_restarts < 1:
            raise ValueError("max_iters >= 0 and n_restarts >= 1 required")


@dataclass
class TrainReport:
    best_net: ShallowNet
    train_mse_history: np.ndarray
    val_mse_history: np.ndarray
    stop_reason: str
    restart_index: int = 0
    best_val_mse: float = math.inf
    best_iter: int = 0
    restart_val_mse: list = field(default_factory=list)
    restart_stop_reasons: list = field(default_factory=list)

    @property
    def n_iters(self) -> int:
        return len(self.train_mse_history) - 1


class TrainingDiverged(RuntimeError):
    pass


def damped_solve(J: np.ndarray, r: np.ndarray, lam: float) -> np.ndarray:
    """Marquardt-scaled damped Gauss-Newton step for residuals ``r = y - f``."""
    A = J.T @ J
    d = np.maximum(np.diag(A), DIAG_FLOOR)
    A[np.diag_indices_from(A)] += lam * d
    g = J.T @ r
    try:
        return np.linalg.solve(A, g)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"damped system singular at lambda={lam:.3e}, cond={np.linalg.cond(A):.3e}") from exc


def lm_update(theta, mse, J, r, lam, model: Callable, y: np.ndarray, opts: TrainOptions):
    """One accept/reject Levenberg-Marquardt update for a generic model.

    ``model(theta)`` returns the flattened model output.  Returns
    ``(theta, mse, accepted, lam)``; a rejected step returns ``theta``
    unchanged and ``lam * lambda_up``.
    """
    cand = theta + damped_solve(J, r, lam)
    with np.errstate(over="ignore", invalid="ignore"):
        new_mse = float(np.mean((y - model(cand)) ** 2))
    if np.isfinite(new_mse) and new_mse < mse:
        return cand, new_mse, True, max(lam / opts.lambda_down, LAMBDA_MIN)
    return theta, mse, False, lam * opts.lambda_up


def least_squares_lm(model_and_jac: Callable, theta0, y, opts: TrainOptions | None = None):
    """Plain LM loop for an arbitrary ``model_and_jac(theta) -> (f, J)``.

    Returns ``(theta, mse, n_iters, stop_reason)``.
    """
    opts = opts or TrainOptions()
    theta = np.asarray(theta0, dtype=float)
    y = np.asarray(y, dtype=float)
    f, J = model_and_jac(theta)
    r = y - f
    mse = float(np.mean(r**2))
    lam = opts.lambda0
    for it in range(opts.max_iters):
        if np.max(np.abs(J.T @ r)) * 2.0 / r.size < opts.grad_tol:
            return theta, mse, it, STOP_GRAD_TOL
        theta, mse, accepted, lam = lm_update(theta, mse, J, r, lam, lambda t: model_and_jac(t)[0], y, opts)
        if accepted:
            f, J = model_and_jac(theta)
            r = y - f
        elif lam > opts.lambda_max:
            return theta, mse, it + 1, STOP_LAMBDA_MAX
    return theta, mse, opts.max_iters, STOP_MAX_ITERS


def lm_step(net: ShallowNet, X, Y, lam: float, opts: TrainOptions | None = None):
    """Single LM step on raw data ``(X, Y)`` using the net's normalizers."""
    opts = opts or TrainOptions()
    Xn = net.normalize_x(np.atleast_2d(X))
    yn = net.normalize_y(np.asarray(Y, dtype=float).reshape(Xn.shape[0], -1)).ravel()
    out, J = jacobian_normalized(net.theta, net.layout, Xn)
    r = yn - out.ravel()
    mse = float(np.mean(r**2))
    if not np.isfinite(mse):
        raise FloatingPointError("non-finite residuals")
    model = lambda t: forward_normalized(t, net.layout, Xn).ravel()  # noqa: E731
    return lm_update(net.theta, mse, J, r, lam, model, yn, opts)


def _canonical(X: np.ndarray, Y: np.ndarray):
    order = np.lexsort(np.hstack([X, Y]).T[::-1])
    return X[order], Y[order]


def split_validation(X, Y, opts: TrainOptions):
    """Seeded shuffle (of canonically ordered rows); the last ceil(val_fraction*n) rows validate.

    Both parts are returned in canonical row order, so the result depends only
    on the set of samples and the seed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    X, Y = _canonical(X, Y)
    n = X.shape[0]
    n_val = math.ceil(opts.val_fraction * n)
    if n - n_val < 2:
        raise ValueError(f"{n} samples leave fewer than 2 for training after the validation split")
    perm = np.random.default_rng(opts.seed).permutation(n)
    tr, va = perm[: n - n_val], perm[n - n_val:]
    return (*_canonical(X[tr], Y[tr]), *_canonical(X[va], Y[va]))


def _prepare(X, Y, X_val, Y_val, opts):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    if X_val is None:
        return split_validation(X, Y, opts)
    X_val = np.atleast_2d(np.asarray(X_val, dtype=float))
    Y_val = np.asarray(Y_val, dtype=float).reshape(X_val.shape[0], -1)
    if X.shape[0] < 2 or X_val.shape[0] < 1:
        raise ValueError("need >= 2 training and >= 1 validation samples")
    return (*_canonical(X, Y), *_canonical(X_val, Y_val))


def train(net: ShallowNet, X, Y, opts: TrainOptions | None = None, X_val=None, Y_val=None,
          restart_index: int = 0) -> TrainReport:
    """Run LM from ``net`` (normalizers already fitted) and keep the best-validation state.

    Without an explicit validation set the data are split by
    :func:`split_validation`.
    """
    opts = opts or TrainOptions()
    Xtr, Ytr, Xva, Yva = _prepare(X, Y, X_val, Y_val, opts)
    layout = net.layout
    Xn, yn = net.normalize_x(Xtr), net.normalize_y(Ytr).ravel()
    Xvn, yvn = net.normalize_x(Xva), net.normalize_y(Yva).ravel()

    def val_mse(t):
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.mean((yvn - forward_normalized(t, layout, Xvn).ravel()) ** 2))

    model = lambda t: forward_normalized(t, layout, Xn).ravel()  # noqa: E731
    theta = net.theta.copy()
    out, J = jacobian_normalized(theta, layout, Xn)
    r = yn - out.ravel()
    mse = float(np.mean(r**2))
    vmse = val_mse(theta)
    train_hist, val_hist = [mse], [vmse]
    if not (np.isfinite(mse) and np.isfinite(vmse)):
        return TrainReport(net, np.array(train_hist), np.array(val_hist), STOP_NON_FINITE,
                           restart_index, math.inf, 0)

    best_theta, best_val, best_iter = theta, vmse, 0
    lam, stale, stop = opts.lambda0, 0, STOP_MAX_ITERS
    for it in range(1, opts.max_iters + 1):
        if np.max(np.abs(J.T @ r)) * 2.0 / r.size < opts.grad_tol:
            stop = STOP_GRAD_TOL
            break
        theta, mse, accepted, lam = lm_update(theta, mse, J, r, lam, model, yn, opts)
        if accepted:
            out, J = jacobian_normalized(theta, layout, Xn)
            r = yn - out.ravel()
            vmse = val_mse(theta)
            if vmse < best_val:
                best_theta, best_val, best_iter, stale = theta, vmse, it, 0
            else:
                stale += 1
        train_hist.append(mse)
        val_hist.append(vmse)
        if not accepted and lam > opts.lambda_max:
            stop = STOP_LAMBDA_MAX
            break
        if opts.patience is not None and stale >= opts.patience:
            stop = STOP_PATIENCE
            break
    return TrainReport(net.with_theta(best_theta), np.array(train_hist), np.array(val_hist), stop,
                       restart_index, best_val, best_iter)


def multi_restart_train(layout: NetLayout, X, Y, opts: TrainOptions | None = None,
                        X_val=None, Y_val=None) -> TrainReport:
    """Train ``n_restarts`` nets seeded ``seed + k`` and keep the best validation MSE.

    Ties go to the lowest restart index.
    """
    opts = opts or TrainOptions()
    Xtr, Ytr, Xva, Yva = _prepare(X, Y, X_val, Y_val, opts)
    best = None
    vals, reasons = [], []
    for k in range(opts.n_restarts):
        net = fit_normalizers(init_net(layout, opts.seed + k), Xtr, Ytr)
        rep = train(net, Xtr, Ytr, opts, Xva, Yva, restart_index=k)
        vals.append(rep.best_val_mse)
        reasons.append(rep.stop_reason)
        if rep.stop_reason != STOP_NON_FINITE and (best is None or rep.best_val_mse < best.best_val_mse):
            best = rep
    if best is None:
        raise TrainingDiverged(f"all {opts.n_restarts} restarts diverged: {reasons}")
    best.restart_val_mse = vals
    best.restart_stop_reasons = reasons
    return best


def sweep_hidden_units(H_range, n_in: int, n_out: int, X, Y, opts: TrainOptions | None = None,
                       X_val=None, Y_val=None):
    """Multi-restart training for each ``H`` (``H1 = H2 = H``).

    Returns ``(best_H, reports)`` where ``reports[H]`` is a :class:`TrainReport`
    or the exception that training raised.  Ties go to the smallest ``H``.
    """
    H_values = sorted(set(int(h) for h in H_range))
    if not H_values:
        raise ValueError("empty hidden-unit range")
    reports = {}
    for H in H_values:
        try:
            reports[H] = multi_restart_train(NetLayout.square(n_in, H, n_out), X, Y, opts, X_val, Y_val)
        except (TrainingDiverged, np.linalg.LinAlgError) as exc:
            log.warning("H=%d failed: %s", H, exc)
            reports[H] = exc
    ok = [H for H in H_values if isinstance(reports[H], TrainReport)]
    if not ok:
        raise TrainingDiverged(f"every hidden-unit setting failed: {reports}")
    best_H = min(ok, key=lambda H: (reports[H].best_val_mse, H))
    return best_H, reports


def gradient_descent_baseline(net: ShallowNet, X, Y, n_iters: int, lr: float = 0.05):
    """Full-batch gradient descent on the same normalized MSE (reference optimiser)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xn = net.normalize_x(X)
    yn = net.normalize_y(np.asarray(Y, dtype=float).reshape(X.shape[0], -1)).ravel()
    theta = net.theta.copy()
    for _ in range(n_iters):
        out, J = jacobian_normalized(theta, net.layout, Xn)
        theta = theta + lr * 2.0 / yn.size * (J.T @ (yn - out.ravel()))
    mse = float(np.mean((yn - forward_normalized(theta, net.layout, Xn).ravel()) ** 2))
    return replace(net, theta=theta), mse
