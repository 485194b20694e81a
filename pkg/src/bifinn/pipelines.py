"""Non-intrusive reduced-order surrogates built on POD coefficients.

Three variants share one online formula ``u~ = V_h c~``:

``podnn_joint``
    one net maps the parameter z to all r high-fidelity coefficients.
``mpodnn``
    r single-output nets, the i-th maps z to coefficient i.
``bifinn``
    r single-output nets fed the feature ``x = (z, V_l^T u_l(z))``, so every
    online query costs exactly one low-fidelity solve.

Snapshot matrices hold one solution per column; parameter and feature arrays
hold one sample per row.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lm import TrainOptions, multi_restart_train, split_validation
from .net import NetLayout, ShallowNet, forward
from .parallel import pmap
from .pod import PodBasis

VARIANTS = ("podnn_joint", "mpodnn", "bifinn")


@dataclass
class RomModel:
    variant: str
    basis_high: PodBasis
    nets: list
    basis_low: PodBasis | None = None
    meta: dict = field(default_factory=dict)
    # training reports of the selected nets; kept in memory only
    reports: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        r = self.basis_high.r
        if self.variant == "podnn_joint":
            if len(self.nets) != 1 or self.nets[0].layout.n_out != r:
                raise ValueError("joint POD-NN needs one net with r outputs")
        elif len(self.nets) != r or any(n.layout.n_out != 1 for n in self.nets):
            raise ValueError(f"{self.variant} needs r={r} single-output nets")
        if self.variant == "bifinn":
            if self.basis_low is None:
                raise ValueError("bifinn needs a low-fidelity basis")
            expected = self.d + self.basis_low.r
        else:
            expected = self.d
        if any(n.layout.n_in != expected for n in self.nets):
            raise ValueError(f"{self.variant} nets must take {expected} inputs")

    @property
    def r(self) -> int:
        return self.basis_high.r

    @property
    def d(self) -> int:
        return int(self.meta.get("d", self.nets[0].layout.n_in - (self.basis_low.r if self.basis_low else 0)))


@dataclass(frozen=True)
class Prediction:
    coeffs: np.ndarray
    field: np.ndarray
    low_solves: int = 0
    high_solves: int = 0


def coefficients(basis: PodBasis, U) -> np.ndarray:
    """POD coefficients of snapshot columns, one sample per row."""
    return (basis.V.T @ np.asarray(U, dtype=float)).T


def bifinn_features(Z, basis_low: PodBasis, U_low) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return np.hstack([Z, coefficients(basis_low, U_low)])


def _train_component(args):
    layout, X, y, Xv, yv, opts = args
    return multi_restart_train(layout, X, y, opts, Xv, yv)


def _val_score(C_pred, C_val) -> float:
    """Mean squared coefficient error on the validation set, raw units."""
    return float(np.mean(np.sum((C_pred - C_val) ** 2, axis=1)))


def _split(X, C, X_val, C_val, opts):
    if X_val is None:
        return split_validation(X, C, opts)
    return (np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(C, dtype=float),
            np.atleast_2d(np.asarray(X_val, dtype=float)), np.asarray(C_val, dtype=float))


def fit_componentwise(X, C, X_val, C_val, H_range, opts: TrainOptions):
    """r single-output nets, one shared hidden-unit sweep.

    The winning H minimises the summed raw-coefficient validation error of
    all components.  Returns ``(H, nets, info)``.
    """
    X, C, X_val, C_val = _split(X, C, X_val, C_val, opts)
    C, C_val = C.reshape(X.shape[0], -1), C_val.reshape(X_val.shape[0], -1)
    r = C.shape[1]
    best = None
    scores = {}
    for H in sorted(set(int(h) for h in H_range)):
        layout = NetLayout.square(X.shape[1], H, 1)
        jobs = [(layout, X, C[:, i], X_val, C_val[:, i], opts) for i in range(r)]
        try:
            reports = pmap(_train_component, jobs)
        except Exception as exc:  # one failed H is not fatal
            scores[H] = repr(exc)
            continue
        nets = [rep.best_net for rep in reports]
        pred = np.column_stack([forward(net, X_val) for net in nets])
        scores[H] = _val_score(pred, C_val)
        if best is None or scores[H] < best[0]:
            best = (scores[H], H, nets, reports)
    if best is None:
        raise RuntimeError(f"training failed for every H: {scores}")
    _, H, nets, reports = best
    info = {
        "H": H, "H_scores": {str(k): v for k, v in scores.items()}, "N": int(X.shape[0]), "N_val": int(X_val.shape[0]),
        "component_val_mse": [rep.best_val_mse for rep in reports],
        "restart_index": [rep.restart_index for rep in reports],
    }
    return H, nets, info, reports


def _base_meta(d, opts, extra):
    meta = {"d": int(d), "seed": opts.seed, "n_restarts": opts.n_restarts}
    meta.update(extra or {})
    return meta


def offline_podnn_joint(Z, U_high, basis_high: PodBasis, opts: TrainOptions, H_range=(8,),
                        Z_val=None, U_high_val=None, meta=None) -> RomModel:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    C = coefficients(basis_high, U_high)
    C_val = None if U_high_val is None else coefficients(basis_high, U_high_val)
    Z, C, Z_val, C_val = _split(Z, C, Z_val, C_val, opts)
    best, scores = None, {}
    for H in sorted(set(int(h) for h in H_range)):
        rep = multi_restart_train(NetLayout.square(Z.shape[1], H, basis_high.r), Z, C, opts, Z_val, C_val)
        scores[H] = _val_score(forward(rep.best_net, Z_val), C_val)
        if best is None or scores[H] < best[0]:
            best = (scores[H], H, rep)
    _, H, rep = best
    info = {"H": H, "H_scores": {str(k): v for k, v in scores.items()}, "N": int(Z.shape[0]), "N_val": int(Z_val.shape[0]),
            "component_val_mse": [rep.best_val_mse], "restart_index": [rep.restart_index]}
    return RomModel("podnn_joint", basis_high, [rep.best_net], None, {**_base_meta(Z.shape[1], opts, meta), **info},
                    [rep])


def offline_mpodnn(Z, U_high, basis_high: PodBasis, opts: TrainOptions, H_range=(8,),
                   Z_val=None, U_high_val=None, meta=None) -> RomModel:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    C = coefficients(basis_high, U_high)
    C_val = None if U_high_val is None else coefficients(basis_high, U_high_val)
    _, nets, info, reports = fit_componentwise(Z, C, Z_val, C_val, H_range, opts)
    return RomModel("mpodnn", basis_high, nets, None, {**_base_meta(Z.shape[1], opts, meta), **info}, reports)


def offline_bifinn(Z, U_low, U_high, basis_low: PodBasis, basis_high: PodBasis, opts: TrainOptions,
                   H_range=(8,), Z_val=None, U_low_val=None, U_high_val=None, meta=None) -> RomModel:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    X = bifinn_features(Z, basis_low, U_low)
    C = coefficients(basis_high, U_high)
    X_val = C_val = None
    if Z_val is not None:
        X_val = bifinn_features(Z_val, basis_low, U_low_val)
        C_val = coefficients(basis_high, U_high_val)
    _, nets, info, reports = fit_componentwise(X, C, X_val, C_val, H_range, opts)
    return RomModel("bifinn", basis_high, nets, basis_low, {**_base_meta(Z.shape[1], opts, meta), **info}, reports)


def predict_coefficients(model: RomModel, X) -> np.ndarray:
    """Coefficients for a batch of network inputs (rows), shape (n, r)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if model.variant == "podnn_joint":
        return forward(model.nets[0], X)
    return np.column_stack([forward(net, X)[:, 0] for net in model.nets])


def _check_z(model: RomModel, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (model.d,):
        raise ValueError(f"parameter of shape {z.shape}, model expects ({model.d},)")
    return z


def online_podnn_joint(model: RomModel, z) -> Prediction:
    if model.variant != "podnn_joint":
        raise ValueError(f"expected a podnn_joint model, got {model.variant}")
    c = predict_coefficients(model, _check_z(model, z)[None, :])[0]
    return Prediction(c, model.basis_high.V @ c)


def online_mpodnn(model: RomModel, z) -> Prediction:
    if model.variant != "mpodnn":
        raise ValueError(f"expected an mpodnn model, got {model.variant}")
    c = predict_coefficients(model, _check_z(model, z)[None, :])[0]
    return Prediction(c, model.basis_high.V @ c)


def online_bifinn(model: RomModel, z, low_solver) -> Prediction:
    """One low-fidelity solve, then r net evaluations."""
    if model.variant != "bifinn":
        raise ValueError(f"expected a bifinn model, got {model.variant}")
    z = _check_z(model, z)
    u_low = low_solver(z)
    values = getattr(u_low, "values", u_low)
    x = bifinn_features(z[None, :], model.basis_low, np.asarray(values)[:, None])
    c = predict_coefficients(model, x)[0]
    return Prediction(c, model.basis_high.V @ c, low_solves=1, high_solves=0)


def predict(model: RomModel, z, low_solver=None) -> Prediction:
    if model.variant == "bifinn":
        if low_solver is None:
            raise ValueError("bifinn prediction needs a low-fidelity solver")
        return online_bifinn(model, z, low_solver)
    if model.variant == "mpodnn":
        return online_mpodnn(model, z)
    return online_podnn_joint(model, z)


def predict_batch(model: RomModel, Z, U_low=None):
    """Vectorised online stage from precomputed low-fidelity snapshots.

    Returns ``(C_pred, U_pred)`` with coefficients as rows and fields as columns.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if model.variant == "bifinn":
        if U_low is None:
            raise ValueError("bifinn prediction needs low-fidelity snapshots")
        X = bifinn_features(Z, model.basis_low, U_low)
    else:
        X = Z
    C = predict_coefficients(model, X)
    return C, model.basis_high.V @ C.T


def truncated(model: RomModel, r: int) -> RomModel:
    """Rank-r submodel of a component-wise model (nets for the leading r coefficients).

    Only valid for ``mpodnn``: its i-th net does not depend on r.
    """
    if model.variant != "mpodnn":
        raise ValueError("only mpodnn models can be truncated")
    meta = {**model.meta, "truncated_from": model.r}
    return RomModel("mpodnn", model.basis_high.truncate(r), model.nets[:r], None, meta, model.reports[:r])
