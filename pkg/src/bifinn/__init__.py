"""Bi-fidelity reduced-order surrogates: POD bases, shallow nets trained by
Levenberg-Marquardt, benchmark PDE solvers and the experiment harness."""
from .lm import TrainOptions, TrainReport, multi_restart_train, train
from .metrics import aggregate, sample_errors, verify_bound
from .net import NetLayout, ShallowNet, init_net
from .pipelines import RomModel, offline_bifinn, offline_mpodnn, offline_podnn_joint, predict
from .pod import FieldVector, PodBasis, compute_pod, project, reconstruct

__version__ = "0.1.0"
__all__ = [
    "FieldVector", "NetLayout", "PodBasis", "RomModel", "ShallowNet", "TrainOptions", "TrainReport",
    "aggregate", "compute_pod", "init_net", "multi_restart_train", "offline_bifinn", "offline_mpodnn",
    "offline_podnn_joint", "predict", "project", "reconstruct", "sample_errors", "train", "verify_bound",
]
