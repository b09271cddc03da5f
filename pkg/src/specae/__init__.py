"""Spectral autoencoder anomaly detection for attributed networks."""

from .bench import InjectionRecord, generate_sbm, inject_anomalies, inject_community, inject_global
from .config import TrainConfig
from .gmm import GmmParams, covariance_penalty, estimate_params, membership, sample_energy
from .graph import (
    AttributedGraph,
    PropagationMatrix,
    load_citation_dataset,
    normalize_propagation,
    propagate,
)
from .metrics import MetricReport, accuracy_at_k, evaluate, roc_auc
from .model import SpecAEModel, load_checkpoint, save_checkpoint
from .tensor import Tensor
from .trainer import ScoredNodes, TrainResult, score, train

__all__ = [
    "AttributedGraph",
    "GmmParams",
    "InjectionRecord",
    "MetricReport",
    "PropagationMatrix",
    "ScoredNodes",
    "SpecAEModel",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "accuracy_at_k",
    "covariance_penalty",
    "estimate_params",
    "evaluate",
    "generate_sbm",
    "inject_anomalies",
    "inject_community",
    "inject_global",
    "load_checkpoint",
    "load_citation_dataset",
    "membership",
    "normalize_propagation",
    "propagate",
    "roc_auc",
    "sample_energy",
    "save_checkpoint",
    "score",
    "train",
]

__version__ = "0.1.0"
