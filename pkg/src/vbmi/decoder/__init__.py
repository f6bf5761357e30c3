"""Algorithm layer: TRCA/TDCA training, scoring and multi-trial decisions."""

from .base import ScoreVector, TemplateDecoder, aggregate_trials, check_epochs
from .latency import infer_latency_probe, latency_profile
from .linalg import generalized_eigh, pearson, principal_generalized_eigvec, rayleigh_quotient
from .tdca import TDCA, code_references, delay_embed, projection_matrix, tdca_score, tdca_train
from .trca import TRCA, trca_matrices, trca_score, trca_train

__all__ = [
    "ScoreVector", "TDCA", "TRCA", "TemplateDecoder", "aggregate_trials", "check_epochs",
    "code_references", "delay_embed", "generalized_eigh", "infer_latency_probe", "latency_profile",
    "pearson", "principal_generalized_eigvec", "projection_matrix", "rayleigh_quotient",
    "tdca_score", "tdca_train", "trca_matrices", "trca_score", "trca_train",
]
