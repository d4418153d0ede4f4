"""Overlapping community detection with a local-modularity-guided GCN.

A two-layer graph-convolutional encoder maps node attributes to a
nonnegative node-community affiliation matrix. Training combines a
class-balanced Bernoulli-Poisson reconstruction loss with a
local-modularity contrast loss (staged in by an early-stopping counter),
and thresholding the affiliations yields a possibly overlapping cover.
"""

from .graph import (
    Graph,
    NormalizedAdjacency,
    augment_adjacency,
    degree_vector,
    features_from_inputs,
    normalize_adjacency,
    row_l2_normalize,
    validate_graph,
)
from .kernel import RngStream, apply_elementwise, gemm, log1mexp, spmm
from .losses import (
    LocalScalingS,
    LossBreakdown,
    ModularityMatrixB,
    bp_loss_balanced,
    bp_loss_bruteforce,
    build_B,
    build_S,
    lq_loss,
    lq_matrix,
    modularity_q,
    total_loss,
)
from .metrics import Cover, onmi, recall_best_match
from .model import ForwardCache, ModelParams, backward, forward, init_params, xavier_init
from .synthetic import PlantedInstance, make_planted, sample_bp_graph
from .training import (
    AdamState,
    TrainConfig,
    TrainLog,
    TrainResult,
    adam_step,
    threshold_assign,
    threshold_sweep,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Cover",
    "ForwardCache",
    "Graph",
    "LocalScalingS",
    "LossBreakdown",
    "ModelParams",
    "ModularityMatrixB",
    "NormalizedAdjacency",
    "PlantedInstance",
    "RngStream",
    "TrainConfig",
    "TrainLog",
    "TrainResult",
    "adam_step",
    "apply_elementwise",
    "augment_adjacency",
    "backward",
    "bp_loss_balanced",
    "bp_loss_bruteforce",
    "build_B",
    "build_S",
    "degree_vector",
    "features_from_inputs",
    "forward",
    "gemm",
    "init_params",
    "log1mexp",
    "lq_loss",
    "lq_matrix",
    "make_planted",
    "modularity_q",
    "normalize_adjacency",
    "onmi",
    "recall_best_match",
    "row_l2_normalize",
    "sample_bp_graph",
    "spmm",
    "threshold_assign",
    "threshold_sweep",
    "total_loss",
    "train",
    "validate_graph",
    "xavier_init",
]
