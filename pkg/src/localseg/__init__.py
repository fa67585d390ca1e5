"""Few-shot segmentation with a local relationship-matrix transformation.

Support and query feature grids are compared location by location in a
learned embedding space; the resulting cosine relationship matrix is
mapped to a query attention map through the right inverse of the support
mask, and that attention gates the query features before a small head.
"""

from .episode import Episode
from .errors import (
    DimensionMismatch,
    EmptyList,
    EmptyMask,
    FormatError,
    InsufficientImages,
    InvalidArgument,
    LocalSegError,
)
from .features import ModelParams, init_params
from .losses import LossWeights, finite_diff_check, grad_total_loss
from .metrics import MetricsReport, fb_iou, foreground_iou, miou
from .training import TrainConfig, evaluate, sample_training_episode, train
from .transform import (
    attention_from_relationship,
    average_attention,
    relationship_matrix,
    transform_episode,
    truth_relationship,
)

__version__ = "0.1.0"

__all__ = [
    "Episode", "ModelParams", "init_params", "LossWeights", "TrainConfig",
    "MetricsReport", "attention_from_relationship", "average_attention",
    "relationship_matrix", "truth_relationship", "transform_episode",
    "grad_total_loss", "finite_diff_check", "train", "evaluate",
    "sample_training_episode", "foreground_iou", "miou", "fb_iou",
    "LocalSegError", "DimensionMismatch", "EmptyList", "EmptyMask",
    "FormatError", "InsufficientImages", "InvalidArgument",
]
