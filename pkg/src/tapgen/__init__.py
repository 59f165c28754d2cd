"""Temporal action proposal generation on synthetic snippet features.

Pure numpy implementation: a small reverse-mode autodiff core drives a
bidirectional boundary network with nested skip connections plus a proposal
relation block, trained with two-stage balanced cell sampling and evaluated
with AR@AN / AUC / oracle detection mAP after soft non-maximum suppression.
"""

__version__ = "0.1.0"

from .autodiff import Tensor, Parameter, no_grad
from .boundary import build_boundary_map, fuse_heatmaps
from .config import config_hash, load_config
from .errors import ConfigError, DataError, DivergenceError
from .estimator import ProposalGenerator
from .metrics import EvalConfig, auc, detection_map, iou_1d, recall_curve
from .network import ProposalNet
from .postprocess import Proposal, SuppressionConfig, fuse_scores, infer_video, soft_nms
from .rng import derive_seed, make_rng
from .sampling import SamplerConfig, rebalance_ratio, scale_rebalance, two_stage_sample
from .synth import ActionInstance, VideoRecord, Window, gen_dataset, gen_video, make_windows
from .training import TrainConfig, TrainResult, train

__all__ = [
    "__version__",
    "Tensor",
    "Parameter",
    "no_grad",
    "build_boundary_map",
    "fuse_heatmaps",
    "config_hash",
    "load_config",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "ProposalGenerator",
    "EvalConfig",
    "auc",
    "detection_map",
    "iou_1d",
    "recall_curve",
    "ProposalNet",
    "Proposal",
    "SuppressionConfig",
    "fuse_scores",
    "infer_video",
    "soft_nms",
    "derive_seed",
    "make_rng",
    "SamplerConfig",
    "rebalance_ratio",
    "scale_rebalance",
    "two_stage_sample",
    "ActionInstance",
    "VideoRecord",
    "Window",
    "gen_dataset",
    "gen_video",
    "make_windows",
    "TrainConfig",
    "TrainResult",
    "train",
]
