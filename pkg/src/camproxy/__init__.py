"""Camera-aware proxy pseudo-label training for unsupervised re-identification.

The package alternates a clustering step (mutual-neighbor Jaccard distance,
density clustering, camera-aware proxy splitting) with a model updating step
(proxy memory bank, intra- and inter-camera contrastive losses,
proxy-balanced batches) and evaluates retrieval with CMC/mAP.
"""

from .clustering import dbscan, filter_reliable
from .data import (
    ClusterAssignment,
    FeatureDataset,
    LoadError,
    ProxyLabeling,
    l2_normalize_rows,
    load_dataset,
    save_dataset,
)
from .encoder import AffineEncoder, TanhEncoder, load_encoder, save_encoder
from .evaluate import EvalResult, evaluate, label_quality
from .losses import LossOutput, baseline_loss, inter_loss, intra_loss, total_loss
from .memory import ProxyMemory, init_memory, scores, update_entry
from .metric import DistanceMatrix, jaccard_distance, k_reciprocal_sets, pairwise_euclidean
from .proxies import cluster_labeling, hard_negative_set, positive_set, split_by_camera
from .sampler import BatchPlan, plan_epoch
from .synth import SynthSpec, generate
from .train import TrainConfig, TrainReport, lr_at, run_training

__all__ = [
    "AffineEncoder",
    "BatchPlan",
    "ClusterAssignment",
    "DistanceMatrix",
    "EvalResult",
    "FeatureDataset",
    "LoadError",
    "LossOutput",
    "ProxyLabeling",
    "ProxyMemory",
    "SynthSpec",
    "TanhEncoder",
    "TrainConfig",
    "TrainReport",
    "baseline_loss",
    "cluster_labeling",
    "dbscan",
    "evaluate",
    "filter_reliable",
    "generate",
    "hard_negative_set",
    "init_memory",
    "inter_loss",
    "intra_loss",
    "jaccard_distance",
    "k_reciprocal_sets",
    "l2_normalize_rows",
    "label_quality",
    "load_dataset",
    "load_encoder",
    "lr_at",
    "pairwise_euclidean",
    "plan_epoch",
    "positive_set",
    "run_training",
    "save_dataset",
    "save_encoder",
    "scores",
    "split_by_camera",
    "total_loss",
    "update_entry",
]

__version__ = "0.1.0"
