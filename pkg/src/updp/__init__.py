"""Unsupervised prompt learning for single-pass data pre-selection."""

from .augment import AugmentPolicy, make_views
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_from_dict, load_config
from .data import EmbeddingDataset, SynthConfig, load_dataset, save_dataset, synth_generate
from .evaluation import class_coverage, kl_balance, knn_accuracy, linear_probe
from .fusion import FrozenFuser, fuse, init_fuser
from .losses import LossBreakdown, assignment_entropy, cluster_contrastive, instance_loss, total_loss
from .model import ModelConfig, ModelState, forward, init_model, swap_prompt
from .pipeline import run_experiment
from .selection import (
    ClusterAssignment,
    SelectionResult,
    assign_clusters,
    select_confidence,
    select_kmeans_medoid,
    select_medoid,
    select_random,
)
from .trainer import TrainConfig, adam_step, train

__version__ = "0.1.0"
