"""Train -> assign -> select -> evaluate, writing JSON artifacts to an output directory."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .augment import base_features
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .data import EmbeddingDataset, load_dataset, synth_generate
from .errors import BudgetExceedsDataset, InvalidConfig
from .evaluation import evaluate_selection
from .model import ModelState, encode
from .selection import ClusterAssignment, SelectionResult, run_strategy
from .trainer import TrainHistory, train

log = logging.getLogger(__name__)

MODEL_STRATEGIES = {"confidence", "medoid-f", "medoid-z", "kmeans-m"}


def _needs_model(cfg: ExperimentConfig) -> bool:
    return cfg.eval.feature_space == "fused" or any(s in MODEL_STRATEGIES for s in cfg.strategies)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def resolve_dataset(cfg: ExperimentConfig) -> EmbeddingDataset:
    if cfg.dataset is not None:
        return load_dataset(cfg.dataset)
    if cfg.synth is not None:
        return synth_generate(cfg.synth)
    raise InvalidConfig("config names neither a dataset file nor a synth section")


def train_stage(cfg: ExperimentConfig, dataset: EmbeddingDataset, out_dir: Path | None = None):
    """Train (or load, when ``cfg.checkpoint`` is set) the model."""
    if cfg.checkpoint is not None:
        log.info("loading model from %s", cfg.checkpoint)
        return load_checkpoint(cfg.checkpoint, expected_d_in=dataset.dim), TrainHistory()
    hook = None
    if out_dir is not None and cfg.checkpoint_every_epoch:
        def hook(epoch, model, history):
            save_checkpoint(model, out_dir / f"model_epoch{epoch:04d}.npz")
    model, history = train(dataset, cfg.train, cfg.augment, on_epoch_end=hook)
    if history.losses:
        log.info("trained %d epochs: total loss %.4f -> %.4f", len(history.losses),
                 history.losses[0].total, history.losses[-1].total)
    return model, history


def select_stage(cfg: ExperimentConfig, model: ModelState | None, dataset: EmbeddingDataset) -> dict:
    encoded = assignment = None
    if any(s in MODEL_STRATEGIES for s in cfg.strategies):
        if model is None:
            raise InvalidConfig("model-based strategies requested without a model")
        encoded = encode(model, base_features(dataset))
        assignment = ClusterAssignment.from_soft(encoded[2].astype(np.float64))
    return {
        name: run_strategy(name, model, dataset, cfg.budget, cfg.seed, assignment=assignment, encoded=encoded)
        for name in cfg.strategies
    }


def eval_features(cfg: ExperimentConfig, model: ModelState | None, dataset: EmbeddingDataset):
    feats = base_features(dataset)
    if cfg.eval.feature_space == "fused":
        if model is None:
            raise InvalidConfig("eval.feature_space='fused' needs a model")
        return encode(model, feats)[0]
    return feats


def eval_stage(cfg: ExperimentConfig, model: ModelState | None, dataset: EmbeddingDataset,
               selections: dict) -> dict:
    if not dataset.has_labels:
        log.info("dataset has no labels; skipping evaluation")
        return {}
    feats = eval_features(cfg, model, dataset)
    return {
        name: evaluate_selection(sel, feats, dataset.labels, dataset.num_classes,
                                 cfg.eval.knn_k, cfg.eval.probe)
        for name, sel in selections.items()
    }


def write_selections(out_dir: Path, selections: dict) -> None:
    for name, sel in selections.items():
        write_json(out_dir / f"selection_{name}.json", sel.to_dict())


def read_selections(out_dir: Path, strategies) -> dict:
    out = {}
    for name in strategies:
        path = Path(out_dir) / f"selection_{name}.json"
        out[name] = SelectionResult.from_dict(json.loads(path.read_text()))
    return out


def write_reports(out_dir: Path, cfg: ExperimentConfig, reports: dict) -> None:
    for name, rep in reports.items():
        write_json(out_dir / f"report_{name}.json", rep.to_dict())
    echo = cfg.to_dict()
    echo.pop("out_dir")  # reports must not depend on where they are written
    write_json(out_dir / "report.json", {
        "config": echo,
        "reports": {name: rep.to_dict() for name, rep in reports.items()},
    })


def run_experiment(cfg: ExperimentConfig, dataset: EmbeddingDataset | None = None, write: bool = True):
    """Full pipeline. Returns ``(reports, selections, model, history)``.

    Artifacts in ``cfg.out_dir``: ``selection_<strategy>.json``,
    ``report_<strategy>.json`` and ``report.json`` (byte-stable for a given
    config), ``history.json`` (includes wall times) and ``model.npz``.
    """
    dataset = dataset if dataset is not None else resolve_dataset(cfg)
    if cfg.budget > dataset.count:
        raise BudgetExceedsDataset(f"budget {cfg.budget} exceeds dataset size {dataset.count}")
    out_dir = Path(cfg.out_dir)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.checkpoint is None and not _needs_model(cfg):
        model, history = None, TrainHistory()
    else:
        model, history = train_stage(cfg, dataset, out_dir if write else None)
    selections = select_stage(cfg, model, dataset)
    reports = eval_stage(cfg, model, dataset, selections)
    if write:
        write_selections(out_dir, selections)
        write_reports(out_dir, cfg, reports)
        write_json(out_dir / "history.json", history.to_dict())
        if model is not None and cfg.save_checkpoint and cfg.checkpoint is None:
            save_checkpoint(model, out_dir / "model.npz")
    return reports, selections, model, history
