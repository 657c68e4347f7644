"""Experiment configuration: a JSON document with a fixed schema.

Top-level keys (all optional except where noted)::

    {
      "seed": 0,                      # drives every random stream
      "dataset": "path/to/file.emb",  # or
      "synth": {SynthConfig fields},
      "train": {TrainConfig fields},
      "model": {"d_w", "d_h", "d_z", "d_hidden", "fuser_seed"},
      "augment": {"kind", "noise_sigma", "drop_prob"},
      "budget": 200,
      "strategies": ["random", "confidence", "medoid-f", "medoid-z"],
      "eval": {"knn_k", "feature_space", "probe": {ProbeConfig fields}},
      "out_dir": "out",
      "checkpoint": null,             # load this model instead of training
      "save_checkpoint": true,
      "checkpoint_every_epoch": false
    }

Unknown keys anywhere raise :class:`~updp.errors.InvalidConfig`. Seeds inside
sections are optional overrides of the top-level seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .augment import AugmentPolicy
from .data import SynthConfig
from .errors import InvalidConfig, IoError
from .evaluation import ProbeConfig
from .selection import STRATEGIES
from .trainer import TrainConfig

MODEL_KEYS = ("d_w", "d_h", "d_z", "d_hidden", "fuser_seed")
FEATURE_SPACES = ("raw", "fused")


@dataclass(frozen=True)
class EvalSettings:
    knn_k: int = 5
    feature_space: str = "raw"
    probe: ProbeConfig = field(default_factory=ProbeConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig
    augment: AugmentPolicy = AugmentPolicy()
    seed: int = 0
    dataset: str | None = None
    synth: SynthConfig | None = None
    budget: int = 200
    strategies: tuple = ("random", "confidence", "medoid-f", "medoid-z")
    eval: EvalSettings = EvalSettings()
    out_dir: str = "out"
    checkpoint: str | None = None
    save_checkpoint: bool = True
    checkpoint_every_epoch: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategies"] = list(self.strategies)
        return d

    def with_overrides(self, seed=None, out_dir=None, strategies=None, checkpoint=None) -> ExperimentConfig:
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, train=replace(cfg.train, seed=seed),
                          augment=replace(cfg.augment, seed=seed),
                          synth=cfg.synth.with_seed(seed) if cfg.synth else None)
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        if strategies is not None:
            cfg = replace(cfg, strategies=_strategies(strategies))
        if checkpoint is not None:
            cfg = replace(cfg, checkpoint=str(checkpoint))
        return cfg


def _build(cls, data, where, allowed=None, **fixed):
    if not isinstance(data, dict):
        raise InvalidConfig(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)} if allowed is None else set(allowed)
    unknown = sorted(set(data) - names)
    if unknown:
        raise InvalidConfig(f"{where}: unknown keys {unknown}")
    try:
        return cls(**{**data, **fixed})
    except TypeError as exc:
        raise InvalidConfig(f"{where}: {exc}") from exc


def _strategies(names):
    names = tuple(names)
    bad = [n for n in names if n not in STRATEGIES]
    if bad or not names:
        raise InvalidConfig(f"strategies must be a nonempty subset of {STRATEGIES}, got {list(names)}")
    return names


TOP_KEYS = {f.name for f in fields(ExperimentConfig)} | {"model"}


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise InvalidConfig("config must be a JSON object")
    unknown = sorted(set(d) - TOP_KEYS)
    if unknown:
        raise InvalidConfig(f"unknown top-level keys {unknown}")
    seed = int(d.get("seed", 0))
    budget = int(d.get("budget", 200))
    if budget < 1:
        raise InvalidConfig("budget must be >= 1")

    train_d = dict(d.get("train", {}))
    model_d = d.get("model", {})
    bad_model = sorted(set(model_d) - set(MODEL_KEYS))
    if bad_model:
        raise InvalidConfig(f"model: unknown keys {bad_model}")
    overlap = sorted(set(model_d) & set(train_d))
    if overlap:
        raise InvalidConfig(f"keys {overlap} given in both 'train' and 'model'")
    train_d.update(model_d)
    train_d.setdefault("seed", seed)
    if train_d.get("num_clusters") is None:
        train_d["num_clusters"] = budget
    train = _build(TrainConfig, train_d, "train")
    train.validate()

    aug_d = dict(d.get("augment", {}))
    aug_d.setdefault("seed", seed)
    augment = _build(AugmentPolicy, aug_d, "augment")
    augment.validate()

    synth = None
    if d.get("synth") is not None:
        synth_d = dict(d["synth"])
        synth_d.setdefault("seed", seed)
        synth = _build(SynthConfig, synth_d, "synth")
        synth.validate()
    dataset = d.get("dataset")
    if dataset is None and synth is None and d.get("checkpoint") is None:
        raise InvalidConfig("one of 'dataset' or 'synth' is required")

    eval_d = dict(d.get("eval", {}))
    probe = _build(ProbeConfig, eval_d.pop("probe", {}), "eval.probe")
    ev = _build(EvalSettings, eval_d, "eval", allowed=("knn_k", "feature_space"), probe=probe)
    if ev.feature_space not in FEATURE_SPACES:
        raise InvalidConfig(f"eval.feature_space must be one of {FEATURE_SPACES}")
    if ev.knn_k < 1:
        raise InvalidConfig("eval.knn_k must be >= 1")

    return ExperimentConfig(
        train=train, augment=augment, seed=seed, dataset=dataset, synth=synth, budget=budget,
        strategies=_strategies(d.get("strategies", ExperimentConfig.strategies)), eval=ev,
        out_dir=str(d.get("out_dir", "out")), checkpoint=d.get("checkpoint"),
        save_checkpoint=bool(d.get("save_checkpoint", True)),
        checkpoint_every_epoch=bool(d.get("checkpoint_every_epoch", False)),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw)
