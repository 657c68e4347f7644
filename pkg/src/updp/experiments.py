"""Desk-scale experiment harnesses: multi-seed selection quality, prompt transfer,
context-length ablation and budget scaling."""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy, base_features
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_from_dict
from .data import SynthConfig, synth_generate
from .evaluation import evaluate_selection, knn_accuracy
from .model import encode, init_model, swap_prompt
from .pipeline import run_experiment, select_stage
from .seeding import stream
from .trainer import TrainConfig, train

DESK_SYNTH = SynthConfig(num_classes=10, per_class=200, dim=32, separation=10.0, sigma=1.0)


def selection_quality(seed: int, synth: SynthConfig = DESK_SYNTH, budget: int = 20, epochs: int = 50,
                      strategies=("random", "confidence", "medoid-f", "medoid-z")) -> dict:
    """One seed of the balance/probe experiment; returns ``{strategy: EvalReport}``."""
    dataset = synth_generate(synth.with_seed(seed))
    cfg = ExperimentConfig(
        train=TrainConfig(epochs=epochs, num_clusters=budget, seed=seed),
        augment=AugmentPolicy(seed=seed), seed=seed, budget=budget, strategies=tuple(strategies),
    )
    model, _ = train(dataset, cfg.train, cfg.augment)
    selections = select_stage(cfg, model, dataset)
    feats = base_features(dataset)
    return {name: evaluate_selection(sel, feats, dataset.labels, dataset.num_classes)
            for name, sel in selections.items()}


def prompt_transfer(seed: int, synth: SynthConfig = DESK_SYNTH, epochs: int = 50, num_clusters: int = 20,
                    knn_k: int = 5) -> dict:
    """Train on dataset A, carry the prompt to dataset B through a checkpoint, compare KNN on B.

    KNN is fit on a seeded half of B and tested on the other half, for B's fused
    features under the learned prompt, under a freshly initialized prompt, and
    for the raw image features.
    """
    ds_a = synth_generate(synth.with_seed(2 * seed + 1000))
    ds_b = synth_generate(synth.with_seed(2 * seed + 1001))
    cfg = TrainConfig(epochs=epochs, num_clusters=num_clusters, seed=seed)
    model_a, _ = train(ds_a, cfg)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "a.npz"
        save_checkpoint(model_a, path)
        learned_prompt = load_checkpoint(path, expected_d_in=ds_b.dim).prompt
    fresh = init_model(cfg.model_config(ds_b.dim), seed + 10_000)
    learned = swap_prompt(fresh, learned_prompt)

    x = base_features(ds_b)
    perm = stream(seed, "eval").permutation(ds_b.count)
    fit, test = perm[: ds_b.count // 2], perm[ds_b.count // 2:]
    y = ds_b.labels

    def knn(F):
        return knn_accuracy(F[fit], y[fit], F[test], y[test], knn_k)

    return {
        "learned": knn(encode(learned, x)[0]),
        "fresh": knn(encode(fresh, x)[0]),
        "image": knn(x),
    }


def context_length_ablation(base: dict, lengths=(4, 16), out_root=None) -> dict:
    """Run the full pipeline once per context length; returns ``{length: reports}``."""
    results = {}
    for n in lengths:
        d = {**base, "train": {**base.get("train", {}), "context_length": n}}
        if out_root is not None:
            d["out_dir"] = str(Path(out_root) / f"ctx{n}")
        cfg = config_from_dict(d)
        reports, _, _, _ = run_experiment(cfg, write=out_root is not None)
        results[n] = reports
    return results


def budget_scaling(base: dict, budgets=(20, 30), out_root=None) -> dict:
    """Run the full pipeline per annotation budget (clusters follow the budget)."""
    results = {}
    for b in budgets:
        d = {**base, "budget": b, "train": {k: v for k, v in base.get("train", {}).items() if k != "num_clusters"}}
        if out_root is not None:
            d["out_dir"] = str(Path(out_root) / f"budget{b}")
        reports, _, _, _ = run_experiment(config_from_dict(d), write=out_root is not None)
        results[b] = reports
    return results


def summarize(per_seed: list[dict], metric: str) -> dict:
    """Mean of ``metric`` per strategy over a list of ``{strategy: EvalReport}``."""
    names = per_seed[0].keys()
    return {n: float(np.mean([getattr(r[n], metric) for r in per_seed])) for n in names}
