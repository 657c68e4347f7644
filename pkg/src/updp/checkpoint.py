"""Model checkpoints as ``.npz`` archives with a JSON metadata entry."""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .errors import DimMismatch, IoError, VersionMismatch
from .fusion import WEIGHT_NAMES, FrozenFuser
from .model import MlpHead, ModelConfig, ModelState

FORMAT_VERSION = 1


def save_checkpoint(model: ModelState, path) -> None:
    meta = {
        "version": FORMAT_VERSION,
        "config": asdict(model.config),
        "rng_seed": model.rng_seed,
        "fuser": {"seed": model.fuser.seed, "d_in": model.fuser.d_in, "d_w": model.fuser.d_w,
                  "d_h": model.fuser.d_h, "attention_temperature": model.fuser.attention_temperature},
    }
    arrays = dict(model.parameters())
    arrays.update({f"fuser.{k}": model.fuser.weights[k] for k in WEIGHT_NAMES})
    try:
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
                     **arrays)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_checkpoint(path, expected_d_in: int | None = None) -> ModelState:
    try:
        archive = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    with archive:
        if "__meta__" not in archive:
            raise VersionMismatch(f"{path}: missing checkpoint metadata")
        meta = json.loads(archive["__meta__"].tobytes().decode())
        if meta.get("version") != FORMAT_VERSION:
            raise VersionMismatch(f"{path}: checkpoint version {meta.get('version')}, expected {FORMAT_VERSION}")
        arrays = {k: archive[k] for k in archive.files if k != "__meta__"}
    cfg = ModelConfig(**meta["config"])
    if expected_d_in is not None and cfg.d_in != expected_d_in:
        raise DimMismatch(f"checkpoint expects d_in={cfg.d_in}, data has d_in={expected_d_in}")
    weights = {}
    for k in WEIGHT_NAMES:
        w = arrays[f"fuser.{k}"]
        w.flags.writeable = False
        weights[k] = w
    f = meta["fuser"]
    fuser = FrozenFuser(f["seed"], f["d_in"], f["d_w"], f["d_h"], weights, f["attention_temperature"])
    heads = [MlpHead(*(arrays[f"{prefix}.{n}"] for n in MlpHead.PARAMS)) for prefix in ("instance", "cluster")]
    return ModelState(cfg, arrays["prompt"], fuser, heads[0], heads[1], meta["rng_seed"])
