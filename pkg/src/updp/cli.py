"""Command-line entry point: ``updp {synth,train,select,eval,run,gradcheck}``.

Exit status is 0 on success. On failure a JSON object
``{"error": <class name>, "message": <text>}`` is written to stderr and the
exit status is 1 (2 for usage errors, as argparse does).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_from_dict, load_config
from .data import save_dataset, synth_generate
from .errors import InvalidConfig, UpdpError
from .gradcheck import gradient_suite
from . import pipeline

GRADCHECK_TOL = 1e-4


def _config(args):
    cfg = load_config(args.config) if args.config else config_from_dict({"synth": {}})
    strategies = args.strategy.split(",") if getattr(args, "strategy", None) else None
    return cfg.with_overrides(seed=args.seed, out_dir=args.out, strategies=strategies,
                              checkpoint=getattr(args, "checkpoint", None))


def cmd_synth(args):
    cfg = _config(args)
    if cfg.synth is None:
        raise InvalidConfig("config has no 'synth' section")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = synth_generate(cfg.synth)
    save_dataset(ds, out / "dataset.emb")
    print(json.dumps({"path": str(out / "dataset.emb"), "count": ds.count, "dim": ds.dim, "views": ds.views}))


def cmd_train(args):
    cfg = _config(args)
    ds = pipeline.resolve_dataset(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, history = pipeline.train_stage(cfg, ds, out)
    save_checkpoint(model, out / "model.npz")
    pipeline.write_json(out / "history.json", history.to_dict())
    print(json.dumps({"checkpoint": str(out / "model.npz"), "checksum": history.checksum}))


def _model_for(cfg, ds):
    path = Path(cfg.checkpoint) if cfg.checkpoint else Path(cfg.out_dir) / "model.npz"
    if not any(s in pipeline.MODEL_STRATEGIES for s in cfg.strategies) and cfg.eval.feature_space == "raw":
        return None
    return load_checkpoint(path, expected_d_in=ds.dim)


def cmd_select(args):
    cfg = _config(args)
    ds = pipeline.resolve_dataset(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    selections = pipeline.select_stage(cfg, _model_for(cfg, ds), ds)
    pipeline.write_selections(out, selections)
    print(json.dumps({name: sel.indices for name, sel in selections.items()}))


def cmd_eval(args):
    cfg = _config(args)
    ds = pipeline.resolve_dataset(cfg)
    out = Path(cfg.out_dir)
    selections = pipeline.read_selections(out, cfg.strategies)
    model = _model_for(cfg, ds) if cfg.eval.feature_space == "fused" else None
    reports = pipeline.eval_stage(cfg, model, ds, selections)
    pipeline.write_reports(out, cfg, reports)
    print(json.dumps({name: rep.to_dict() for name, rep in reports.items()}, sort_keys=True))


def cmd_run(args):
    cfg = _config(args)
    reports, selections, _, _ = pipeline.run_experiment(cfg)
    summary = {name: {"indices": sel.indices} for name, sel in selections.items()}
    for name, rep in reports.items():
        summary[name].update(kl_balance=rep.kl_balance, class_coverage=rep.class_coverage,
                             knn_accuracy=rep.knn_accuracy, probe_accuracy=rep.probe_accuracy)
    print(json.dumps(summary, sort_keys=True))


def cmd_gradcheck(args):
    seed = args.seed or 0
    results = []
    for exclude_self in (False, True):
        for i, rep in enumerate(gradient_suite(args.cases, exclude_self=exclude_self, seed=seed)):
            results.append({"case": seed + i, "exclude_self": exclude_self,
                            "max_relative_error": rep.max_relative_error,
                            "worst_parameter_index": rep.worst_parameter_index})
    worst = max(r["max_relative_error"] for r in results)
    print(json.dumps({"tolerance": GRADCHECK_TOL, "max_relative_error": worst,
                      "passed": worst < GRADCHECK_TOL, "cases": results}, indent=2))
    return 0 if worst < GRADCHECK_TOL else 1


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "select": cmd_select,
    "eval": cmd_eval,
    "run": cmd_run,
    "gradcheck": cmd_gradcheck,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="updp", description="Unsupervised prompt learning for data pre-selection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--seed", type=int, default=None, help="top-level seed (overrides the config)")
        if name == "gradcheck":
            p.add_argument("--cases", type=int, default=20, help="random configurations per mode")
            continue
        p.add_argument("--config", type=str, default=None, help="experiment config (JSON)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        if name in ("select", "eval", "run"):
            p.add_argument("--strategy", type=str, default=None, help="comma-separated strategy names")
            p.add_argument("--checkpoint", type=str, default=None,
                           help="use this trained model instead of training (prompt generalization)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except (UpdpError, OSError, KeyError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
