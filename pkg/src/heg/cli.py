"""Command-line entry point.

Subcommands: stats, synth, search, select, tune, train, eval, ops.
Results print as JSON on stdout; failures print a machine-readable error
record on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import pipeline


def _read_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _read_hyper(path: str) -> dict:
    doc = _read_json(path)
    # Accept either a bare hyperparameter block or a full tune report,
    # whose chosen settings live under "best".
    if isinstance(doc.get("best"), dict):
        doc = doc["best"]
    return doc


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="heg",
        description="heterophily-aware graph architecture search")
    top.add_argument("--version", action="version", version=f"heg {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("dataset", help="dataset directory")

    p = sub.add_parser("synth", help="generate a synthetic SBM dataset")
    p.add_argument("--config", required=True, help="JSON generation spec")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")

    p = sub.add_parser("search", help="supernet search + selection")
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="replace the config's seed list with one seed")

    p = sub.add_parser("select", help="re-select from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--criterion", default="hete_argmin",
                   choices=["hete_argmin", "hete_argmax", "argmax_alpha",
                            "val_loss"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-index", type=int, default=0)
    p.add_argument("--node-set", default="train_val",
                   choices=["train_val", "train", "all"])
    p.add_argument("--ablation", action="store_true",
                   help="run all four selection criteria")

    p = sub.add_parser("tune", help="random hyperparameter search")
    p.add_argument("--genotype", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-index", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=100)

    for name, extra in (("train", "train once on one split"),
                        ("eval", "train/evaluate across splits")):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--genotype", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--hyper", default=None,
                       help="JSON file of hyperparameters (tune 'best' block)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-epochs", type=int, default=1000)
        p.add_argument("--patience", type=int, default=100)
        if name == "train":
            p.add_argument("--split-index", type=int, default=0)
        else:
            p.add_argument("--n-splits", type=int, default=None)

    p = sub.add_parser("ops", help="operation catalog")
    p.add_argument("action", nargs="?", default="list", choices=["list"])
    p.add_argument("--d1", type=int, default=64)
    p.add_argument("--layers", type=int, default=3)
    return top


def _dispatch(args: argparse.Namespace) -> dict | list:
    if args.command == "stats":
        return pipeline.cmd_stats(args.dataset)
    if args.command == "synth":
        spec = _read_json(args.config)
        if args.seed is not None:
            spec["seed"] = args.seed
        return pipeline.cmd_synth(spec, args.out)
    if args.command == "search":
        doc = _read_json(args.config)
        if args.out is not None:
            doc["out"] = args.out
        if args.seed is not None:
            doc["seeds"] = [args.seed]
        return pipeline.cmd_search(pipeline.RunConfig.from_dict(doc))
    if args.command == "select":
        return pipeline.cmd_select(
            args.checkpoint, args.dataset, args.out, criterion=args.criterion,
            seed=args.seed, node_set=args.node_set,
            split_index=args.split_index, ablation=args.ablation)
    if args.command == "tune":
        return pipeline.cmd_tune(
            args.genotype, args.dataset, args.out, iters=args.iters,
            seed=args.seed, split_index=args.split_index,
            max_epochs=args.max_epochs, patience=args.patience)
    if args.command == "train":
        hyper = _read_hyper(args.hyper) if args.hyper else None
        return pipeline.cmd_train(
            args.genotype, args.dataset, args.out, hyper=hyper,
            seed=args.seed, split_index=args.split_index,
            max_epochs=args.max_epochs, patience=args.patience)
    if args.command == "eval":
        hyper = _read_hyper(args.hyper) if args.hyper else None
        return pipeline.cmd_eval(
            args.genotype, args.dataset, args.out, hyper=hyper,
            seed=args.seed, max_epochs=args.max_epochs,
            patience=args.patience, n_splits=args.n_splits)
    if args.command == "ops":
        return pipeline.cmd_ops(args.d1, args.layers)
    raise ValueError(f"unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        result = _dispatch(args)
    except Exception as exc:
        record = {"error": {"type": type(exc).__name__, "message": str(exc),
                            "command": args.command}}
        print(json.dumps(record), file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
