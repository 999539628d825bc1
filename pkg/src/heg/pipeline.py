"""End-to-end orchestration and machine-readable reports.

Stages compose through files: ``search`` writes checkpoints and genotypes,
``select`` re-derives genotypes from a checkpoint (optionally for all four
selection criteria at once), ``tune`` finds hyperparameters for a genotype,
``eval`` trains it from scratch across splits and reports mean accuracy.
Every report echoes its full configuration; all randomness flows from the
declared seeds through labeled streams, so any stage can be re-run alone.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .datasets import load_dataset, save_dataset
from .genotype import Genotype
from .graphs import (Graph, SplitSet, generate_splits, node_homophily,
                     sbm_generate)
from .ops import catalog
from .rng import stream
from .select import select_baseline, select_heterophily
from .shrink import ShrinkPlan, progressive_train
from .supernet import SearchConfig, Supernet
from .train import Hyperparams, HyperparamSpace, accuracy, evaluate_splits, tune

ABLATION_CRITERIA = ("hete_argmin", "hete_argmax", "argmax_alpha", "val_loss")


@dataclasses.dataclass
class RunConfig:
    """Everything a multi-stage run needs; mirrors the JSON config file."""
    dataset: str = ""
    out: str = "runs/out"
    seeds: list[int] = dataclasses.field(default_factory=lambda: [0])
    search: dict = dataclasses.field(default_factory=dict)
    selection: dict = dataclasses.field(default_factory=dict)
    tune: dict = dataclasses.field(default_factory=dict)
    evaluate: dict = dataclasses.field(default_factory=dict)
    split_index: int = 0
    ablation: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds list must be nonempty")
        SearchConfig.from_dict({**self.search, "seed": 0})  # validate early

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def write_json(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def report_skeleton(stage: str, config_echo: dict) -> dict:
    return {"tool": {"name": "heg", "version": __version__},
            "stage": stage, "config": config_echo}


# ---------------------------------------------------------------------------
# stats & synthetic data

def cmd_stats(dataset: str | Path) -> dict:
    graph, splits = load_dataset(dataset)
    return {
        "name": graph.name,
        "nodes": graph.n,
        "edges": graph.num_undirected_edges(),
        "features": graph.d0,
        "classes": graph.p,
        "node_homophily": round(node_homophily(graph), 6),
        "splits": len(splits),
    }


def _mixing_matrix(spec: dict, p: int) -> np.ndarray:
    if "matrix" in spec:
        return np.asarray(spec["matrix"], dtype=np.float64)
    intra, inter = float(spec["intra"]), float(spec["inter"])
    return np.full((p, p), inter) + np.eye(p) * (intra - inter)


def cmd_synth(spec: dict, out: str | Path) -> dict:
    """Generate an SBM dataset directory with stratified splits."""
    class_sizes = [int(s) for s in spec["class_sizes"]]
    p = len(class_sizes)
    seed = int(spec.get("seed", 0))
    mixing = _mixing_matrix(spec["mixing"], p)
    feats = spec.get("features", {})
    d0 = int(feats.get("dim", 16))
    sigma = float(feats.get("sigma", 1.0))
    if "means" in feats:
        means = np.asarray(feats["means"], dtype=np.float64)
    else:
        scale = float(feats.get("mean_scale", 1.0))
        means = scale * stream(seed, "sbm/means").normal(size=(p, d0))
    graph = sbm_generate(class_sizes, mixing, means, sigma, seed,
                         name=str(spec.get("name", "sbm")))
    split_spec = spec.get("splits", {})
    splits = generate_splits(
        graph,
        ratios=tuple(split_spec.get("ratios", (0.48, 0.32, 0.20))),
        count=int(split_spec.get("count", 10)),
        seed=int(split_spec.get("seed", seed)))
    save_dataset(out, graph, splits)
    return {"out": str(out), "nodes": graph.n, "edges": graph.num_undirected_edges(),
            "classes": p, "node_homophily": round(node_homophily(graph), 6),
            "splits": len(splits)}


# ---------------------------------------------------------------------------
# search / select

def _select_with(net: Supernet, criterion: str, split, seed: int,
                 node_set: str, fine_tune_epochs: int = 0):
    if criterion in ("hete_argmin", "hete_argmax", "hete"):
        direction = "argmax" if criterion.endswith("argmax") else "argmin"
        return select_heterophily(net, split, seed=seed, direction=direction,
                                  node_set=node_set,
                                  fine_tune_epochs=fine_tune_epochs)
    return select_baseline(net, criterion, split, seed=seed,
                           fine_tune_epochs=fine_tune_epochs)


def run_ablation(checkpoint: str | Path, graph: Graph, split, seed: int = 0,
                 node_set: str = "train_val") -> dict[str, dict]:
    """All four selection criteria applied to one compact checkpoint."""
    doc = json.loads(Path(checkpoint).read_text())
    out: dict[str, dict] = {}
    for criterion in ABLATION_CRITERIA:
        net, _ = Supernet.restore(doc, graph)
        geno, report = _select_with(net, criterion, split, seed, node_set)
        out[criterion] = {"genotype": geno.to_dict(),
                          "selection_report": report.to_dict()}
    return out


def cmd_search(cfg: RunConfig) -> dict:
    graph, splits = load_dataset(cfg.dataset)
    if not len(splits):
        raise ValueError("dataset has no splits; search needs train/val masks")
    split = splits[cfg.split_index]
    out = Path(cfg.out)
    sel = dict(cfg.selection)
    criterion = sel.get("criterion", "hete")
    direction = sel.get("direction", "argmin")
    if criterion == "hete":
        criterion = f"hete_{direction}"
    sel_seed = int(sel.get("seed", 0))
    node_set = sel.get("node_set", "train_val")
    fine_tune_epochs = int(sel.get("fine_tune_epochs", 0))

    report = report_skeleton("search", cfg.to_dict())
    report["dataset"] = {"name": graph.name, "nodes": graph.n,
                         "classes": graph.p}
    runs = []
    best = None
    for seed in cfg.seeds:
        entry: dict[str, Any] = {"seed": seed}
        t0 = time.perf_counter()
        try:
            scfg = SearchConfig.from_dict({**cfg.search, "seed": seed})
            net = Supernet.build(graph, scfg)
            net, log, _ = progressive_train(net, ShrinkPlan.from_config(scfg),
                                            split)
            logits = net.forward(scfg.tau_min, "expectation")
            val_acc = accuracy(logits.data, graph.y, split.val)
            active_counts = {e.edge_id: len(e.candidates) for e in net.edges()}
            seed_dir = out / f"seed={seed}"
            seed_dir.mkdir(parents=True, exist_ok=True)
            ck_path = seed_dir / "checkpoint.json"
            net.save(ck_path, epoch=scfg.total_epochs,
                     extra={"shrink_log": log.to_dict(),
                            "split_index": cfg.split_index})
            write_json(seed_dir / "shrink_log.json", log.to_dict())
            geno, sel_report = _select_with(net, criterion, split, sel_seed,
                                            node_set, fine_tune_epochs)
            geno.seed = seed
            geno.save(seed_dir / "genotype.json")
            write_json(seed_dir / "selection_report.json", sel_report.to_dict())
            entry.update({
                "val_accuracy": val_acc,
                "genotype": geno.to_dict(),
                "checkpoint": str(ck_path),
                "active_counts": active_counts,
                "seconds": round(time.perf_counter() - t0, 3),
            })
        except Exception as exc:  # recorded per seed; rerun stays reproducible
            entry["error"] = {"type": type(exc).__name__, "message": str(exc)}
            entry["seconds"] = round(time.perf_counter() - t0, 3)
        runs.append(entry)
        if "error" not in entry:
            better = (best is None or entry["val_accuracy"] > best["val_accuracy"]
                      or (entry["val_accuracy"] == best["val_accuracy"]
                          and entry["seed"] < best["seed"]))
            if better:
                best = entry
    if best is None:
        raise RuntimeError("search failed for every seed: "
                           + json.dumps([r.get("error") for r in runs]))
    for r in runs:
        r["best"] = r is best
    report["runs"] = runs
    report["best_seed"] = best["seed"]
    write_json(out / "best_genotype.json", best["genotype"])

    if cfg.ablation:
        abl = run_ablation(best["checkpoint"], graph, split, sel_seed, node_set)
        for crit, payload in abl.items():
            write_json(out / "ablation" / crit / "genotype.json",
                       payload["genotype"])
            write_json(out / "ablation" / crit / "selection_report.json",
                       payload["selection_report"])
        report["ablation"] = {crit: payload["genotype"]
                              for crit, payload in abl.items()}
    write_json(out / "search_report.json", report)
    return report


def cmd_select(checkpoint: str | Path, dataset: str | Path, out: str | Path,
               criterion: str = "hete_argmin", seed: int = 0,
               node_set: str = "train_val", split_index: int = 0,
               ablation: bool = False, fine_tune_epochs: int = 0) -> dict:
    graph, splits = load_dataset(dataset)
    split = splits[split_index]
    out = Path(out)
    report = report_skeleton("select", {
        "checkpoint": str(checkpoint), "dataset": str(dataset),
        "criterion": criterion, "seed": seed, "node_set": node_set,
        "split_index": split_index, "ablation": ablation})
    if ablation:
        abl = run_ablation(checkpoint, graph, split, seed, node_set)
        for crit, payload in abl.items():
            write_json(out / "ablation" / crit / "genotype.json",
                       payload["genotype"])
            write_json(out / "ablation" / crit / "selection_report.json",
                       payload["selection_report"])
        report["criteria"] = abl
    else:
        net, _ = Supernet.load(checkpoint, graph)
        geno, sel_report = _select_with(net, criterion, split, seed, node_set,
                                        fine_tune_epochs)
        geno.save(out / "genotype.json")
        write_json(out / "selection_report.json", sel_report.to_dict())
        report["genotype"] = geno.to_dict()
        report["selection_report"] = sel_report.to_dict()
    write_json(out / "select_report.json", report)
    return report


# ---------------------------------------------------------------------------
# tune / train / eval

def cmd_tune(genotype_path: str | Path, dataset: str | Path, out: str | Path,
             iters: int = 100, seed: int = 0, split_index: int = 0,
             max_epochs: int = 1000, patience: int = 100) -> dict:
    graph, splits = load_dataset(dataset)
    geno = Genotype.load(genotype_path)
    t0 = time.perf_counter()
    best_hp, trials = tune(graph, geno, splits[split_index], iters, seed,
                           max_epochs=max_epochs, patience=patience)
    report = report_skeleton("tune", {
        "genotype": geno.to_dict(), "dataset": str(dataset), "iters": iters,
        "seed": seed, "split_index": split_index, "max_epochs": max_epochs,
        "patience": patience})
    report["best"] = best_hp.to_dict()
    report["trials"] = trials
    report["seconds"] = round(time.perf_counter() - t0, 3)
    out = Path(out)
    write_json(out / "tune_report.json", report)
    if trials:
        with open(out / "trials.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(trials[0].keys()))
            writer.writeheader()
            writer.writerows(trials)
    return report


def _hyper_from(doc: dict | None) -> Hyperparams:
    return Hyperparams.from_dict(doc) if doc else Hyperparams()


def cmd_train(genotype_path: str | Path, dataset: str | Path, out: str | Path,
              hyper: dict | None = None, seed: int = 0, split_index: int = 0,
              max_epochs: int = 1000, patience: int = 100) -> dict:
    """Train once on a single split (a debugging view of cmd_eval)."""
    from .train import train_genotype

    graph, splits = load_dataset(dataset)
    geno = Genotype.load(genotype_path)
    hp = _hyper_from(hyper)
    t0 = time.perf_counter()
    res = train_genotype(graph, geno, splits[split_index], hp, seed,
                         scope=f"split={split_index}", max_epochs=max_epochs,
                         patience=patience)
    report = report_skeleton("train", {
        "genotype": geno.to_dict(), "dataset": str(dataset),
        "hyperparams": hp.to_dict(), "seed": seed, "split_index": split_index,
        "max_epochs": max_epochs, "patience": patience})
    report["result"] = res.to_dict()
    report["seconds"] = round(time.perf_counter() - t0, 3)
    write_json(Path(out) / "train_report.json", report)
    return report


def cmd_eval(genotype_path: str | Path, dataset: str | Path, out: str | Path,
             hyper: dict | None = None, seed: int = 0,
             max_epochs: int = 1000, patience: int = 100,
             n_splits: int | None = None) -> dict:
    """Train from scratch on every split and report mean/std test accuracy."""
    graph, splits = load_dataset(dataset)
    if not len(splits):
        raise ValueError("dataset has no splits")
    use = splits.splits if n_splits is None else splits.splits[:n_splits]
    geno = Genotype.load(genotype_path)
    hp = _hyper_from(hyper)
    t0 = time.perf_counter()
    record = evaluate_splits(graph, geno, use, hp, seed,
                             max_epochs=max_epochs, patience=patience)
    report = report_skeleton("eval", {
        "genotype": geno.to_dict(), "dataset": str(dataset),
        "hyperparams": hp.to_dict(), "seed": seed,
        "max_epochs": max_epochs, "patience": patience,
        "n_splits": len(use)})
    report["stopping_rule"] = {
        "kind": "early-stop on validation accuracy",
        "patience": patience, "max_epochs": max_epochs,
        "note": "stopping rule is a local choice, not an external protocol",
    }
    report["node_homophily"] = round(node_homophily(graph), 6)
    report.update(record)
    report["seconds"] = round(time.perf_counter() - t0, 3)
    out = Path(out)
    write_json(out / "report.json", report)
    with open(out / "per_split.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["split", "val_acc", "test_acc",
                                                "best_epoch", "epochs_run",
                                                "diverged"])
        writer.writeheader()
        for i, row in enumerate(record["per_split"]):
            writer.writerow({"split": i, **row})
    return report


def cmd_ops(d1: int = 64, n_layers: int = 3) -> list[dict]:
    return catalog(d1, n_layers)
