"""Plain-text dataset directory ingestion and writing.

Layout (UTF-8, LF):
    meta.json                 {"name": str, "n": int, "d0": int, "p": int}
    X.csv                     n lines of d0 comma-separated floats
    y.txt                     n lines, one integer label each
    edges.txt                 one "u v" pair per line, 0-indexed
    splits/split_<i>.json     {"train": [ids], "val": [ids], "test": [ids]}

The loader symmetrizes and deduplicates the edge list and validates that
split masks are disjoint and in range.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graphs import Graph, Split, SplitSet
from .sparse import SparseMatrix


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing dataset file: {path}")
    return path


def _mask_from_ids(ids, n: int, field: str) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise ValueError(f"split '{field}' has node ids out of range")
    if np.unique(ids).size != ids.size:
        raise ValueError(f"split '{field}' repeats node ids")
    m = np.zeros(n, dtype=bool)
    m[ids] = True
    return m


def load_dataset(path: str | Path) -> tuple[Graph, SplitSet]:
    root = Path(path)
    meta = json.loads(_require(root / "meta.json").read_text())
    n, d0, p = int(meta["n"]), int(meta["d0"]), int(meta["p"])
    name = str(meta.get("name", root.name))

    x = np.loadtxt(_require(root / "X.csv"), delimiter=",", dtype=np.float64,
                   ndmin=2)
    if x.shape != (n, d0):
        raise ValueError(f"X.csv is {x.shape}, meta says ({n}, {d0})")
    y = np.loadtxt(_require(root / "y.txt"), dtype=np.int64, ndmin=1)
    if y.shape != (n,):
        raise ValueError(f"y.txt has {y.shape[0]} labels, meta says {n}")
    if y.size and (y.min() < 0 or y.max() >= p):
        raise ValueError("label out of range [0, p)")

    raw = np.loadtxt(_require(root / "edges.txt"), dtype=np.int64, ndmin=2)
    if raw.size == 0:
        raw = raw.reshape(0, 2)
    if raw.shape[1] != 2:
        raise ValueError("edges.txt lines must be 'u v' pairs")
    if raw.size and (raw.min() < 0 or raw.max() >= n):
        raise ValueError("edge endpoint out of range")
    u = np.concatenate([raw[:, 0], raw[:, 1]])
    v = np.concatenate([raw[:, 1], raw[:, 0]])
    adj = SparseMatrix.from_edges(n, n, u, v, dedupe=True)
    graph = Graph(name=name, x=x, y=y, adj=adj, p=p)

    splits = []
    splits_dir = root / "splits"
    if splits_dir.is_dir():
        files = sorted(splits_dir.glob("split_*.json"),
                       key=lambda f: int(f.stem.split("_")[1]))
        for f in files:
            rec = json.loads(f.read_text())
            try:
                splits.append(Split(
                    train=_mask_from_ids(rec["train"], n, "train"),
                    val=_mask_from_ids(rec["val"], n, "val"),
                    test=_mask_from_ids(rec["test"], n, "test"),
                ))
            except ValueError as e:
                if "overlap" in str(e):
                    raise ValueError(f"{f.name}: split masks overlap") from e
                raise ValueError(f"{f.name}: {e}") from e
    return graph, SplitSet(splits)


def save_dataset(root: str | Path, graph: Graph, splits: SplitSet | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"name": graph.name, "n": graph.n, "d0": graph.d0, "p": graph.p}
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    with open(root / "X.csv", "w") as fh:
        for row in graph.x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(root / "y.txt", "w") as fh:
        fh.writelines(f"{int(c)}\n" for c in graph.y)
    rows, cols, _ = graph.adj.coo()
    with open(root / "edges.txt", "w") as fh:
        for a, b in zip(rows, cols):
            if a <= b:  # one line per undirected edge
                fh.write(f"{a} {b}\n")

    if splits is not None:
        sdir = root / "splits"
        sdir.mkdir(exist_ok=True)
        for i, s in enumerate(splits.splits):
            rec = {
                "train": np.flatnonzero(s.train).tolist(),
                "val": np.flatnonzero(s.val).tolist(),
                "test": np.flatnonzero(s.test).tolist(),
            }
            (sdir / f"split_{i}.json").write_text(json.dumps(rec) + "\n")
    return root
