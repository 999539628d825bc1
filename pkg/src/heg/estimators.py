"""Estimator-style facade over search and training.

Transductive estimators in the scikit-learn idiom: constructor takes plain
hyperparameters, ``fit`` consumes a Graph plus a Split, learned state lands
in trailing-underscore attributes, and ``get_params``/``set_params`` make
instances clone-compatible. The heavy lifting lives in the core modules;
these classes only adapt the calling convention.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .genotype import Genotype
from .graphs import Graph, Split, build_khop
from .select import select_baseline, select_heterophily
from .shrink import ShrinkPlan, progressive_train
from .supernet import SearchConfig, Supernet
from .train import Hyperparams, accuracy, train_genotype
from .sparse import SparseMatrix


def as_graph(x, edges, y, name: str = "graph", p: int | None = None) -> Graph:
    """Build a validated Graph from raw arrays.

    ``edges`` is either an (m, 2) array of undirected pairs (symmetrized and
    deduplicated here) or an existing SparseMatrix adjacency.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if isinstance(edges, SparseMatrix):
        adj = edges
    else:
        e = np.asarray(edges, dtype=np.int64)
        if e.size == 0:
            e = e.reshape(0, 2)
        if e.ndim != 2 or e.shape[1] != 2:
            raise ValueError("edges must be an (m, 2) array of node pairs")
        n = x.shape[0]
        u = np.concatenate([e[:, 0], e[:, 1]])
        v = np.concatenate([e[:, 1], e[:, 0]])
        adj = SparseMatrix.from_edges(n, n, u, v, dedupe=True)
    return Graph(name=name, x=x, y=y, adj=adj, p=p)


def as_split(train, val, test, n: int | None = None) -> Split:
    """Build a validated Split from boolean masks or index arrays."""
    def mask(ids):
        ids = np.asarray(ids)
        if ids.dtype == bool:
            return ids
        if n is None:
            raise ValueError("index-based splits need the node count n")
        m = np.zeros(n, dtype=bool)
        m[ids.astype(np.int64)] = True
        return m
    return Split(train=mask(train), val=mask(val), test=mask(test))


class SupernetSearch(BaseEstimator):
    """Progressive supernet search plus architecture selection.

    After ``fit``: ``genotype_`` (the selected architecture), ``supernet_``
    (the trained compact supernet), ``shrink_log_``, ``selection_report_``,
    and ``val_accuracy_`` (expectation-mode supernet accuracy on val nodes).
    """

    def __init__(self, n_layers: int = 3, d1: int = 64,
                 shrink_rounds: int = 3, epochs_per_round: int = 200,
                 drop_per_round: int = 3, compact_epochs: int = 1000,
                 lr_w: float = 5e-3, lr_alpha: float = 3e-3,
                 wd_w: float = 5e-4, wd_alpha: float = 1e-3,
                 dropout: float = 0.5, activation: str = "elu",
                 criterion: str = "hete", direction: str = "argmin",
                 selection_seed: int = 0, node_set: str = "train_val",
                 seed: int = 0):
        self.n_layers = n_layers
        self.d1 = d1
        self.shrink_rounds = shrink_rounds
        self.epochs_per_round = epochs_per_round
        self.drop_per_round = drop_per_round
        self.compact_epochs = compact_epochs
        self.lr_w = lr_w
        self.lr_alpha = lr_alpha
        self.wd_w = wd_w
        self.wd_alpha = wd_alpha
        self.dropout = dropout
        self.activation = activation
        self.criterion = criterion
        self.direction = direction
        self.selection_seed = selection_seed
        self.node_set = node_set
        self.seed = seed

    def _search_config(self) -> SearchConfig:
        return SearchConfig(
            n_layers=self.n_layers, d1=self.d1,
            shrink_rounds=self.shrink_rounds,
            epochs_per_round=self.epochs_per_round,
            drop_per_round=self.drop_per_round,
            compact_epochs=self.compact_epochs,
            lr_w=self.lr_w, lr_alpha=self.lr_alpha,
            wd_w=self.wd_w, wd_alpha=self.wd_alpha,
            dropout=self.dropout, activation=self.activation, seed=self.seed)

    def fit(self, graph: Graph, split: Split) -> "SupernetSearch":
        cfg = self._search_config()
        net = Supernet.build(graph, cfg)
        net, log, history = progressive_train(net, ShrinkPlan.from_config(cfg),
                                              split)
        logits = net.forward(cfg.tau_min, "expectation")
        self.val_accuracy_ = accuracy(logits.data, graph.y, split.val)
        self.supernet_ = net
        self.shrink_log_ = log
        self.history_ = history
        if self.criterion == "hete":
            geno, report = select_heterophily(
                net, split, seed=self.selection_seed, direction=self.direction,
                node_set=self.node_set)
        else:
            geno, report = select_baseline(net, self.criterion, split,
                                           seed=self.selection_seed)
        self.genotype_ = geno
        self.selection_report_ = report
        return self


class GenotypeClassifier(BaseEstimator):
    """Trains one discrete architecture and predicts labels transductively.

    After ``fit``: ``logits_`` (all-node logits at the best-validation
    epoch), ``result_`` (the training record), ``classes_``.
    """

    def __init__(self, layers=("FAGCN", "GCNII", "SGC"),
                 gates=("l_skip", "l_skip"), fuser: str = "l_concat",
                 hidden: int = 64, lr: float = 5e-3,
                 weight_decay: float = 5e-4, optimizer: str = "adam",
                 dropout: float = 0.5, activation: str = "elu",
                 max_epochs: int = 1000, patience: int = 100, seed: int = 0):
        self.layers = layers
        self.gates = gates
        self.fuser = fuser
        self.hidden = hidden
        self.lr = lr
        self.weight_decay = weight_decay
        self.optimizer = optimizer
        self.dropout = dropout
        self.activation = activation
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _genotype(self) -> Genotype:
        return Genotype(layers=list(self.layers), gates=list(self.gates),
                        fuser=self.fuser)

    def _hyper(self) -> Hyperparams:
        return Hyperparams(hidden=self.hidden, lr=self.lr,
                           weight_decay=self.weight_decay,
                           optimizer=self.optimizer, dropout=self.dropout,
                           activation=self.activation)

    def fit(self, graph: Graph, split: Split) -> "GenotypeClassifier":
        geno = self._genotype()
        khops = build_khop(graph.adj, geno.n_layers)
        result = train_genotype(graph, geno, split, self._hyper(), self.seed,
                                max_epochs=self.max_epochs,
                                patience=self.patience, khops=khops,
                                return_logits=True)
        if result.diverged:
            raise RuntimeError("training diverged (non-finite loss)")
        self.result_ = result
        self.logits_ = result.logits
        self.classes_ = np.arange(graph.p)
        return self

    def predict(self, mask=None) -> np.ndarray:
        logits = self.logits_ if mask is None else self.logits_[np.asarray(mask)]
        return np.argmax(logits, axis=1)

    def predict_proba(self, mask=None) -> np.ndarray:
        logits = self.logits_ if mask is None else self.logits_[np.asarray(mask)]
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def score(self, y: np.ndarray, mask: np.ndarray) -> float:
        return accuracy(self.logits_, np.asarray(y), np.asarray(mask))
