"""Training a discrete architecture from scratch, plus hyperparameter tuning.

A :class:`GenotypeModel` is the standalone network described by a Genotype:
input projection -> one aggregation op per layer (layer l on hop-l
neighbors) -> skip/zero gates -> fuser -> classifier. Parameter streams are
labeled identically to the supernet's, so a discrete-mode supernet forward
and a standalone build from the same seed produce bit-identical logits.

Training is full-batch with early stopping on validation accuracy; the
reported test accuracy is the one observed at the best-validation epoch.
Hyperparameter tuning draws uniform random configurations from a fixed grid.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from . import tensor as tt
from .genotype import Genotype
from .graphs import Graph, KHopSet, Split, build_khop
from .ops import (HopOperators, OpContext, OpParams, OpScalars, agg_forward,
                  apply_gate, fuser_forward, init_fuser_params, init_params)
from .optim import Optimizer, make_optimizer
from .rng import RngHub, glorot_uniform, stream
from .tensor import NumericError, Tensor

HIDDEN_CHOICES = (16, 32, 64, 128, 256)
DROPOUT_CHOICES = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
ACTIVATION_CHOICES = ("elu", "relu", "leakyrelu")
OPTIMIZER_CHOICES = ("adagrad", "adam")
LR_RANGE = (1e-3, 1e-2)
WD_RANGE = (1e-5, 1e-3)


@dataclasses.dataclass
class Hyperparams:
    hidden: int = 64
    lr: float = 5e-3
    weight_decay: float = 5e-4
    optimizer: str = "adam"
    dropout: float = 0.5
    activation: str = "elu"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Hyperparams":
        return cls(**doc)


@dataclasses.dataclass
class HyperparamSpace:
    """The tuning grid; sampling is uniform over each axis."""
    hidden: tuple[int, ...] = HIDDEN_CHOICES
    lr: tuple[float, float] = LR_RANGE
    weight_decay: tuple[float, float] = WD_RANGE
    optimizer: tuple[str, ...] = OPTIMIZER_CHOICES
    dropout: tuple[float, ...] = DROPOUT_CHOICES
    activation: tuple[str, ...] = ACTIVATION_CHOICES

    def sample(self, rng: np.random.Generator) -> Hyperparams:
        return Hyperparams(
            hidden=int(rng.choice(self.hidden)),
            lr=float(rng.uniform(*self.lr)),
            weight_decay=float(rng.uniform(*self.weight_decay)),
            optimizer=str(rng.choice(self.optimizer)),
            dropout=float(rng.choice(self.dropout)),
            activation=str(rng.choice(self.activation)),
        )


def accuracy(logits: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ValueError("accuracy over an empty mask")
    pred = np.argmax(logits[rows], axis=1)
    return float(np.mean(pred == y[rows]))


class GenotypeModel:
    """The discrete network a Genotype describes, built standalone."""

    def __init__(self, graph: Graph, genotype: Genotype, hyper: Hyperparams,
                 hub: RngHub, khops: KHopSet | None = None,
                 scalars: OpScalars | None = None):
        self.graph = graph
        self.genotype = genotype
        self.hyper = hyper
        self.hub = hub
        self.scalars = scalars or OpScalars()
        L = genotype.n_layers
        if khops is None:
            khops = build_khop(graph.adj, L)
        if khops.max_hop < L:
            raise ValueError(f"need {L} hop adjacencies, got {khops.max_hop}")
        self.hop_ops = [HopOperators.build(khops[k]) for k in range(1, L + 1)]
        d1 = hyper.hidden
        self.stem = glorot_uniform(hub.stream("init/stem"), graph.d0, d1)
        self.clf = glorot_uniform(hub.stream("init/clf"), d1, graph.p)
        self.layer_params: list[OpParams] = [
            init_params(kind, d1, d1, hub.stream(f"init/micro/{l}/{kind}"))
            for l, kind in enumerate(genotype.layers, start=1)
        ]
        self.fuser_params = init_fuser_params(
            genotype.fuser, L, d1, hub.stream(f"init/fuser/{genotype.fuser}"))

    def parameters(self) -> list[Tensor]:
        params = [self.stem, self.clf]
        for p in self.layer_params:
            params.extend(p.parameters())
        params.extend(self.fuser_params.parameters())
        return params

    def forward(self, train: bool = False, pass_hub: RngHub | None = None) -> Tensor:
        g = self.genotype
        h0 = tt.matmul(Tensor(self.graph.x), self.stem)
        h = h0
        slots = []
        for l, kind in enumerate(g.layers, start=1):
            rng = (pass_hub.stream(f"dropout/micro/{l}/{kind}")
                   if (train and self.hyper.dropout > 0) else None)
            ctx = OpContext(h_prev=h, h0=h0, hop=self.hop_ops[l - 1],
                            layer_index=l, train=train,
                            activation=self.hyper.activation,
                            dropout=self.hyper.dropout, rng=rng,
                            scalars=self.scalars)
            h = agg_forward(kind, self.layer_params[l - 1], ctx)
            slots.append(h)
        gated = [apply_gate(gk, slots[i]) for i, gk in enumerate(g.gates)]
        gated.append(slots[-1])
        fused = fuser_forward(g.fuser, self.fuser_params, gated)
        return tt.matmul(fused, self.clf)


@dataclasses.dataclass
class TrainResult:
    val_acc: float
    test_acc: float
    best_epoch: int
    epochs_run: int
    diverged: bool = False
    logits: np.ndarray | None = None  # all-node logits at the best epoch

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc.pop("logits")
        return doc


def train_genotype(graph: Graph, genotype: Genotype, split: Split,
                   hyper: Hyperparams, seed: int, scope: str = "",
                   max_epochs: int = 1000, patience: int = 100,
                   khops: KHopSet | None = None,
                   scalars: OpScalars | None = None,
                   return_logits: bool = False) -> TrainResult:
    """Full-batch training with early stopping on validation accuracy."""
    hub = RngHub(seed).scoped(scope) if scope else RngHub(seed)
    model = GenotypeModel(graph, genotype, hyper, hub, khops, scalars)
    opt = make_optimizer(hyper.optimizer, hyper.lr, hyper.weight_decay)
    params = model.parameters()
    y = graph.y

    best_val, best_test, best_epoch = -1.0, 0.0, -1
    best_logits = None
    since_best = 0
    epoch = 0
    try:
        for epoch in range(max_epochs):
            with tt.Tape() as tape:
                logits = model.forward(train=True,
                                       pass_hub=hub.scoped(f"train/epoch={epoch}"))
                loss = tt.masked_cross_entropy(logits, y, split.train)
                tape.backward(loss)
            opt.step(params)
            Optimizer.zero_grad(params)

            eval_logits = model.forward(train=False).data
            val_acc = accuracy(eval_logits, y, split.val)
            if val_acc > best_val:
                best_val = val_acc
                best_test = accuracy(eval_logits, y, split.test)
                best_epoch = epoch
                if return_logits:
                    best_logits = eval_logits.copy()
                since_best = 0
            else:
                since_best += 1
                if since_best >= patience:
                    break
    except NumericError:
        return TrainResult(val_acc=float("nan"), test_acc=float("nan"),
                           best_epoch=best_epoch, epochs_run=epoch + 1,
                           diverged=True)
    return TrainResult(val_acc=best_val, test_acc=best_test,
                       best_epoch=best_epoch, epochs_run=epoch + 1,
                       logits=best_logits)


def evaluate_splits(graph: Graph, genotype: Genotype, splits: Sequence[Split],
                    hyper: Hyperparams, seed: int, max_epochs: int = 1000,
                    patience: int = 100,
                    scalars: OpScalars | None = None) -> dict:
    """Train from scratch on every split; mean/std over the converged ones."""
    khops = build_khop(graph.adj, genotype.n_layers)
    results = []
    for i, split in enumerate(splits):
        res = train_genotype(graph, genotype, split, hyper, seed,
                             scope=f"split={i}", max_epochs=max_epochs,
                             patience=patience, khops=khops, scalars=scalars)
        results.append(res)
    accs = [r.test_acc for r in results if not r.diverged]
    record = {
        "per_split": [r.to_dict() for r in results],
        "n_splits": len(results),
        "n_diverged": sum(r.diverged for r in results),
        "test_acc_mean": float(np.mean(accs)) if accs else float("nan"),
        "test_acc_std": float(np.std(accs)) if accs else float("nan"),
        "val_acc_mean": (float(np.mean([r.val_acc for r in results if not r.diverged]))
                         if accs else float("nan")),
    }
    if record["n_diverged"]:
        record["warning"] = "divergent splits excluded from the mean"
    return record


def tune(graph: Graph, genotype: Genotype, split: Split, iters: int, seed: int,
         space: HyperparamSpace | None = None, max_epochs: int = 1000,
         patience: int = 100, scalars: OpScalars | None = None,
         ) -> tuple[Hyperparams, list[dict]]:
    """Uniform random search; best = highest validation accuracy, ties earliest."""
    if iters < 0:
        raise ValueError("iters must be >= 0")
    space = space or HyperparamSpace()
    khops = build_khop(graph.adj, genotype.n_layers)
    trials: list[dict] = []
    best_hp = Hyperparams()
    best_val = -np.inf
    for t in range(iters):
        hp = space.sample(stream(seed, f"tune/sample/trial={t}"))
        res = train_genotype(graph, genotype, split, hp, seed,
                             scope=f"tune/trial={t}", max_epochs=max_epochs,
                             patience=patience, khops=khops, scalars=scalars)
        row = {"trial": t, **hp.to_dict(), **res.to_dict()}
        trials.append(row)
        score = -np.inf if res.diverged else res.val_acc
        if score > best_val:
            best_val = score
            best_hp = hp
    return best_hp, trials
