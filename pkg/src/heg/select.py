"""Discrete architecture selection from a trained compact supernet.

Primary criterion: leave-one-out class-connection distance. For each edge in
a seeded random order, every active candidate is masked in turn, the
remaining weights renormalize (expectation mode, no sampling noise), the
masked forward's hard predictions are compared to ground truth via the
squared distance between class-connection profiles on train+val nodes, and
the edge is fixed to the candidate optimizing that score. Both score
directions ship: ``argmin`` (the selection rule as stated) and ``argmax``
(the removing-the-best-op-should-hurt reading); neither is silently
preferred.

Baselines: largest-weight per edge (``argmax_alpha``) and leave-one-out
validation loss (``val_loss``, keep the op whose removal hurts most).
"""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from . import tensor as tt
from .genotype import Genotype
from .graphs import Split, d_hete
from .ops import AGG_OPS, FUSER_OPS, GATE_OPS
from .optim import Adam, Optimizer
from .rng import stream
from .supernet import MixedEdge, Supernet
from .tensor import Tensor

CRITERIA = ("hete", "argmax_alpha", "val_loss")
DIRECTIONS = ("argmin", "argmax")


def _catalog_index(kind: str) -> int:
    for cat in (AGG_OPS, GATE_OPS, FUSER_OPS):
        if kind in cat:
            return cat.index(kind)
    raise ValueError(f"unknown op '{kind}'")


@dataclasses.dataclass
class SelectionReport:
    criterion: str
    direction: str
    seed: int | None
    edges: list[dict] = dataclasses.field(default_factory=list)

    def record(self, position: int, edge_id: str, scores: list[tuple[str, float]],
               chosen: str) -> None:
        self.edges.append({"position": position, "edge_id": edge_id,
                           "scores": [[k, s] for k, s in scores],
                           "chosen": chosen})

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "direction": self.direction,
                "seed": self.seed, "edges": self.edges}

    def check_per_edge_optimality(self) -> bool:
        """Chosen kind attains the recorded optimum (ignoring tie-breaks)."""
        for rec in self.edges:
            scores = {k: s for k, s in rec["scores"]}
            best = min(scores.values()) if self.direction == "argmin" else max(scores.values())
            if scores[rec["chosen"]] != best:
                return False
        return True


def predict_labels(logits: Tensor) -> np.ndarray:
    """Hard argmax; ties resolve to the lowest class index."""
    return np.argmax(logits.data, axis=1)


def selection_mask(split: Split, node_set: str = "train_val") -> np.ndarray:
    """Nodes whose labels the selection criterion may read (never test)."""
    if node_set == "train_val":
        return split.train | split.val
    if node_set == "train":
        return split.train.copy()
    if node_set == "all":
        return np.ones_like(split.train)
    raise ValueError(f"unknown node set '{node_set}'")


def _hete_score(net: Supernet, logits: Tensor, split: Split,
                node_set: str) -> float:
    mask = selection_mask(split, node_set)
    return d_hete(predict_labels(logits), net.graph.y, net.graph.p,
                  net.graph.adj, mask)


def _val_loss_score(net: Supernet, logits: Tensor, split: Split) -> float:
    return tt.masked_cross_entropy(logits, net.graph.y, split.val).item()


def score_without(net: Supernet, edge_id: str, kind: str, split: Split,
                  criterion: str = "hete", tau: float | None = None,
                  node_set: str = "train_val") -> float:
    """Criterion value of the supernet with one candidate masked out."""
    edge = _edge_by_id(net, edge_id)
    if kind not in edge.candidates:
        raise ValueError(f"'{kind}' is not active on {edge_id}")
    if len(edge.candidates) < 2:
        raise ValueError(f"{edge_id}: cannot mask the only candidate")
    if tau is None:
        tau = net.config.tau_min
    logits = net.forward(tau, "leave_one_out", leave_out=(edge_id, kind))
    if criterion == "hete":
        return _hete_score(net, logits, split, node_set)
    if criterion == "val_loss":
        return _val_loss_score(net, logits, split)
    raise ValueError(f"criterion '{criterion}' has no leave-one-out score")


def _edge_by_id(net: Supernet, edge_id: str) -> MixedEdge:
    for e in net.edges():
        if e.edge_id == edge_id:
            return e
    raise ValueError(f"no edge '{edge_id}'")


def _fix_edge(net: Supernet, edge: MixedEdge, kind: str,
              alpha_opt: Optimizer | None = None) -> None:
    others = [k for k in edge.candidates if k != kind]
    if others:
        edge.drop(others, alpha_opt)


def _pick(scores: list[tuple[str, float]], weights: dict[str, float],
          direction: str) -> str:
    """Optimum with ties broken by larger mixed weight, then catalog order."""
    sign = 1.0 if direction == "argmin" else -1.0
    return min(scores, key=lambda ks: (sign * ks[1], -weights[ks[0]],
                                       _catalog_index(ks[0])))[0]


def _full_net_score(net: Supernet, split: Split, criterion: str, tau: float,
                    node_set: str) -> float:
    logits = net.forward(tau, "expectation")
    if criterion == "val_loss":
        return _val_loss_score(net, logits, split)
    return _hete_score(net, logits, split, node_set)


def _genotype_from(net: Supernet, criterion: str, seed: int | None) -> Genotype:
    return Genotype(
        layers=[e.candidates[0] for e in net.micro_edges],
        gates=[e.candidates[0] for e in net.gate_edges],
        fuser=net.fuser_edge.candidates[0],
        criterion=criterion,
        seed=seed,
    )


def _fine_tune(net: Supernet, split: Split, epochs: int, tag: str) -> None:
    """Optional weight-only adaptation between discretization steps."""
    if epochs <= 0:
        return
    opt = Adam(net.config.lr_w, net.config.wd_w)
    params = net.w_parameters()
    tau = net.config.tau_min
    y = net.graph.y
    for e in range(epochs):
        with tt.Tape() as tape:
            logits = net.forward(tau, "gumbel",
                                 net.hub.scoped(f"select/{tag}/epoch={e}"),
                                 train=True)
            loss = tt.masked_cross_entropy(logits, y, split.train)
            tape.backward(loss)
        opt.step(params)
        Optimizer.zero_grad(params)
        Optimizer.zero_grad(net.alpha_parameters())


def _select_loo(net: Supernet, split: Split, seed: int, criterion: str,
                direction: str, node_set: str, fine_tune_epochs: int,
                on_edge: Callable[[str, str], None] | None = None,
                ) -> tuple[Genotype, SelectionReport]:
    """Shared greedy leave-one-out loop for hete and val_loss criteria."""
    tau = net.config.tau_min
    report = SelectionReport(criterion=criterion, direction=direction, seed=seed)
    order_rng = stream(seed, "select/order")
    edge_ids = [e.edge_id for e in net.edges()]
    order = [edge_ids[i] for i in order_rng.permutation(len(edge_ids))]

    for pos, edge_id in enumerate(order):
        edge = _edge_by_id(net, edge_id)
        weights = edge.expectation_weights(tau)
        if len(edge.candidates) == 1:
            only = edge.candidates[0]
            scores = [(only, _full_net_score(net, split, criterion, tau, node_set))]
            chosen = only
        else:
            scores = [(k, score_without(net, edge_id, k, split, criterion,
                                        tau, node_set))
                      for k in edge.candidates]
            chosen = _pick(scores, weights, direction)
        report.record(pos, edge_id, scores, chosen)
        _fix_edge(net, edge, chosen)
        if on_edge:
            on_edge(edge_id, chosen)
        _fine_tune(net, split, fine_tune_epochs, f"pos={pos}")
    return _genotype_from(net, criterion, seed), report


def select_heterophily(net: Supernet, split: Split, seed: int = 0,
                       direction: str = "argmin", node_set: str = "train_val",
                       fine_tune_epochs: int = 0,
                       on_edge: Callable[[str, str], None] | None = None,
                       ) -> tuple[Genotype, SelectionReport]:
    """Leave-one-out class-connection criterion (the primary selection rule)."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    geno, report = _select_loo(net, split, seed, "hete", direction, node_set,
                               fine_tune_epochs, on_edge)
    geno.criterion = f"hete_{direction}"
    report.criterion = f"hete_{direction}"
    return geno, report


def select_baseline(net: Supernet, criterion: str, split: Split,
                    seed: int = 0, fine_tune_epochs: int = 0,
                    ) -> tuple[Genotype, SelectionReport]:
    """Ablation baselines: 'argmax_alpha' or 'val_loss'."""
    if criterion == "argmax_alpha":
        tau = net.config.tau_min
        report = SelectionReport(criterion=criterion, direction="argmax", seed=seed)
        for pos, edge in enumerate(net.edges()):
            weights = edge.expectation_weights(tau)
            scores = sorted(weights.items(), key=lambda kv: _catalog_index(kv[0]))
            chosen = _pick(scores, weights, "argmax")
            report.record(pos, edge.edge_id, scores, chosen)
            _fix_edge(net, edge, chosen)
        return _genotype_from(net, criterion, seed), report
    if criterion == "val_loss":
        # keep the op whose removal hurts validation loss the most
        return _select_loo(net, split, seed, "val_loss", "argmax", "train_val",
                           fine_tune_epochs)
    raise ValueError(f"unknown baseline criterion '{criterion}'")
