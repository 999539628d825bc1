"""Progressive supernet training with layer-wise candidate dropping.

Alternates short bi-level training phases with removal of the C weakest
candidates from every aggregation edge, judged by expectation-mode mixed
weight at the current temperature. Gate and fuser edges are never shrunk
(dropping from a 2- or 3-way edge would collapse it). After the final round
the compact supernet trains for a longer stretch under the same global
temperature decay.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

from .graphs import Split
from .ops import AGG_OPS
from .optim import Optimizer
from .supernet import (SearchConfig, Supernet, bilevel_epoch,
                       make_search_optimizers, temperature)


@dataclasses.dataclass
class ShrinkPlan:
    rounds: int = 3
    drop_per_round: int = 3
    epochs_per_round: int = 200
    compact_epochs: int = 1000

    def __post_init__(self):
        if self.rounds < 0 or self.drop_per_round < 0:
            raise ValueError("rounds and drop_per_round must be >= 0")

    @classmethod
    def from_config(cls, cfg: SearchConfig) -> "ShrinkPlan":
        return cls(rounds=cfg.shrink_rounds, drop_per_round=cfg.drop_per_round,
                   epochs_per_round=cfg.epochs_per_round,
                   compact_epochs=cfg.compact_epochs)

    @property
    def total_epochs(self) -> int:
        return self.rounds * self.epochs_per_round + self.compact_epochs


def _catalog_index(kind: str) -> int:
    return AGG_OPS.index(kind)


def rank_for_drop(weights: dict[str, float]) -> list[tuple[str, float]]:
    """Ascending by weight; ties keep catalog listing order."""
    return sorted(weights.items(), key=lambda kv: (kv[1], _catalog_index(kv[0])))


def drop_ops(net: Supernet, layer: int, count: int,
             alpha_opt: Optimizer | None = None,
             tau: float | None = None) -> dict:
    """Deactivate the ``count`` smallest-weight candidates of one micro edge."""
    if not 1 <= layer <= len(net.micro_edges):
        raise ValueError(f"layer {layer} out of range")
    edge = net.micro_edges[layer - 1]
    if count >= len(edge.candidates):
        raise ValueError(
            f"edge {edge.edge_id}: cannot empty an edge "
            f"({count} drops requested, {len(edge.candidates)} active)")
    if tau is None:
        tau = net.config.tau_min
    ranking = rank_for_drop(edge.expectation_weights(tau))
    dropped = [kind for kind, _ in ranking[:count]]
    if dropped:
        edge.drop(dropped, alpha_opt)
    return {
        "edge_id": edge.edge_id,
        "ranking": [[kind, w] for kind, w in ranking],
        "dropped": dropped,
    }


@dataclasses.dataclass
class ShrinkLog:
    rounds: list[dict] = dataclasses.field(default_factory=list)

    def append_round(self, round_index: int, epoch: int, tau: float,
                     layers: list[dict]) -> None:
        self.rounds.append({"round": round_index, "epoch": epoch,
                            "tau": tau, "layers": layers})

    def to_dict(self) -> dict:
        return {"rounds": self.rounds}

    @classmethod
    def from_dict(cls, doc: dict) -> "ShrinkLog":
        return cls(rounds=list(doc["rounds"]))

    def replay_consistent(self) -> bool:
        """Re-derive every drop decision from its logged ranking."""
        for rec in self.rounds:
            for layer in rec["layers"]:
                weights = {kind: w for kind, w in layer["ranking"]}
                expect = [k for k, _ in rank_for_drop(weights)[:len(layer["dropped"])]]
                if expect != list(layer["dropped"]):
                    return False
        return True


def progressive_train(net: Supernet, plan: ShrinkPlan, split: Split,
                      opt_w: Optimizer | None = None,
                      opt_alpha: Optimizer | None = None,
                      start_epoch: int = 0,
                      on_epoch: Callable[[int, float, float], None] | None = None,
                      ) -> tuple[Supernet, ShrinkLog, list[tuple[float, float]]]:
    """Run the full shrink-then-compact schedule; returns the trained net."""
    start_candidates = min(len(e.candidates) for e in net.micro_edges)
    if start_candidates - plan.rounds * plan.drop_per_round < 1:
        raise ValueError("plan would empty a micro edge")
    if opt_w is None or opt_alpha is None:
        opt_w, opt_alpha = make_search_optimizers(net)
    net.assert_param_partition()

    log = ShrinkLog()
    history: list[tuple[float, float]] = []
    epoch = start_epoch
    total = net.config.total_epochs

    for r in range(plan.rounds):
        for _ in range(plan.epochs_per_round):
            losses = bilevel_epoch(net, split, epoch, opt_w, opt_alpha)
            history.append(losses)
            if on_epoch:
                on_epoch(epoch, *losses)
            epoch += 1
        tau = temperature(min(epoch, total), total, net.config)
        entries = [drop_ops(net, layer, plan.drop_per_round, opt_alpha, tau)
                   for layer in range(1, len(net.micro_edges) + 1)]
        log.append_round(r, epoch, tau, entries)

    for _ in range(plan.compact_epochs):
        losses = bilevel_epoch(net, split, epoch, opt_w, opt_alpha)
        history.append(losses)
        if on_epoch:
            on_epoch(epoch, *losses)
        epoch += 1
    return net, log, history
