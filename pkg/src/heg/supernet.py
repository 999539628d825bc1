"""Differentiable one-shot supernet with Gumbel-softmax mixed edges.

Wiring: input projection (d0 -> d1) -> L mixed aggregation layers, where
layer l propagates over the hop-l adjacency -> per-layer skip/zero gates ->
mixed fuser over the gated layer outputs -> linear classifier.

Every choice point is a :class:`MixedEdge` holding one free real score per
active candidate. Forward modes:

* ``gumbel``       -- softmax((alpha + gumbel noise) / tau), fresh noise per edge
* ``expectation``  -- softmax(alpha / tau), no noise
* ``discrete``     -- exactly one op per edge, taken from a Genotype
* ``leave_one_out``-- expectation weights with one candidate removed

Training alternates full-batch Adam steps: model weights w on the train-mask
cross-entropy with alpha frozen, then alpha on the val-mask cross-entropy
with w frozen (first-order bi-level scheme).
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tensor as tt
from .genotype import Genotype
from .graphs import Graph, KHopSet, Split, build_khop
from .ops import (ACTIVATIONS, AGG_OPS, FUSER_OPS, GATE_OPS, HopOperators,
                  OpContext, OpParams, OpScalars, agg_forward, apply_gate,
                  fuser_forward, init_fuser_params, init_params)
from .optim import Adam, Optimizer
from .rng import RngHub, glorot_uniform, gumbel_noise
from .serialize import decode_array, decode_state, encode_array, encode_state
from .tensor import Tensor

MODES = ("gumbel", "expectation", "discrete", "leave_one_out")

CHECKPOINT_FORMAT = "heg-supernet-checkpoint@1"


@dataclasses.dataclass
class SearchConfig:
    """Search-stage knobs; every value is recorded in reports/checkpoints."""
    n_layers: int = 3
    d1: int = 64
    tau_max: float = 8.0
    tau_min: float = 4.0
    shrink_rounds: int = 3
    epochs_per_round: int = 200
    drop_per_round: int = 3
    compact_epochs: int = 1000
    lr_w: float = 5e-3
    lr_alpha: float = 3e-3
    wd_w: float = 5e-4
    wd_alpha: float = 1e-3
    dropout: float = 0.5
    activation: str = "elu"
    seed: int = 0
    scalars: OpScalars = dataclasses.field(default_factory=OpScalars)

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("need at least one layer")
        if self.d1 < 1:
            raise ValueError("hidden width must be positive")
        if not (self.tau_max >= self.tau_min > 0):
            raise ValueError("need tau_max >= tau_min > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation '{self.activation}'")

    @property
    def total_epochs(self) -> int:
        """One global temperature decay spans shrinking plus compact training."""
        return self.shrink_rounds * self.epochs_per_round + self.compact_epochs

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchConfig":
        doc = dict(doc)
        scalars = doc.pop("scalars", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown search options: {sorted(unknown)}")
        cfg = cls(**doc)
        if scalars:
            cfg.scalars = OpScalars(**scalars)
        return cfg


def temperature(epoch: int, total_epochs: int, config: SearchConfig) -> float:
    if total_epochs <= 0:
        raise ValueError("total_epochs must be positive")
    if not 0 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs}]")
    frac = epoch / total_epochs
    return config.tau_max - (config.tau_max - config.tau_min) * frac


class MixedEdge:
    """One choice point: active candidates, their scores, their parameters."""

    def __init__(self, edge_id: str, group: str, candidates: Sequence[str],
                 alpha: Tensor, params: dict[str, OpParams]):
        self.edge_id = edge_id
        self.group = group  # "micro" | "gate" | "fuser"
        self.candidates = list(candidates)
        self.alpha = alpha
        self.params = params
        self.mask: set[str] = set()

    @classmethod
    def build(cls, edge_id: str, group: str, candidates: Sequence[str],
              hub: RngHub, make_params: Callable[[str], OpParams]) -> "MixedEdge":
        a_rng = hub.stream(f"init/alpha/{edge_id}")
        alpha = Tensor(a_rng.uniform(-1e-3, 1e-3, size=(1, len(candidates))),
                       requires_grad=True)
        params = {k: make_params(k) for k in candidates}
        return cls(edge_id, group, candidates, alpha, params)

    def _active_indices(self, exclude: frozenset[str]) -> list[int]:
        dropped = self.mask | set(exclude)
        idx = [i for i, k in enumerate(self.candidates) if k not in dropped]
        if not idx:
            raise ValueError(f"edge {self.edge_id}: all candidates masked")
        return idx

    def weight_tensor(self, tau: float, exclude: frozenset[str] = frozenset(),
                      noise_rng: np.random.Generator | None = None,
                      ) -> tuple[list[int], Tensor]:
        """Differentiable candidate weights; optionally Gumbel-perturbed."""
        idx = self._active_indices(exclude)
        a = tt.gather_cols(self.alpha, np.asarray(idx))
        if noise_rng is not None:
            a = tt.add_const(a, gumbel_noise(noise_rng, 1, len(idx)))
        return idx, tt.softmax_rows(tt.scale(a, 1.0 / tau))

    def expectation_weights(self, tau: float,
                            exclude: frozenset[str] = frozenset()) -> dict[str, float]:
        """Plain-number ranking weights: softmax(alpha / tau), no noise."""
        idx = self._active_indices(exclude)
        a = self.alpha.data[0, idx] / tau
        z = np.exp(a - a.max())
        w = z / z.sum()
        return {self.candidates[i]: float(w[j]) for j, i in enumerate(idx)}

    def blend(self, tau: float, mode: str, outputs: Callable[[str], Tensor],
              noise_rng: np.random.Generator | None = None,
              discrete_kind: str | None = None,
              exclude: frozenset[str] = frozenset()) -> Tensor:
        """Run candidates and combine them according to the forward mode."""
        if mode not in MODES:
            raise ValueError(f"unknown mode '{mode}'")
        if mode == "discrete":
            if discrete_kind is None:
                raise ValueError("discrete mode needs a chosen op")
            if discrete_kind not in self.candidates:
                raise ValueError(
                    f"edge {self.edge_id}: '{discrete_kind}' not a candidate")
            return outputs(discrete_kind)
        rng = noise_rng if mode == "gumbel" else None
        idx, w = self.weight_tensor(tau, exclude, rng)
        parts = [outputs(self.candidates[i]) for i in idx]
        return tt.weighted_sum(w, parts)

    def drop(self, kinds: Sequence[str], alpha_opt: Optimizer | None = None) -> None:
        """Remove candidates; alpha entries and optimizer moments are sliced."""
        kinds = set(kinds)
        unknown = kinds - set(self.candidates)
        if unknown:
            raise ValueError(f"edge {self.edge_id}: cannot drop {sorted(unknown)}")
        keep = [i for i, k in enumerate(self.candidates) if k not in kinds]
        if not keep:
            raise ValueError(f"edge {self.edge_id}: at least one candidate must stay")
        old_alpha = self.alpha
        new_alpha = Tensor(old_alpha.data[:, keep].copy(), requires_grad=True)
        if alpha_opt is not None:
            slot = alpha_opt.export_slot(old_alpha)
            if slot:
                for key, val in slot.items():
                    if isinstance(val, np.ndarray):
                        slot[key] = val[:, keep].copy()
                alpha_opt.load_slot(new_alpha, slot)
        self.alpha = new_alpha
        self.candidates = [self.candidates[i] for i in keep]
        for k in kinds:
            self.params.pop(k, None)
            self.mask.discard(k)


class Supernet:
    """The full search model; owns all parameters and their rng labels."""

    def __init__(self, config: SearchConfig, graph: Graph, khops: KHopSet,
                 hub: RngHub, stem: Tensor, clf: Tensor,
                 micro_edges: list[MixedEdge], gate_edges: list[MixedEdge],
                 fuser_edge: MixedEdge):
        self.config = config
        self.graph = graph
        self.khops = khops
        self.hub = hub
        self.hop_ops = [HopOperators.build(khops[k])
                        for k in range(1, config.n_layers + 1)]
        self.stem = stem
        self.clf = clf
        self.micro_edges = micro_edges
        self.gate_edges = gate_edges
        self.fuser_edge = fuser_edge

    # -- construction --------------------------------------------------------
    @classmethod
    def build(cls, graph: Graph, config: SearchConfig,
              khops: KHopSet | None = None) -> "Supernet":
        hub = RngHub(config.seed)
        L, d1 = config.n_layers, config.d1
        if khops is None:
            khops = build_khop(graph.adj, L)
        if khops.max_hop < L:
            raise ValueError(f"need {L} hop adjacencies, got {khops.max_hop}")
        stem = glorot_uniform(hub.stream("init/stem"), graph.d0, d1)
        clf = glorot_uniform(hub.stream("init/clf"), d1, graph.p)
        micro = [
            MixedEdge.build(
                f"micro/{l}", "micro", AGG_OPS, hub,
                lambda k, l=l: init_params(k, d1, d1,
                                           hub.stream(f"init/micro/{l}/{k}")))
            for l in range(1, L + 1)
        ]
        gates = [
            MixedEdge.build(f"gate/{l}", "gate", GATE_OPS, hub,
                            lambda k: OpParams(k, {}))
            for l in range(1, L)
        ]
        fuser = MixedEdge.build(
            "fuser", "fuser", FUSER_OPS, hub,
            lambda k: init_fuser_params(k, L, d1, hub.stream(f"init/fuser/{k}")))
        return cls(config, graph, khops, hub, stem, clf, micro, gates, fuser)

    # -- parameter bookkeeping ------------------------------------------------
    def edges(self) -> list[MixedEdge]:
        return [*self.micro_edges, *self.gate_edges, self.fuser_edge]

    def named_w_parameters(self) -> list[tuple[str, Tensor]]:
        named = [("stem", self.stem), ("clf", self.clf)]
        for edge in (*self.micro_edges, self.fuser_edge):
            for kind in edge.candidates:
                for pname, t in edge.params[kind].tensors.items():
                    named.append((f"{edge.edge_id}/{kind}/{pname}", t))
        return named

    def w_parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_w_parameters()]

    def alpha_parameters(self) -> list[Tensor]:
        return [e.alpha for e in self.edges()]

    def assert_param_partition(self) -> None:
        w_ids = {id(t) for t in self.w_parameters()}
        a_ids = {id(t) for t in self.alpha_parameters()}
        if w_ids & a_ids:
            raise AssertionError("w and alpha parameter sets overlap")

    # -- forward ---------------------------------------------------------------
    def forward(self, tau: float, mode: str, pass_hub: RngHub | None = None,
                train: bool = False, genotype: Genotype | None = None,
                leave_out: tuple[str, str] | None = None) -> Tensor:
        """Logits (n x p). ``leave_out`` = (edge_id, kind) masks one candidate."""
        if mode not in MODES:
            raise ValueError(f"unknown mode '{mode}'")
        if mode == "discrete" and genotype is None:
            raise ValueError("discrete mode needs a genotype")
        if mode == "leave_one_out" and leave_out is None:
            raise ValueError("leave_one_out mode needs (edge_id, kind)")
        if train and self.config.dropout > 0 and pass_hub is None:
            raise ValueError("training forward needs a pass-scoped rng hub")
        cfg = self.config

        def excl(edge: MixedEdge) -> frozenset[str]:
            if mode == "leave_one_out" and leave_out[0] == edge.edge_id:
                return frozenset((leave_out[1],))
            return frozenset()

        def noise(edge: MixedEdge) -> np.random.Generator | None:
            if mode != "gumbel":
                return None
            return pass_hub.stream(f"gumbel/{edge.edge_id}")

        h0 = tt.matmul(Tensor(self.graph.x), self.stem)
        h = h0
        slots: list[Tensor] = []
        for l, edge in enumerate(self.micro_edges, start=1):
            hop = self.hop_ops[l - 1]

            def run_op(kind: str, h=h, hop=hop, l=l, edge=edge) -> Tensor:
                rng = (pass_hub.stream(f"dropout/{edge.edge_id}/{kind}")
                       if (train and cfg.dropout > 0) else None)
                ctx = OpContext(h_prev=h, h0=h0, hop=hop, layer_index=l,
                                train=train, activation=cfg.activation,
                                dropout=cfg.dropout, rng=rng,
                                scalars=cfg.scalars)
                return agg_forward(kind, edge.params[kind], ctx)

            chosen = genotype.layers[l - 1] if genotype is not None else None
            h = edge.blend(tau, "discrete" if mode == "discrete" else mode,
                           run_op, noise(edge), chosen, excl(edge))
            slots.append(h)

        gated: list[Tensor] = []
        for l, edge in enumerate(self.gate_edges, start=1):
            slot = slots[l - 1]

            def run_gate(kind: str, slot=slot) -> Tensor:
                return apply_gate(kind, slot)

            chosen = genotype.gates[l - 1] if genotype is not None else None
            gated.append(edge.blend(tau, "discrete" if mode == "discrete" else mode,
                                    run_gate, noise(edge), chosen, excl(edge)))
        gated.append(slots[-1])  # the final layer always feeds the fuser

        def run_fuser(kind: str) -> Tensor:
            return fuser_forward(kind, self.fuser_edge.params[kind], gated)

        chosen = genotype.fuser if genotype is not None else None
        fused = self.fuser_edge.blend(
            tau, "discrete" if mode == "discrete" else mode, run_fuser,
            noise(self.fuser_edge), chosen, excl(self.fuser_edge))
        return tt.matmul(fused, self.clf)

    # -- checkpointing -----------------------------------------------------------
    def state_dict(self, epoch: int, opt_w: Optimizer | None = None,
                   opt_alpha: Optimizer | None = None,
                   extra: dict | None = None) -> dict:
        doc = {
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "graph": {"name": self.graph.name, "n": self.graph.n,
                      "d0": self.graph.d0, "p": self.graph.p},
            "epoch": int(epoch),
            "tau": temperature(min(epoch, self.config.total_epochs),
                               self.config.total_epochs, self.config),
            "stem": encode_array(self.stem.data),
            "clf": encode_array(self.clf.data),
            "edges": [],
        }
        for edge in self.edges():
            doc["edges"].append({
                "edge_id": edge.edge_id,
                "group": edge.group,
                "candidates": list(edge.candidates),
                "mask": sorted(edge.mask),
                "alpha": encode_array(edge.alpha.data),
                "params": {
                    kind: {name: encode_array(t.data)
                           for name, t in edge.params[kind].tensors.items()}
                    for kind in edge.candidates
                },
            })
        if opt_w is not None:
            doc["opt_w"] = {name: encode_state(opt_w.export_slot(t))
                            for name, t in self.named_w_parameters()}
        if opt_alpha is not None:
            doc["opt_alpha"] = {e.edge_id: encode_state(opt_alpha.export_slot(e.alpha))
                                for e in self.edges()}
        if extra:
            doc["extra"] = extra
        return doc

    def save(self, path: str | Path, epoch: int, opt_w: Optimizer | None = None,
             opt_alpha: Optimizer | None = None, extra: dict | None = None) -> None:
        Path(path).write_text(
            json.dumps(self.state_dict(epoch, opt_w, opt_alpha, extra)) + "\n")

    @classmethod
    def restore(cls, doc: dict, graph: Graph,
                opt_w: Optimizer | None = None,
                opt_alpha: Optimizer | None = None) -> tuple["Supernet", int]:
        """Rebuild a supernet (and optionally optimizer state) from a document."""
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a supernet checkpoint")
        meta = doc["graph"]
        if (meta["n"], meta["d0"], meta["p"]) != (graph.n, graph.d0, graph.p):
            raise ValueError("checkpoint was written for a different graph")
        config = SearchConfig.from_dict(doc["config"])
        net = cls.build(graph, config)
        net.stem.data = decode_array(doc["stem"])
        net.clf.data = decode_array(doc["clf"])
        by_id = {e.edge_id: e for e in net.edges()}
        for erec in doc["edges"]:
            edge = by_id[erec["edge_id"]]
            drop = [k for k in edge.candidates if k not in set(erec["candidates"])]
            if drop:
                edge.drop(drop)
            if edge.candidates != list(erec["candidates"]):
                raise ValueError(f"edge {edge.edge_id}: candidate order mismatch")
            edge.alpha.data = decode_array(erec["alpha"])
            edge.mask = set(erec.get("mask", []))
            for kind, tensors in erec["params"].items():
                for name, arr in tensors.items():
                    edge.params[kind].tensors[name].data = decode_array(arr)
        if opt_w is not None and "opt_w" in doc:
            named = dict(net.named_w_parameters())
            for name, slot in doc["opt_w"].items():
                if slot:
                    opt_w.load_slot(named[name], decode_state(slot))
        if opt_alpha is not None and "opt_alpha" in doc:
            for edge in net.edges():
                slot = doc["opt_alpha"].get(edge.edge_id)
                if slot:
                    opt_alpha.load_slot(edge.alpha, decode_state(slot))
        return net, int(doc["epoch"])

    @classmethod
    def load(cls, path: str | Path, graph: Graph,
             opt_w: Optimizer | None = None,
             opt_alpha: Optimizer | None = None) -> tuple["Supernet", int]:
        return cls.restore(json.loads(Path(path).read_text()), graph,
                           opt_w, opt_alpha)


def make_search_optimizers(net: Supernet) -> tuple[Adam, Adam]:
    cfg = net.config
    return (Adam(cfg.lr_w, cfg.wd_w), Adam(cfg.lr_alpha, cfg.wd_alpha))


def bilevel_epoch(net: Supernet, split: Split, epoch: int,
                  opt_w: Optimizer, opt_alpha: Optimizer) -> tuple[float, float]:
    """One alternation: w step on train loss, then alpha step on val loss."""
    cfg = net.config
    tau = temperature(min(epoch, cfg.total_epochs), cfg.total_epochs, cfg)
    y = net.graph.y
    w_params = net.w_parameters()
    a_params = net.alpha_parameters()

    with tt.Tape() as tape:
        logits = net.forward(tau, "gumbel",
                             net.hub.scoped(f"w/epoch={epoch}"), train=True)
        train_loss = tt.masked_cross_entropy(logits, y, split.train)
        tape.backward(train_loss)
    opt_w.step(w_params)
    Optimizer.zero_grad(w_params)
    Optimizer.zero_grad(a_params)

    with tt.Tape() as tape:
        logits = net.forward(tau, "gumbel",
                             net.hub.scoped(f"alpha/epoch={epoch}"), train=True)
        val_loss = tt.masked_cross_entropy(logits, y, split.val)
        tape.backward(val_loss)
    opt_alpha.step(a_params)
    Optimizer.zero_grad(w_params)
    Optimizer.zero_grad(a_params)
    return train_loss.item(), val_loss.item()
