"""The searchable operation space.

Eighteen aggregation operators (11 drawn from homophilic GNNs, 7 from
heterophilic ones) plus five macro-level combination operators (two per-layer
gates, three multi-scale fusers). Every operator is a pure differentiable
function of (params, context) with a uniform n x d1 -> n x d1 contract, built
on the tensor primitives so the whole space is gradient-checkable.

Neighborhoods come from self-loop-free hop adjacencies: ego features enter
only through an op's own ego term (SAGE concat, GIN epsilon, initial-residual
terms, gates), never through the propagation matrix.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from . import tensor as tt
from .graphs import row_norm, sym_norm
from .rng import glorot_uniform
from .sparse import EdgePattern, SparseMatrix
from .tensor import Tensor

HOMOPHILY_OPS = (
    "SAGE", "SAGE_SUM", "SAGE_MAX", "GCN", "GIN", "GAT", "GAT_SYM",
    "GAT_COS", "GAT_LIN", "GAT_GEN_LIN", "GENIEPATH",
)
HETEROPHILY_OPS = (
    "GCNII", "FAGCN", "GPRGNN", "SUPERGAT", "GCN_CHEB", "APPNP", "SGC",
)
AGG_OPS = HOMOPHILY_OPS + HETEROPHILY_OPS  # catalog order is the tie-break order
GATE_OPS = ("l_skip", "l_zero")
FUSER_OPS = ("l_concat", "l_max", "l_lstm")
MACRO_OPS = GATE_OPS + FUSER_OPS

ACTIVATIONS = ("elu", "relu", "leakyrelu", "tanh", "sigmoid")


def op_tag(kind: str) -> str:
    if kind in HOMOPHILY_OPS:
        return "homophily"
    if kind in HETEROPHILY_OPS:
        return "heterophily"
    raise ValueError(f"unknown aggregation op '{kind}'")


@dataclasses.dataclass
class OpScalars:
    """Fixed hyper-scalars of individual operators (overridable via config)."""
    gcnii_alpha: float = 0.1
    gcnii_lambda: float = 0.5
    fagcn_eps: float = 0.3
    appnp_alpha: float = 0.1
    appnp_iters: int = 10
    leaky_slope: float = 0.2


@dataclasses.dataclass
class HopOperators:
    """Precomputed propagation structure for one hop adjacency."""
    adj: SparseMatrix            # binary, symmetric, zero diagonal
    p_sym: SparseMatrix          # D^-1/2 A D^-1/2
    m_row: SparseMatrix          # D^-1 A
    src: np.ndarray              # edge sources, grouped by destination
    dst: np.ndarray              # edge destinations, sorted ascending
    deg: np.ndarray              # node degrees (float)
    edge_inv_sqrt_deg: np.ndarray  # (E, 1): 1 / sqrt(deg[dst] * deg[src])
    pattern: EdgePattern         # reusable skeleton for weighted aggregation

    @classmethod
    def build(cls, adj: SparseMatrix) -> "HopOperators":
        csr = adj.csr
        n = csr.shape[0]
        dst = np.repeat(np.arange(n, dtype=np.int64), np.diff(csr.indptr))
        src = csr.indices.astype(np.int64)
        deg = np.asarray(csr.sum(axis=1)).ravel()
        denom = np.sqrt(deg[dst] * deg[src])  # > 0 on every edge
        inv = np.zeros((dst.size, 1))
        if dst.size:
            inv[:, 0] = 1.0 / denom
        return cls(adj=adj, p_sym=sym_norm(adj), m_row=row_norm(adj),
                   src=src, dst=dst, deg=deg, edge_inv_sqrt_deg=inv,
                   pattern=EdgePattern(dst, src, n))

    @property
    def n(self) -> int:
        return self.adj.shape[0]


@dataclasses.dataclass
class OpContext:
    """Everything an operator forward needs besides its parameters."""
    h_prev: Tensor               # layer input, n x d1
    h0: Tensor                   # initial embedding, n x d1
    hop: HopOperators            # this layer's hop structure
    layer_index: int             # 1-based depth, used by GCNII's beta
    train: bool = False
    activation: str = "elu"
    dropout: float = 0.0
    rng: np.random.Generator | None = None
    scalars: OpScalars = dataclasses.field(default_factory=OpScalars)


def apply_activation(x: Tensor, kind: str, slope: float = 0.2) -> Tensor:
    if kind == "elu":
        return tt.elu(x)
    if kind == "relu":
        return tt.relu(x)
    if kind == "leakyrelu":
        return tt.leakyrelu(x, slope)
    if kind == "tanh":
        return tt.tanh(x)
    if kind == "sigmoid":
        return tt.sigmoid(x)
    raise ValueError(f"unknown activation '{kind}'")


@dataclasses.dataclass
class OpParams:
    kind: str
    tensors: dict[str, Tensor]

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())


def _op_shapes(kind: str, d: int) -> list[tuple[str, tuple[int, int]]]:
    """Learnable tensor layout per kind; order fixes the rng draw order."""
    if kind in ("SAGE", "SAGE_SUM", "SAGE_MAX"):
        return [("W", (2 * d, d))]
    if kind in ("GCN", "SGC", "GCNII"):
        return [("W", (d, d))]
    if kind == "GIN":
        return [("W1", (d, d)), ("W2", (d, d))]
    if kind in ("GAT", "GAT_SYM"):
        return [("W", (d, d)), ("a", (2 * d, 1))]
    if kind == "GAT_COS":
        return [("W", (d, d))]
    if kind == "GAT_LIN":
        return [("W", (d, d)), ("a_l", (d, 1)), ("a_r", (d, 1))]
    if kind == "GAT_GEN_LIN":
        return [("W", (d, d)), ("W_l", (d, d)), ("W_r", (d, d)), ("w_g", (d, 1))]
    if kind == "GENIEPATH":
        return [("W", (d, d)), ("W_s", (d, d)), ("W_n", (d, d)), ("v", (d, 1)),
                ("W_gate", (2 * d, d)), ("W_t", (d, d))]
    if kind == "FAGCN":
        return [("g", (2 * d, 1))]
    if kind == "SUPERGAT":
        return [("W", (d, d))]
    if kind == "GCN_CHEB":
        return [("theta0", (d, d)), ("theta1", (d, d)), ("theta2", (d, d))]
    if kind in ("GPRGNN", "APPNP"):
        return []
    raise ValueError(f"unknown aggregation op '{kind}'")


def init_params(kind: str, d_in: int, d_out: int, rng: np.random.Generator) -> OpParams:
    """Glorot matrices plus canonical scalar defaults, drawn in a fixed order."""
    if d_in != d_out:
        raise ValueError("aggregation ops keep a uniform hidden width")
    d = d_in
    tensors: dict[str, Tensor] = {}
    for name, (r, c) in _op_shapes(kind, d):
        tensors[name] = glorot_uniform(rng, r, c)
    if kind == "GIN":
        tensors["eps"] = Tensor([[0.0]], requires_grad=True)
    if kind == "GPRGNN":
        tensors["gamma_a"] = Tensor([[0.1]], requires_grad=True)
        tensors["gamma_b"] = Tensor([[0.9]], requires_grad=True)
    return OpParams(kind=kind, tensors=tensors)


def param_count(kind: str, d: int) -> int:
    n = sum(r * c for _, (r, c) in _op_shapes(kind, d))
    if kind == "GIN":
        n += 1
    if kind == "GPRGNN":
        n += 2
    return n


# ---------------------------------------------------------------------------
# attention helpers over the (src, dst) edge list

def _attend(scores: Tensor, hw: Tensor, hop: HopOperators) -> Tensor:
    """Softmax scores within each destination's neighborhood, sum messages."""
    alpha = tt.segment_softmax(scores, hop.dst, hop.n)
    return tt.weighted_spmm(hop.pattern, alpha, hw)


def _split_rows(a: Tensor, d: int) -> tuple[Tensor, Tensor]:
    """A stacked (2d x c) parameter as its destination / source halves."""
    return (tt.gather_rows(a, np.arange(d)),
            tt.gather_rows(a, np.arange(d, 2 * d)))


def _edge_score_sum(per_dst: Tensor, per_src: Tensor, hop: HopOperators) -> Tensor:
    """per_dst[dst] + per_src[src] for every edge.

    Computing the per-node terms before gathering keeps the per-edge traffic
    at the projected width — a single scalar for the linear attention forms —
    rather than concatenating full feature rows per edge.
    """
    return tt.add(tt.gather_rows(per_dst, hop.dst),
                  tt.gather_rows(per_src, hop.src))


def _gat_scores(hw: Tensor, a: Tensor, hop: HopOperators, slope: float) -> Tensor:
    a_dst, a_src = _split_rows(a, hw.data.shape[1])
    return tt.leakyrelu(_edge_score_sum(tt.matmul(hw, a_dst),
                                        tt.matmul(hw, a_src), hop), slope)


def agg_forward(kind: str, params: OpParams, ctx: OpContext) -> Tensor:
    """Apply one aggregation operator; output is n x d1."""
    if params.kind != kind:
        raise ValueError(f"params built for {params.kind}, not {kind}")
    sc = ctx.scalars
    hop = ctx.hop
    h = tt.dropout(ctx.h_prev, ctx.dropout, ctx.train, ctx.rng)
    t = params.tensors

    def act(x: Tensor) -> Tensor:
        return apply_activation(x, ctx.activation, sc.leaky_slope)

    if kind in ("SAGE", "SAGE_SUM", "SAGE_MAX"):
        if kind == "SAGE":
            nbr = tt.spmm(hop.m_row, h)
        elif kind == "SAGE_SUM":
            nbr = tt.spmm(hop.adj, h)
        else:
            nbr = tt.segment_max(tt.gather_rows(h, hop.src), hop.dst, hop.n)
        return act(tt.matmul(tt.concat_cols([h, nbr]), t["W"]))

    if kind == "GCN":
        return act(tt.matmul(tt.spmm(hop.p_sym, h), t["W"]))

    if kind == "GIN":
        ego = tt.add(h, tt.mul_scalar(h, t["eps"]))  # (1 + eps) * h
        x = tt.add(ego, tt.spmm(hop.adj, h))
        return tt.matmul(tt.relu(tt.matmul(x, t["W1"])), t["W2"])

    if kind in ("GAT", "GAT_SYM", "GAT_COS", "GAT_LIN", "GAT_GEN_LIN",
                "SUPERGAT", "GENIEPATH"):
        hw = tt.matmul(h, t["W"])
        if kind == "GAT":
            e = _gat_scores(hw, t["a"], hop, sc.leaky_slope)
        elif kind == "GAT_SYM":
            a_dst, a_src = _split_rows(t["a"], hw.data.shape[1])
            s_dst, s_src = tt.matmul(hw, a_dst), tt.matmul(hw, a_src)
            fwd = tt.leakyrelu(_edge_score_sum(s_dst, s_src, hop), sc.leaky_slope)
            rev = tt.leakyrelu(_edge_score_sum(s_src, s_dst, hop), sc.leaky_slope)
            e = tt.add(fwd, rev)
        elif kind == "GAT_COS":
            e = tt.cosine_rows(tt.gather_rows(hw, hop.dst),
                               tt.gather_rows(hw, hop.src))
        elif kind == "GAT_LIN":
            e = _edge_score_sum(tt.tanh(tt.matmul(hw, t["a_l"])),
                                tt.tanh(tt.matmul(hw, t["a_r"])), hop)
        elif kind == "GAT_GEN_LIN":
            mix = _edge_score_sum(tt.matmul(h, t["W_l"]),
                                  tt.matmul(h, t["W_r"]), hop)
            e = tt.matmul(tt.tanh(mix), t["w_g"])
        elif kind == "SUPERGAT":
            dots = tt.row_sum(tt.hadamard(tt.gather_rows(hw, hop.dst),
                                          tt.gather_rows(hw, hop.src)))
            e = tt.scale(dots, 1.0 / np.sqrt(hw.data.shape[1]))
        else:  # GENIEPATH breadth step + multiplicative gate
            mix = _edge_score_sum(tt.matmul(h, t["W_s"]),
                                  tt.matmul(h, t["W_n"]), hop)
            e = tt.matmul(tt.tanh(mix), t["v"])
            m = _attend(e, hw, hop)
            gate = tt.sigmoid(tt.matmul(tt.concat_cols([h, m]), t["W_gate"]))
            return tt.hadamard(gate, tt.tanh(tt.matmul(m, t["W_t"])))
        return act(_attend(e, hw, hop))

    if kind == "GCNII":
        beta = float(np.log(sc.gcnii_lambda / ctx.layer_index + 1.0))
        mixed = tt.add(tt.scale(tt.spmm(hop.p_sym, h), 1.0 - sc.gcnii_alpha),
                       tt.scale(ctx.h0, sc.gcnii_alpha))
        return act(tt.add(tt.scale(mixed, 1.0 - beta),
                          tt.scale(tt.matmul(mixed, t["W"]), beta)))

    if kind == "FAGCN":
        g_dst, g_src = _split_rows(t["g"], h.data.shape[1])
        coef = tt.tanh(_edge_score_sum(tt.matmul(h, g_dst),
                                       tt.matmul(h, g_src), hop))
        coef = tt.scale(coef, hop.edge_inv_sqrt_deg)
        agg = tt.weighted_spmm(hop.pattern, coef, h)
        return tt.add(tt.scale(ctx.h0, sc.fagcn_eps), agg)

    if kind == "GPRGNN":
        return tt.add(tt.mul_scalar(h, t["gamma_a"]),
                      tt.mul_scalar(tt.spmm(hop.p_sym, h), t["gamma_b"]))

    if kind == "GCN_CHEB":
        ph = tt.spmm(hop.p_sym, h)
        lh = tt.sub(ph, h)                       # (P - I) H
        llh = tt.sub(tt.spmm(hop.p_sym, lh), lh)
        t2h = tt.sub(tt.scale(llh, 2.0), h)      # (2 L^2 - I) H
        out = tt.add(tt.add(tt.matmul(h, t["theta0"]), tt.matmul(lh, t["theta1"])),
                     tt.matmul(t2h, t["theta2"]))
        return act(out)

    if kind == "APPNP":
        z = h
        for _ in range(sc.appnp_iters):
            z = tt.add(tt.scale(tt.spmm(hop.p_sym, z), 1.0 - sc.appnp_alpha),
                       tt.scale(h, sc.appnp_alpha))
        return z

    if kind == "SGC":
        return tt.matmul(tt.spmm(hop.p_sym, h), t["W"])

    raise ValueError(f"unknown aggregation op '{kind}'")


# ---------------------------------------------------------------------------
# macro combination: per-layer gates + a fuser over all layer outputs

def init_fuser_params(kind: str, n_layers: int, d: int,
                      rng: np.random.Generator) -> OpParams:
    if kind == "l_concat":
        return OpParams(kind, {"W": glorot_uniform(rng, n_layers * d, d)})
    if kind == "l_max":
        return OpParams(kind, {})
    if kind == "l_lstm":
        return OpParams(kind, {
            "W_x": glorot_uniform(rng, d, 4 * d),
            "W_h": glorot_uniform(rng, d, 4 * d),
            "q": glorot_uniform(rng, d, 1),
            "W_proj": glorot_uniform(rng, d, d),
        })
    raise ValueError(f"unknown fuser '{kind}'")


def fuser_param_count(kind: str, n_layers: int, d: int) -> int:
    if kind == "l_concat":
        return n_layers * d * d
    if kind == "l_max":
        return 0
    if kind == "l_lstm":
        return d * 4 * d * 2 + d + d * d
    raise ValueError(f"unknown fuser '{kind}'")


def apply_gate(kind: str, h: Tensor) -> Tensor:
    """l_skip passes the layer output through; l_zero blanks its slot."""
    if kind == "l_skip":
        return h
    if kind == "l_zero":
        return tt.zeros(*h.data.shape)
    raise ValueError(f"unknown gate '{kind}'")


def _lstm_steps(slots: Sequence[Tensor], t: dict[str, Tensor]) -> list[Tensor]:
    d = slots[0].data.shape[1]
    n = slots[0].data.shape[0]
    h = tt.zeros(n, d)
    c = tt.zeros(n, d)
    outs = []
    for x in slots:
        z = tt.add(tt.matmul(x, t["W_x"]), tt.matmul(h, t["W_h"]))
        i = tt.sigmoid(tt.slice_cols(z, 0, d))
        f = tt.sigmoid(tt.slice_cols(z, d, 2 * d))
        g = tt.tanh(tt.slice_cols(z, 2 * d, 3 * d))
        o = tt.sigmoid(tt.slice_cols(z, 3 * d, 4 * d))
        c = tt.add(tt.hadamard(f, c), tt.hadamard(i, g))
        h = tt.hadamard(o, tt.tanh(c))
        outs.append(h)
    return outs


def fuser_forward(kind: str, params: OpParams, slots: Sequence[Tensor]) -> Tensor:
    """Combine per-layer slots (already gated) into the final embedding."""
    if params.kind != kind:
        raise ValueError(f"params built for {params.kind}, not {kind}")
    if not slots:
        raise ValueError("fuser needs at least one slot")
    if kind == "l_concat":
        return tt.matmul(tt.concat_cols(list(slots)), params.tensors["W"])
    if kind == "l_max":
        out = slots[0]
        for s in slots[1:]:
            out = tt.maximum(out, s)
        return out
    if kind == "l_lstm":
        t = params.tensors
        outs = _lstm_steps(slots, t)
        scores = tt.concat_cols([tt.matmul(o, t["q"]) for o in outs])  # n x L
        w = tt.softmax_rows(scores)
        mixed = tt.mul_rows(outs[0], tt.slice_cols(w, 0, 1))
        for j in range(1, len(outs)):
            mixed = tt.add(mixed, tt.mul_rows(outs[j], tt.slice_cols(w, j, j + 1)))
        return tt.matmul(mixed, t["W_proj"])
    raise ValueError(f"unknown fuser '{kind}'")


def catalog(d: int, n_layers: int = 3) -> list[dict]:
    """Introspection rows for the `ops list` command."""
    rows = []
    for kind in AGG_OPS:
        rows.append({"kind": kind, "group": "agg", "tag": op_tag(kind),
                     "params": param_count(kind, d)})
    for kind in GATE_OPS:
        rows.append({"kind": kind, "group": "gate", "tag": "macro", "params": 0})
    for kind in FUSER_OPS:
        rows.append({"kind": kind, "group": "fuser", "tag": "macro",
                     "params": fuser_param_count(kind, n_layers, d)})
    return rows
