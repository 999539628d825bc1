"""Tests for the supernet: mixed edges, relaxation modes, the temperature
schedule, bi-level training steps, and checkpoint round-trips."""

import json

import numpy as np
import pytest

import heg.tensor as tt
from heg.ops import AGG_OPS, FUSER_OPS, GATE_OPS
from heg.optim import Adam, Optimizer
from heg.rng import RngHub, stream
from heg.supernet import (CHECKPOINT_FORMAT, MixedEdge, SearchConfig,
                          Supernet, bilevel_epoch, make_search_optimizers,
                          temperature)
from heg.tensor import Tensor, gradient_check


def small_config(**kw):
    base = dict(n_layers=2, d1=8, seed=5, shrink_rounds=2, epochs_per_round=3,
                drop_per_round=2, compact_epochs=4, dropout=0.2)
    base.update(kw)
    return SearchConfig(**base)


# ---------------------------------------------------------------- config


def test_config_roundtrip_through_dict():
    cfg = small_config(tau_max=9.0, tau_min=3.0)
    again = SearchConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_config_total_epochs():
    cfg = small_config()
    assert cfg.total_epochs == 2 * 3 + 4


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(n_layers=0)
    with pytest.raises(ValueError):
        small_config(dropout=1.5)
    with pytest.raises(ValueError):
        small_config(tau_max=2.0, tau_min=4.0)


# ---------------------------------------------------------------- temperature


def test_temperature_schedule_endpoints_and_midpoint():
    cfg = small_config()  # tau 8 -> 4 by default
    total = cfg.total_epochs
    assert temperature(0, total, cfg) == 8.0
    assert temperature(total, total, cfg) == 4.0
    assert temperature(total // 2, total, cfg) == pytest.approx(
        8.0 - 4.0 * (total // 2) / total)


def test_temperature_rejects_out_of_range_epoch():
    cfg = small_config()
    with pytest.raises(ValueError):
        temperature(-1, cfg.total_epochs, cfg)
    with pytest.raises(ValueError):
        temperature(cfg.total_epochs + 1, cfg.total_epochs, cfg)


# ---------------------------------------------------------------- mixed edges


def edge_with_alphas(alphas, kinds=("A", "B", "C")):
    from heg.ops import OpParams
    e = MixedEdge.build("micro/1", "micro", kinds, RngHub(3),
                        lambda k: OpParams(k, {}))
    e.alpha.data = np.asarray([alphas], dtype=float)
    return e


def test_weights_sum_to_one_every_mode():
    e = edge_with_alphas([0.3, -0.2, 1.4])
    for mode, noise in (("expectation", None),
                        ("gumbel", stream(0, "noise"))):
        _, w = e.weight_tensor(tau=5.0, noise_rng=noise)
        assert abs(w.data.sum() - 1.0) < 1e-9


def test_equal_alphas_give_uniform_weights():
    e = edge_with_alphas([0.0, 0.0, 0.0])
    w = e.expectation_weights(tau=4.0)
    assert all(abs(v - 1 / 3) < 1e-12 for v in w.values())


def test_low_temperature_concentrates_mass():
    e = edge_with_alphas([1.0, 0.0, -1.0])
    w = e.expectation_weights(tau=0.01)
    assert w["A"] > 0.999


def test_masked_candidates_get_no_weight():
    e = edge_with_alphas([0.0, 0.0, 0.0])
    e.mask.add("B")
    w = e.expectation_weights(tau=4.0)
    assert set(w) == {"A", "C"}
    assert abs(sum(w.values()) - 1.0) < 1e-12


def test_all_masked_is_an_error():
    e = edge_with_alphas([0.0, 0.0], kinds=("A", "B"))
    e.mask.update({"A", "B"})
    with pytest.raises(ValueError, match="masked"):
        e.expectation_weights(tau=4.0)
    e2 = edge_with_alphas([0.0, 0.0], kinds=("A", "B"))
    with pytest.raises(ValueError, match="masked"):
        e2.expectation_weights(tau=4.0, exclude=frozenset({"A", "B"}))


def test_gumbel_mode_is_seeded_and_reproducible():
    e = edge_with_alphas([0.5, -0.5, 0.0])
    w1 = e.weight_tensor(5.0, noise_rng=stream(9, "g"))[1].data
    w2 = e.weight_tensor(5.0, noise_rng=stream(9, "g"))[1].data
    w3 = e.weight_tensor(5.0, noise_rng=stream(10, "g"))[1].data
    assert np.array_equal(w1, w2)
    assert not np.array_equal(w1, w3)


def test_discrete_mode_bypasses_blending():
    e = edge_with_alphas([0.0, 0.0, 0.0])
    outputs = {"A": Tensor(np.full((2, 2), 3.0)),
               "B": Tensor(np.full((2, 2), 5.0)),
               "C": Tensor(np.full((2, 2), 7.0))}
    calls = []

    def run(kind):
        calls.append(kind)
        return outputs[kind]

    out = e.blend(4.0, "discrete", run, discrete_kind="B")
    assert out is outputs["B"]  # bit-identical object, no mixing arithmetic
    assert calls == ["B"]  # unpicked candidates are never evaluated


def test_leave_one_out_excludes_candidate():
    e = edge_with_alphas([0.0, 0.0, 0.0])
    outputs = {k: Tensor(np.full((1, 1), v))
               for k, v in {"A": 1.0, "B": 2.0, "C": 4.0}.items()}
    out = e.blend(4.0, "leave_one_out", lambda k: outputs[k], exclude=frozenset({"C"}))
    assert out.item() == pytest.approx((1.0 + 2.0) / 2)


def test_singleton_leave_one_out_weight_is_exactly_one():
    e = edge_with_alphas([0.7, 0.1], kinds=("A", "B"))
    e.mask.add("B")
    _, w = e.weight_tensor(4.0)
    assert np.array_equal(w.data, [[1.0]])


def test_drop_removes_candidates_and_slices_alpha():
    e = edge_with_alphas([0.1, 0.2, 0.3], kinds=("A", "B", "C"))
    opt = Adam(0.01)
    e.alpha.grad = np.array([[1.0, 2.0, 3.0]])
    opt.step([e.alpha])
    e.drop(["B"], alpha_opt=opt)
    assert e.candidates == ["A", "C"]
    assert e.alpha.data.shape == (1, 2)
    slot = opt.export_slot(e.alpha)
    assert slot["m"].shape == (1, 2)  # moments sliced alongside alpha


def test_drop_cannot_empty_edge():
    e = edge_with_alphas([0.1, 0.2], kinds=("A", "B"))
    with pytest.raises(ValueError):
        e.drop(["A", "B"])


def test_alpha_path_gradient_check():
    e = edge_with_alphas([0.4, -0.3, 0.2])
    parts = [Tensor(np.random.default_rng(i).normal(size=(3, 2)))
             for i in range(3)]

    def f(rng):
        _, w = e.weight_tensor(tau=3.0)
        mixed = tt.weighted_sum(w, parts)
        return tt.sum_all(tt.tanh(mixed))

    assert gradient_check(f, [e.alpha], seed=2) < 1e-6


# ---------------------------------------------------------------- supernet


def test_build_structure(tiny_graph):
    net = Supernet.build(tiny_graph, small_config())
    edges = net.edges()
    ids = [e.edge_id for e in edges]
    assert ids == ["micro/1", "micro/2", "gate/1", "fuser"]
    assert edges[0].candidates == list(AGG_OPS)
    assert edges[2].candidates == list(GATE_OPS)
    assert edges[3].candidates == list(FUSER_OPS)
    assert net.stem.shape == (tiny_graph.d0, 8)
    assert net.clf.shape == (8, tiny_graph.p)


def test_build_is_deterministic(tiny_graph):
    a = Supernet.build(tiny_graph, small_config())
    b = Supernet.build(tiny_graph, small_config())
    for (na, ta), (nb, tb) in zip(a.named_w_parameters(), b.named_w_parameters()):
        assert na == nb
        assert np.array_equal(ta.data, tb.data)
    for ea, eb in zip(a.edges(), b.edges()):
        assert np.array_equal(ea.alpha.data, eb.alpha.data)


def test_param_partition_is_disjoint_and_complete(tiny_graph):
    net = Supernet.build(tiny_graph, small_config())
    net.assert_param_partition()
    w_ids = {id(p) for p in net.w_parameters()}
    a_ids = {id(p) for p in net.alpha_parameters()}
    assert not w_ids & a_ids
    assert len(a_ids) == len(net.edges())


def test_forward_shapes_and_determinism(tiny_graph):
    net = Supernet.build(tiny_graph, small_config())
    out1 = net.forward(6.0, "expectation")
    out2 = net.forward(6.0, "expectation")
    assert out1.shape == (tiny_graph.n, tiny_graph.p)
    assert np.array_equal(out1.data, out2.data)


def test_forward_gumbel_differs_across_epoch_scopes(tiny_graph):
    net = Supernet.build(tiny_graph, small_config())
    a = net.forward(6.0, "gumbel", net.hub.scoped("w/epoch=0"), train=False)
    b = net.forward(6.0, "gumbel", net.hub.scoped("w/epoch=1"), train=False)
    assert not np.array_equal(a.data, b.data)


def test_bilevel_epoch_updates_both_parameter_sets(tiny_graph, tiny_splits):
    net = Supernet.build(tiny_graph, small_config())
    opt_w, opt_a = make_search_optimizers(net)
    stem_before = net.stem.data.copy()
    alpha_before = net.edges()[0].alpha.data.copy()
    tl, vl = bilevel_epoch(net, tiny_splits[0], 0, opt_w, opt_a)
    assert np.isfinite(tl) and np.isfinite(vl)
    assert not np.array_equal(net.stem.data, stem_before)
    assert not np.array_equal(net.edges()[0].alpha.data, alpha_before)
    # gradients are cleared after each alternation
    assert all(p.grad is None for p in net.w_parameters())
    assert all(p.grad is None for p in net.alpha_parameters())


def test_training_is_reproducible(tiny_graph, tiny_splits):
    def run():
        net = Supernet.build(tiny_graph, small_config())
        opt_w, opt_a = make_search_optimizers(net)
        return [bilevel_epoch(net, tiny_splits[0], e, opt_w, opt_a)
                for e in range(3)]

    assert run() == run()


def test_checkpoint_resume_is_bit_identical(tiny_graph, tiny_splits, tmp_path):
    cfg = small_config()
    split = tiny_splits[0]

    net = Supernet.build(tiny_graph, cfg)
    opt_w, opt_a = make_search_optimizers(net)
    for e in range(2):
        bilevel_epoch(net, split, e, opt_w, opt_a)
    path = tmp_path / "ck.json"
    net.save(path, epoch=2, opt_w=opt_w, opt_alpha=opt_a)
    reference = [bilevel_epoch(net, split, e, opt_w, opt_a) for e in (2, 3)]

    opt_w2, opt_a2 = Adam(cfg.lr_w, cfg.wd_w), Adam(cfg.lr_alpha, cfg.wd_alpha)
    net2, epoch = Supernet.load(path, tiny_graph, opt_w=opt_w2, opt_alpha=opt_a2)
    assert epoch == 2
    resumed = [bilevel_epoch(net2, split, e, opt_w2, opt_a2) for e in (2, 3)]
    assert resumed == reference  # float-for-float equal continuation


def test_checkpoint_restores_masks_and_drops(tiny_graph, tmp_path):
    net = Supernet.build(tiny_graph, small_config())
    net.edges()[0].drop(["GCN", "GIN"])
    net.edges()[0].mask.add("SAGE")
    path = tmp_path / "ck.json"
    net.save(path, epoch=0)
    net2, _ = Supernet.load(path, tiny_graph)
    e0 = net2.edges()[0]
    assert "GCN" not in e0.candidates and "GIN" not in e0.candidates
    assert e0.mask == {"SAGE"}
    assert np.array_equal(e0.alpha.data, net.edges()[0].alpha.data)


def test_checkpoint_rejects_wrong_graph(tiny_graph, sbm3, tmp_path):
    net = Supernet.build(tiny_graph, small_config())
    path = tmp_path / "ck.json"
    net.save(path, epoch=0)
    with pytest.raises(ValueError, match="different graph"):
        Supernet.load(path, sbm3)


def test_checkpoint_rejects_foreign_format(tiny_graph, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ValueError, match="checkpoint"):
        Supernet.load(path, tiny_graph)


def test_checkpoint_format_tag():
    assert CHECKPOINT_FORMAT == "heg-supernet-checkpoint@1"


def test_genotype_forward_requires_match(tiny_graph):
    from heg.genotype import Genotype
    net = Supernet.build(tiny_graph, small_config())
    geno = Genotype(layers=["GCN", "FAGCN"], gates=["l_skip"], fuser="l_max")
    out = net.forward(4.0, "discrete", genotype=geno)
    assert out.shape == (tiny_graph.n, tiny_graph.p)
