"""Shared fixtures for the test suite.

Provides small deterministic graphs (stochastic block models), split sets,
and a pre-trained compact supernet, so individual test modules stay fast.
Also registers a terminal-summary hook that echoes one PASS/FAIL line per
acceptance criterion after the run.
"""

import numpy as np
import pytest

from heg.graphs import Graph, SplitSet, generate_splits, sbm_generate
from heg.shrink import ShrinkPlan, progressive_train
from heg.supernet import SearchConfig, Supernet

# Collected by tests/test_acceptance.py; printed at the end of the run.
ACCEPTANCE_LINES = []


def record_criterion(number: int, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"CRITERION {number}: {status}" + (f" - {detail}" if detail else "")
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def record_skip(number: int, detail: str) -> None:
    line = f"CRITERION {number}: SKIP - {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def two_block_graph(seed: int = 3, n_per: int = 20, sigma: float = 1.0) -> Graph:
    """A small 2-class graph with mildly heterophilic structure."""
    mixing = np.array([[0.05, 0.25], [0.25, 0.05]])
    means = np.vstack([np.ones(8), -np.ones(8)])
    return sbm_generate([n_per, n_per], mixing, means, sigma, seed=seed,
                        name="two-block")


def three_block_graph(seed: int = 11, n_per: int = 30) -> Graph:
    """A 3-class heterophilic graph used by selection / pipeline tests."""
    mixing = np.array([
        [0.02, 0.20, 0.02],
        [0.20, 0.02, 0.20],
        [0.02, 0.20, 0.02],
    ])
    rng = np.random.default_rng(5)
    means = rng.normal(size=(3, 10))
    return sbm_generate([n_per] * 3, mixing, means, 1.2, seed=seed,
                        name="three-block")


@pytest.fixture(scope="session")
def tiny_graph() -> Graph:
    return two_block_graph()


@pytest.fixture(scope="session")
def tiny_splits(tiny_graph) -> SplitSet:
    return generate_splits(tiny_graph, count=3, seed=1)


@pytest.fixture(scope="session")
def sbm3() -> Graph:
    return three_block_graph()


@pytest.fixture(scope="session")
def sbm3_splits(sbm3) -> SplitSet:
    return generate_splits(sbm3, count=3, seed=2)


@pytest.fixture(scope="session")
def compact_net(sbm3, sbm3_splits):
    """A supernet trained briefly and shrunk to a few candidates per edge.

    Session-scoped because several selection/ablation tests reuse it; tests
    that mutate the net must restore it from its own checkpoint first.
    """
    config = SearchConfig(n_layers=2, d1=8, seed=7, shrink_rounds=2,
                          epochs_per_round=4, drop_per_round=7,
                          compact_epochs=4, dropout=0.2)
    net = Supernet.build(sbm3, config)
    plan = ShrinkPlan.from_config(config)
    net, log, history = progressive_train(net, plan, sbm3_splits[0])
    return net, log, history


@pytest.fixture()
def compact_checkpoint(tmp_path, compact_net):
    net, _, _ = compact_net
    path = tmp_path / "compact.json"
    net.save(path, epoch=net.config.total_epochs)
    return path
