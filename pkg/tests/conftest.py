import numpy as np
import pytest

from pdmcf.graph import Topology
from pdmcf.instance import ProblemInstance
from pdmcf.utilities import UtilitySpec


def ring_topology(n, cap=1.0):
    """Bidirectional ring: edges i -> i+1 and i+1 -> i."""
    edges = []
    for i in range(n):
        j = (i + 1) % n
        edges += [(i, j), (j, i)]
    return Topology.from_edges(n, edges, np.full(len(edges), cap))


def random_topology(rng, n, extra=None):
    """Strongly connected: a bidirectional ring plus random extra arcs."""
    pairs = set()
    for i in range(n):
        j = (i + 1) % n
        pairs |= {(i, j), (j, i)}
    extra = n if extra is None else extra
    for _ in range(extra):
        a, b = rng.choice(n, size=2, replace=False)
        pairs.add((int(a), int(b)))
    edges = sorted(pairs)
    caps = rng.uniform(0.5, 5.0, size=len(edges))
    return Topology.from_edges(n, edges, caps)


def random_weights(rng, n):
    W = rng.uniform(0.3, 3.0, size=(n, n))
    np.fill_diagonal(W, 0.0)
    return W


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_node():
    topo = Topology.from_edges(2, [(0, 1), (1, 0)], [1.0, 1.0])
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    return ProblemInstance(topo, UtilitySpec("log", W))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS, key=str):
            terminalreporter.write_line(RESULTS[key])
