import numpy as np
import pytest

from bpcluster.graph import Graph
from bpcluster.network import TensorNetwork
from bpcluster.tensor import LabeledTensor


def random_tree(n, rng):
    """Uniform-ish random tree: vertex k attaches to a random earlier vertex."""
    edges = [(int(rng.integers(0, k)), k) for k in range(1, n)]
    return Graph.from_edges(n, edges)


def random_network(g, chi, rng, *, complex_entries=False, low=0.1):
    """Random tensors on ``g``; positive entries unless ``complex_entries``."""
    dims = {e: (chi if isinstance(chi, int) else int(rng.choice(chi))) for e in range(g.n_edges)}
    tensors = {}
    for v in range(g.n_vertices):
        shape = tuple(dims[e] for e in g.incident[v])
        data = rng.uniform(low, 1.0, size=shape)
        if complex_entries:
            data = data * np.exp(0.4j * rng.standard_normal(shape))
        tensors[v] = LabeledTensor(g.incident[v], data)
    return TensorNetwork(g, tensors)


def ring_graph(n):
    return Graph.from_edges(n, [(k, (k + 1) % n) for k in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
