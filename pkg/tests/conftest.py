import numpy as np
import pytest
import scipy.sparse as sp

from gnz.graph import Graph


def graph_from_dense(w) -> Graph:
    return Graph(sp.csr_matrix(np.asarray(w, dtype=np.float64)))


def random_graph(n: int, seed: int, extra_edges: int | None = None, weighted: bool = True) -> Graph:
    """Random symmetric graph with a path backbone so no node is isolated."""
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = rng.uniform(0.2, 1.0) if weighted else 1.0
    m = extra_edges if extra_edges is not None else 2 * n
    for _ in range(m):
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        val = rng.uniform(0.05, 1.0) if weighted else 1.0
        w[i, j] = w[j, i] = val
    # keep weights exactly representable in f32 so GNZG round trips bitwise
    w = w.astype(np.float32).astype(np.float64)
    return graph_from_dense(w)


def two_component_graph(sizes=(4, 3), seed=0) -> Graph:
    """Disconnected graph: one random component per size."""
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    w = np.zeros((n, n))
    offset = 0
    for size in sizes:
        for i in range(size - 1):
            a, b = offset + i, offset + i + 1
            w[a, b] = w[b, a] = rng.uniform(0.3, 1.0)
        offset += size
    return graph_from_dense(w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
