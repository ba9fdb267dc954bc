import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import settings

from geosink.graph import GraphLaplacian, knn_alpha_decay_graph, laplacian

settings.register_profile("geosink", deadline=None, max_examples=40)
settings.load_profile("geosink")


def two_node(kind="combinatorial"):
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return laplacian(A, kind)


def path_adjacency(n, w=1.0):
    i = np.arange(n - 1)
    A = sp.coo_matrix((np.full(n - 1, w), (i, i + 1)), shape=(n, n))
    return (A + A.T).tocsr()


def random_connected_graph(n, rng, extra=2):
    """Random spanning tree plus ``extra * n`` random edges with weights in (0.1, 1]."""
    rows, cols = [], []
    perm = rng.permutation(n)
    for a in range(1, n):
        rows.append(perm[a])
        cols.append(perm[rng.integers(0, a)])
    for _ in range(extra * n):
        i, j = rng.integers(0, n, 2)
        if i != j:
            rows.append(i)
            cols.append(j)
    w = rng.uniform(0.1, 1.0, len(rows))
    A = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    A = A.maximum(A.T).tocsr()
    A.setdiag(0)
    A.eliminate_zeros()
    return A


def cloud_graph(n, rng, d=2, k=5, kind="combinatorial"):
    X = rng.standard_normal((n, d))
    return X, laplacian(knn_alpha_decay_graph(X, k, 40.0), kind)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = [
    "ACCEPTANCE", "GraphLaplacian", "two_node", "path_adjacency", "random_connected_graph",
    "cloud_graph",
]


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
