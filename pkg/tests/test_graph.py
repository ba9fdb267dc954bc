import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geosink.errors import DimensionMismatch, DuplicatePoints, NegativeWeight, ValidationError
from geosink.graph import (
    estimate_lambda_max,
    gershgorin_bound,
    is_connected,
    knn_alpha_decay_graph,
    knn_indices,
    laplacian,
)

from conftest import path_adjacency, random_connected_graph


def dense_alpha_decay(X, k, alpha):
    """Direct transcription of the kernel formula with an O(n^2) neighbour search."""
    n = X.shape[0]
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    nbrs = []
    eps = np.empty(n)
    for i in range(n):
        order = sorted((D[i, j], j) for j in range(n) if j != i)
        nbrs.append({j for _, j in order[:k]})
        eps[i] = order[k - 1][0]
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and (j in nbrs[i] or i in nbrs[j]):
                A[i, j] = 0.5 * math.exp(-((D[i, j] / eps[i]) ** alpha)) + 0.5 * math.exp(
                    -((D[i, j] / eps[j]) ** alpha))
    return A


def test_collinear_three_points():
    A = knn_alpha_decay_graph(np.array([[0.0], [1.0], [2.0]]), k=1, alpha=2.0).toarray()
    assert A[0, 1] == pytest.approx(math.exp(-1)) and A[1, 2] == pytest.approx(math.exp(-1))
    assert A[0, 2] == 0.0 and A[2, 0] == 0.0
    assert np.all(np.diag(A) == 0)


def test_duplicate_points_rejected():
    with pytest.raises(DuplicatePoints):
        knn_alpha_decay_graph(np.array([[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]]), k=1)


def test_ragged_input_rejected():
    with pytest.raises(DimensionMismatch):
        knn_alpha_decay_graph([[0.0, 1.0], [2.0]], k=1)


@pytest.mark.parametrize("k", [3, 10])
def test_k_must_be_below_n(k):
    with pytest.raises(ValidationError, match="k must be < n"):
        knn_alpha_decay_graph(np.arange(3.0)[:, None], k=k)


def test_nonfinite_rejected():
    with pytest.raises(ValidationError):
        knn_alpha_decay_graph(np.array([[0.0], [np.nan], [1.0]]), k=1)


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_transcription(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 3))
    A = knn_alpha_decay_graph(X, k=5, alpha=10.0).toarray()
    np.testing.assert_allclose(A, dense_alpha_decay(X, 5, 10.0), rtol=1e-12, atol=1e-300)


def test_ties_go_to_lower_index():
    # integer grid: many equal distances
    X = np.array([[i, j] for i in range(5) for j in range(5)], dtype=float)
    idx, dist = knn_indices(X, 4)
    for i in range(len(X)):
        d = np.sqrt(((X - X[i]) ** 2).sum(1))
        d[i] = np.inf
        expect = np.lexsort((np.arange(len(X)), d))[:4]
        assert list(idx[i]) == list(expect)
    np.testing.assert_allclose(A := knn_alpha_decay_graph(X, 4, 40.0).toarray(),
                               dense_alpha_decay(X, 4, 40.0), rtol=1e-12)
    assert np.all(A == A.T)


def test_chunked_search_matches_single_block(monkeypatch):
    import geosink.graph as g

    X = np.random.default_rng(3).standard_normal((300, 4))
    full = knn_indices(X, 6)
    monkeypatch.setattr(g, "_CHUNK_BYTES", 2048)
    chunked = knn_indices(X, 6)
    assert np.array_equal(full[0], chunked[0])
    np.testing.assert_allclose(full[1], chunked[1], rtol=0, atol=0)


@given(
    arrays(np.float64, st.tuples(st.integers(6, 40), st.integers(1, 4)),
           elements=st.floats(-100, 100, allow_nan=False, width=64)),
    st.integers(1, 5),
)
def test_graph_invariants(X, k):
    # drop exact duplicates, they are a separate error path
    X = np.unique(X, axis=0)
    if X.shape[0] <= k + 1:
        return
    try:
        A = knn_alpha_decay_graph(X, k, 40.0)
    except DuplicatePoints:
        return
    assert (A != A.T).nnz == 0
    assert np.all(A.diagonal() == 0)
    assert A.data.min() >= 0
    assert A.nnz <= 2 * k * X.shape[0]


def test_laplacian_two_node():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    expect = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for kind in ("combinatorial", "normalized"):
        np.testing.assert_array_equal(laplacian(A, kind).matrix.toarray(), expect)
    assert laplacian(A, "normalized").lambda_max_bound == 2.0


def test_path_row_sums_zero():
    L = laplacian(path_adjacency(3)).matrix
    np.testing.assert_allclose(np.asarray(L.sum(axis=1)).ravel(), 0.0, atol=1e-15)


@pytest.mark.parametrize("seed", range(4))
def test_combinatorial_invariants(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((150, 3))
    L = laplacian(knn_alpha_decay_graph(X), "combinatorial").matrix
    scale = np.abs(L.data).max()
    assert np.abs(L @ np.ones(150)).max() <= 1e-10 * scale
    xs = rng.standard_normal((150, 100))
    assert np.einsum("ij,ij->j", xs, L @ xs).min() >= -1e-10


def test_normalized_isolated_vertex_identity_row():
    A = sp.lil_matrix((3, 3))
    A[0, 1] = A[1, 0] = 2.0
    L = laplacian(A.tocsr(), "normalized").matrix.toarray()
    np.testing.assert_allclose(L[2], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(L[:2, :2], [[1.0, -1.0], [-1.0, 1.0]])


def test_normalized_spectrum_in_unit_interval_times_two():
    A = random_connected_graph(60, np.random.default_rng(1))
    lam = np.linalg.eigvalsh(laplacian(A, "normalized").matrix.toarray())
    assert lam.min() >= -1e-12 and lam.max() <= 2 + 1e-12


def test_negative_weight_rejected():
    A = sp.csr_matrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(NegativeWeight):
        laplacian(A)


def test_asymmetric_rejected():
    with pytest.raises(ValidationError):
        laplacian(sp.csr_matrix(np.array([[0.0, 1.0], [0.5, 0.0]])))


def test_unknown_kind():
    with pytest.raises(ValidationError):
        laplacian(path_adjacency(3), "random-walk")


def test_lambda_max_two_node():
    lam = estimate_lambda_max(sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]])))
    assert 2.0 <= lam <= 2.02


def test_lambda_max_zero_matrix():
    assert estimate_lambda_max(sp.csr_matrix((4, 4))) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_lambda_max_is_upper_bound(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 200))
    L = laplacian(random_connected_graph(n, rng)).matrix
    top = np.linalg.eigvalsh(L.toarray()).max()
    lam = estimate_lambda_max(L)
    assert top <= lam <= gershgorin_bound(L) + 1e-12
    assert lam <= 1.01 * top * (1 + 1e-6) or lam == gershgorin_bound(L)


def test_lambda_max_on_knn_graph():
    X = np.random.default_rng(0).standard_normal((200, 3))
    lap = laplacian(knn_alpha_decay_graph(X))
    assert np.linalg.eigvalsh(lap.matrix.toarray()).max() <= lap.lambda_max_bound


def test_is_connected():
    assert is_connected(path_adjacency(5))
    A = sp.block_diag([path_adjacency(3), path_adjacency(2)]).tocsr()
    assert not is_connected(A)
