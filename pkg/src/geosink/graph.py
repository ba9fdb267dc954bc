"""Affinity graphs over point clouds and their sparse Laplacians.

Sparse symmetric matrices are plain :class:`scipy.sparse.csr_matrix`
objects; ``indptr``/``indices``/``data`` are the row offsets, column
indices and values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DimensionMismatch, DuplicatePoints, NegativeWeight, ValidationError

LaplacianKind = Literal["combinatorial", "normalized"]

_CHUNK_BYTES = 64 * 2**20


@dataclass(frozen=True)
class GraphLaplacian:
    matrix: sp.csr_matrix
    kind: LaplacianKind
    lambda_max_bound: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def as_point_cloud(points) -> np.ndarray:
    """Validate and return an ``n x d`` float array."""
    try:
        arr = np.asarray(points, dtype=float)
    except ValueError as exc:  # ragged nested sequences
        raise DimensionMismatch(f"ragged point cloud: {exc}") from None
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"point cloud must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"point cloud must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("point cloud contains non-finite values")
    return arr


def knn_indices(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbours (self excluded), ties to the lower index.

    Returns ``(idx, dist)`` of shape ``n x k`` sorted by increasing distance.
    """
    x = as_point_cloud(points)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ValidationError("k must be < n" if k >= n else "k must be >= 1")
    sq = np.einsum("ij,ij->i", x, x)
    rows = max(1, min(n, _CHUNK_BYTES // (8 * n)))
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        block = x[start:stop]
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ x.T)
        np.maximum(d2, 0.0, out=d2)
        local = np.arange(stop - start)
        d2[local, local + start] = np.inf
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for r in range(stop - start):
            row = d2[r]
            below = np.flatnonzero(row < kth[r])
            tied = np.flatnonzero(row == kth[r])
            cand = np.concatenate([below, tied[: k - below.size]])
            # exact distances for the short list; the Gram expansion is only a filter
            exact = np.sqrt(((x[cand] - block[r]) ** 2).sum(axis=1))
            order = np.lexsort((cand, exact))
            idx[start + r] = cand[order]
            dist[start + r] = exact[order]
    return idx, dist


def knn_alpha_decay_graph(points, k: int = 5, alpha: float = 40.0) -> sp.csr_matrix:
    """Symmetrised alpha-decay affinity on the union of k-NN pairs.

    ``A_ij = (exp(-(d_ij/eps_i)**alpha) + exp(-(d_ij/eps_j)**alpha)) / 2`` for
    pairs where either point is among the other's ``k`` nearest neighbours;
    ``eps_i`` is the distance from ``x_i`` to its k-th neighbour.
    """
    x = as_point_cloud(points)
    n = x.shape[0]
    if k >= n:
        raise ValidationError("k must be < n")
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not alpha > 0:
        raise ValidationError("alpha must be > 0")
    idx, dist = knn_indices(x, k)
    eps = dist[:, -1]
    if np.any(eps == 0.0):
        bad = int(np.flatnonzero(eps == 0.0)[0])
        raise DuplicatePoints(f"point {bad} has zero k-NN bandwidth (duplicate points)")

    rows = np.repeat(np.arange(n), k)
    cols = idx.ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    pairs = np.unique(lo * n + hi)
    i, j = np.divmod(pairs, n)
    d = np.sqrt(((x[i] - x[j]) ** 2).sum(axis=1))
    with np.errstate(over="ignore"):  # far pairs: ratio**alpha -> inf, weight -> 0
        w = 0.5 * np.exp(-((d / eps[i]) ** alpha)) + 0.5 * np.exp(-((d / eps[j]) ** alpha))
    A = sp.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(n, n),
    ).tocsr()
    A.sort_indices()
    return A


def _check_symmetric(A: sp.spmatrix) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {A.shape}")
    if (A != A.T).nnz:
        raise ValidationError("matrix is not symmetric")
    return A


def laplacian(A, kind: LaplacianKind = "combinatorial") -> GraphLaplacian:
    """Combinatorial ``D - A`` or normalized ``I - D^-1/2 A D^-1/2`` Laplacian.

    Isolated vertices get an identity row in the normalized kind.
    """
    A = _check_symmetric(A)
    if A.nnz and A.data.min() < 0:
        raise NegativeWeight("adjacency has negative entries")
    deg = np.asarray(A.sum(axis=1)).ravel()
    n = A.shape[0]
    if kind == "combinatorial":
        L = (sp.diags(deg) - A).tocsr()
        L.sort_indices()
        return GraphLaplacian(L, kind, estimate_lambda_max(L))
    if kind == "normalized":
        deg = np.where(deg > 0, deg, 1.0)
        s = sp.diags(1.0 / np.sqrt(deg))
        L = (sp.identity(n, format="csr") - s @ A @ s).tocsr()
        L.sort_indices()
        return GraphLaplacian(L, kind, 2.0)
    raise ValidationError(f"unknown Laplacian kind {kind!r}")


def gershgorin_bound(L: sp.spmatrix) -> float:
    return float(np.abs(L).sum(axis=1).max()) if L.shape[0] else 0.0


def estimate_lambda_max(L, rtol: float = 1e-6, maxiter: int = 200) -> float:
    """Upper bound on the largest eigenvalue of a PSD matrix.

    Power iteration on the Rayleigh quotient, inflated by 1%; falls back to
    the Gershgorin row-sum bound if the iteration does not settle.
    """
    L = sp.csr_matrix(L, dtype=float)
    n = L.shape[0]
    if n == 0 or L.nnz == 0 or not np.any(L.data):
        return 0.0
    x = np.random.default_rng(0).uniform(0.5, 1.5, n)
    x[::2] *= -1.0
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(maxiter):
        y = L @ x
        rho = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        if rho > 0 and abs(rho - prev) <= rtol * rho:
            return min(1.01 * rho, gershgorin_bound(L))
        prev = rho
    return gershgorin_bound(L)


def is_connected(A: sp.spmatrix) -> bool:
    return connected_components(A, directed=False)[0] == 1
