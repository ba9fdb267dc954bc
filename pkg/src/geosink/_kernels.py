"""Compiled sparse kernels for the Chebyshev recurrence."""

import numba
import numpy as np


@numba.njit(cache=True)
def _cheb_step_2d(indptr, indices, data, cur, prev, out, coef):
    # prev <- 2 M cur - prev ; out += coef * prev
    n, B = cur.shape
    acc = np.empty(B)
    for i in range(n):
        acc[:] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = 2.0 * data[p]
            for c in range(B):
                acc[c] += v * cur[j, c]
        for c in range(B):
            x = acc[c] - prev[i, c]
            prev[i, c] = x
            out[i, c] += coef * x


@numba.njit(cache=True)
def _matmat_2d(indptr, indices, data, x, out):
    n, B = x.shape
    for i in range(n):
        for c in range(B):
            out[i, c] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(B):
                out[i, c] += v * x[j, c]


@numba.njit(cache=True)
def _cheb_step_1d(indptr, indices, data, cur, prev, out, coef):
    for i in range(cur.shape[0]):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * cur[indices[p]]
        x = 2.0 * acc - prev[i]
        prev[i] = x
        out[i] += coef * x


def chebyshev_apply(M, b, f):
    """``b0/2 f + sum_k b_k T_k(M) f`` for ``f`` of shape ``n`` or ``n x B``.

    Exactly ``len(b) - 1`` products with ``M``; three ``n x B`` buffers.
    """
    indptr, indices, data = M.indptr, M.indices, M.data
    prev = np.array(f, dtype=float, order="C", copy=True)
    if prev.ndim == 1:
        cur = M @ prev
        step = _cheb_step_1d
    else:
        cur = np.empty_like(prev)
        _matmat_2d(indptr, indices, data, prev, cur)
        step = _cheb_step_2d
    out = 0.5 * b[0] * prev + b[1] * cur
    for k in range(2, len(b)):
        step(indptr, indices, data, cur, prev, out, b[k])
        prev, cur = cur, prev
    return out
