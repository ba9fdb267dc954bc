"""Entropic optimal transport with a graph heat kernel.

:func:`geodesic_sinkhorn` runs the alternating scaling updates where every
kernel product is a heat-filter application, so no ``n x n`` matrix is ever
formed. :func:`dense_sinkhorn` is the classical Gibbs-kernel version used as
the Euclidean baseline and as an oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import (
    DegeneratePlan,
    Disconnected,
    IndexOutOfRange,
    KernelNotPositive,
    LengthMismatch,
    NumericalUnderflow,
    SizeMismatch,
    TooLarge,
    ValidationError,
)

log = logging.getLogger(__name__)

TINY = 1e-300
NEG_RTOL = 1e-12
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500
STALL_SWEEPS = 50


@dataclass
class TransportResult:
    v: np.ndarray
    w: np.ndarray
    cost: float
    iterations: int
    converged: bool
    marginal_error: float
    reg: float = 1.0
    kl_inner: float = float("nan")
    kernel: np.ndarray | None = field(default=None, repr=False)

    @property
    def kl_form(self) -> float:
        """``reg**0.5 * (1 + min KL(pi | kernel))**0.5``.

        ``kl_inner`` holds ``1 + KL`` at the computed plan, which for the
        scaling form of the plan is ``<mu, ln v> + <nu, ln w'>`` with ``w'`` the
        column scaling actually multiplying the kernel. NaN if negative.
        """
        if not self.kl_inner >= 0:
            return float("nan")
        return float(np.sqrt(self.reg * self.kl_inner))


def as_distribution(weights, n: int | None = None, name: str = "distribution") -> np.ndarray:
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1:
        raise ValidationError(f"{name} must be a vector")
    if n is not None and p.shape[0] != n:
        raise LengthMismatch(f"{name} has length {p.shape[0]}, expected {n}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} must be finite and nonnegative")
    total = p.sum()
    if not total > 0:
        raise ValidationError(f"{name} has zero mass")
    if abs(total - 1.0) > 1e-12:
        p = p / total
    return p


def indicator(n: int, members) -> np.ndarray:
    """Uniform distribution on the vertex subset ``members``."""
    p = np.zeros(n)
    p[np.asarray(members)] = 1.0
    return p / p.sum()


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _vertex_weights(a, n: int) -> np.ndarray:
    if a is None:
        return uniform_weights(n)
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise LengthMismatch(f"vertex weights have shape {a.shape}, expected ({n},)")
    if not np.all(a > 0):
        raise ValidationError("vertex weights must be positive")
    return a


def nonnegative_part(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Zero the round-off negatives of a kernel product ``y = K x``.

    Negatives larger than ``1e-12 * max|x|`` mean the truncated kernel is not
    positive on this graph and raise :class:`KernelNotPositive`.
    """
    scale = np.max(np.abs(x), axis=0)
    if np.any(y < -NEG_RTOL * scale):
        raise KernelNotPositive(
            "heat filter produced negative values; increase K or decrease t"
        )
    return np.maximum(y, 0.0)


def positive_part(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """As :func:`nonnegative_part`, floored at ``1e-300`` so it can divide."""
    return np.maximum(nonnegative_part(y, x), TINY)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = num / den
    np.minimum(out, 1e300, out=out)
    return out


def _xlogy(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(p.shape, q.shape))
    mask = np.broadcast_to(p > 0, out.shape)
    pq = np.broadcast_to(p, out.shape)[mask] * np.log(np.broadcast_to(q, out.shape)[mask])
    out[mask] = pq
    return out


def scaling_loop(
    kernel: Callable[[np.ndarray], np.ndarray],
    mu: np.ndarray,
    nu: np.ndarray,
    a: np.ndarray,
    max_iter: int,
    tol: float,
    raise_disconnected: bool = True,
):
    """Alternating Sinkhorn scalings for a symmetric kernel on weighted vertices.

    ``mu``/``nu`` are ``n`` or ``n x B``; columns run in lockstep and freeze
    individually once their marginal error drops below ``tol``. The product
    ``K(a w)`` used for the error check is reused by the next ``v`` update,
    so a sweep costs two kernel applications.
    Returns ``(v, w, errors, iterations, converged)``.
    """
    batch = mu.ndim == 2
    if not batch:
        mu, nu = mu[:, None], nu[:, None]
    B = mu.shape[1]
    aw = a[:, None]
    w = np.ones_like(mu)
    v = np.ones_like(mu)
    x = np.broadcast_to(aw, mu.shape)
    kv = nonnegative_part(kernel(np.ascontiguousarray(x)), x)
    active = np.arange(B)
    errors = np.full(B, np.inf)
    iters = np.zeros(B, dtype=int)
    stalled = np.zeros(B, dtype=int)
    for it in range(1, max_iter + 1):
        m = mu[:, active]
        # the error uses the unfloored product: a floored zero would fake a match
        v_act = _safe_div(m, np.maximum(kv, TINY))
        x = aw * v_act
        w_act = _safe_div(nu[:, active], positive_part(kernel(x), x))
        x = aw * w_act
        kv = nonnegative_part(kernel(x), x)
        err = np.abs(v_act * kv - m).sum(axis=0)
        v[:, active] = v_act
        w[:, active] = w_act
        errors[active] = err
        iters[active] = it
        stalled[active] = np.where(err > 0.5, stalled[active] + 1, 0)
        if raise_disconnected and np.any(stalled >= STALL_SWEEPS):
            raise Disconnected(
                "marginal error stuck above 0.5; mu and nu appear to lie in different components"
            )
        if log.isEnabledFor(logging.DEBUG):
            log.debug("sweep %d: max marginal error %.3e (%d active)", it, err.max(), active.size)
        keep = err > tol
        active = active[keep]
        kv = kv[:, keep]
        if active.size == 0:
            break
    converged = errors <= tol
    if not batch:
        return v[:, 0], w[:, 0], errors[0], int(iters[0]), bool(converged[0])
    return v, w, errors, iters, converged


def dual_cost(mu, nu, v, w, a, reg) -> np.ndarray:
    """``reg * sum(a * (mu ln v + nu ln w))`` with ``0 ln 0 = 0``."""
    a = a if mu.ndim == 1 else a[:, None]
    return reg * (a * (_xlogy(mu, v) + _xlogy(nu, w))).sum(axis=0)


def geodesic_sinkhorn(
    filt,
    mu,
    nu,
    a=None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> TransportResult:
    """Entropic transport between two vertex distributions under the heat kernel.

    Parameters
    ----------
    filt : HeatFilter or EulerFilter
        Kernel operator; its diffusion time ``t`` sets the regularisation ``4t``.
    mu, nu : array_like
        Distributions over the graph vertices.
    a : array_like, optional
        Positive vertex weights, uniform ``1/n`` by default.

    Returns
    -------
    TransportResult
        ``cost = 4t * sum(a * (mu ln v + nu ln w))``.
    """
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    n = filt.n
    mu = as_distribution(mu, n, "mu")
    nu = as_distribution(nu, n, "nu")
    a = _vertex_weights(a, n)
    v, w, err, iters, conv = scaling_loop(filt.apply, mu, nu, a, max_iter, tol)
    reg = 4.0 * filt.t
    cost = float(dual_cost(mu, nu, v, w, a, reg))
    inner = float(_xlogy(mu, v).sum() + _xlogy(nu, a * w).sum())
    if not conv:
        log.warning("geodesic Sinkhorn stopped after %d sweeps, marginal error %.3e", iters, err)
    return TransportResult(v, w, cost, iters, conv, float(err), reg, inner)


def geodesic_sinkhorn_pairs(
    filt,
    mus: np.ndarray,
    nus: np.ndarray,
    a=None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    raise_disconnected: bool = True,
):
    """Batched :func:`geodesic_sinkhorn` over the columns of ``mus`` and ``nus``.

    Returns ``(costs, converged, iterations)`` arrays of length ``B``.
    """
    n = filt.n
    mus = np.asarray(mus, dtype=float)
    nus = np.asarray(nus, dtype=float)
    if mus.shape != nus.shape or mus.ndim != 2 or mus.shape[0] != n:
        raise LengthMismatch("mus and nus must both be n x B")
    mus = mus / mus.sum(axis=0)
    nus = nus / nus.sum(axis=0)
    a = _vertex_weights(a, n)
    v, w, err, iters, conv = scaling_loop(filt.apply, mus, nus, a, max_iter, tol,
                                          raise_disconnected)
    return dual_cost(mus, nus, v, w, a, 4.0 * filt.t), conv, iters


def pairwise_geodesic(filt, dists: np.ndarray, a=None, max_iter=DEFAULT_MAX_ITER,
                      tol=DEFAULT_TOL, batch_size: int = 128, raise_disconnected: bool = True):
    """Symmetric matrix of geodesic Sinkhorn costs between columns of ``dists``.

    Returns ``(matrix, all_converged)``. With ``raise_disconnected=False``
    stalled pairs keep their last cost and count as not converged.
    """
    m = dists.shape[1]
    iu, ju = np.triu_indices(m, k=1)
    costs = np.empty(iu.size)
    conv = np.empty(iu.size, dtype=bool)
    for s in range(0, iu.size, batch_size):
        sl = slice(s, s + batch_size)
        costs[sl], conv[sl], _ = geodesic_sinkhorn_pairs(
            filt, dists[:, iu[sl]], dists[:, ju[sl]], a, max_iter, tol, raise_disconnected
        )
    out = np.zeros((m, m))
    out[iu, ju] = out[ju, iu] = costs
    return out, bool(conv.all())


def dense_sinkhorn(
    cost_matrix,
    mu,
    nu,
    reg: float,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> TransportResult:
    """Classical Sinkhorn on the Gibbs kernel ``exp(-C / reg)``.

    The reported cost is ``reg * (<mu, ln u> + <nu, ln v>)`` for the plan
    ``diag(u) K diag(v)``.
    """
    C = np.asarray(cost_matrix, dtype=float)
    if C.ndim != 2 or not np.all(np.isfinite(C)):
        raise ValidationError("cost matrix must be a finite 2-D array")
    if not reg > 0:
        raise ValidationError("reg must be > 0")
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    mu = as_distribution(mu, C.shape[0], "mu")
    nu = as_distribution(nu, C.shape[1], "nu")
    K = np.exp(-C / reg)
    if np.any(K[mu > 0].max(axis=1, initial=0.0) == 0.0) or np.any(
        K[:, nu > 0].max(axis=0, initial=0.0) == 0.0
    ):
        raise NumericalUnderflow("Gibbs kernel underflows to zero; increase reg")
    return _dense_scaling(K, mu, nu, reg, max_iter, tol)


def _dense_scaling(K, mu, nu, reg, max_iter, tol) -> TransportResult:
    v = np.ones(K.shape[1])
    err = np.inf
    conv = False
    it = 0
    KT = K.T
    for it in range(1, max_iter + 1):
        u = _safe_div(mu, np.maximum(K @ v, TINY))
        v = _safe_div(nu, np.maximum(KT @ u, TINY))
        err = float(np.abs(u * (K @ v) - mu).sum())
        if err <= tol:
            conv = True
            break
    inner = float(_xlogy(mu, u).sum() + _xlogy(nu, v).sum())
    if not conv:
        log.warning("dense Sinkhorn stopped after %d sweeps, marginal error %.3e", it, err)
    return TransportResult(u, v, reg * inner, it, conv, err, reg, inner, K)


def dense_plan(result: TransportResult) -> np.ndarray:
    return result.v[:, None] * result.kernel * result.w[None, :]


def plan_row(result: TransportResult, filt, a, i: int) -> np.ndarray:
    """Row ``i`` of ``diag(v) H diag(a w)``, computed with one filter application."""
    n = filt.n
    if not 0 <= i < n:
        raise IndexOutOfRange(f"vertex {i} outside [0, {n})")
    a = _vertex_weights(a, n)
    e = np.zeros(n)
    e[i] = 1.0
    row = result.v[i] * filt.apply(e) * a * result.w
    return np.maximum(row, 0.0)


class GeodesicPlan:
    """Row access to a geodesic transport plan restricted to source/target vertices."""

    def __init__(self, result: TransportResult, filt, a, source_idx, target_idx):
        self.result, self.filt = result, filt
        self.a = _vertex_weights(a, filt.n)
        self.source_idx = np.asarray(source_idx)
        self.target_idx = np.asarray(target_idx)

    @property
    def row_masses(self) -> np.ndarray:
        r = self.result
        x = self.a * r.w
        return r.v[self.source_idx] * np.maximum(self.filt.apply(x), 0.0)[self.source_idx]

    def __call__(self, i: int) -> np.ndarray:
        return plan_row(self.result, self.filt, self.a, int(self.source_idx[i]))[self.target_idx]


class DensePlan:
    def __init__(self, plan: np.ndarray):
        self.plan = plan

    @property
    def row_masses(self) -> np.ndarray:
        return self.plan.sum(axis=1)

    def __call__(self, i: int) -> np.ndarray:
        return self.plan[i]


def mccann_interpolate(source_points, target_points, plan_access, s: float,
                       num_samples: int, rng_seed: int = 0) -> np.ndarray:
    """Sample the displacement interpolant ``(1 - s) x_i + s y_j`` with ``(i, j) ~ plan``.

    ``plan_access(i)`` returns row ``i`` of the plan over the target points;
    if it has a ``row_masses`` attribute that is used to draw the rows,
    otherwise every row is materialised once.
    """
    x = np.asarray(source_points, dtype=float)
    y = np.asarray(target_points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[1] != y.shape[1]:
        raise SizeMismatch("source and target dimensions differ")
    if not 0.0 <= s <= 1.0:
        raise ValidationError("s must lie in [0, 1]")
    masses = getattr(plan_access, "row_masses", None)
    if masses is None:
        masses = np.array([np.sum(plan_access(i)) for i in range(x.shape[0])])
    masses = np.maximum(np.asarray(masses, dtype=float), 0.0)
    total = masses.sum()
    if total < 1.0 - 1e-6:
        raise DegeneratePlan(f"plan mass {total:.3e} is below 1")
    rng = np.random.default_rng(rng_seed)
    rows = np.sort(rng.choice(x.shape[0], size=num_samples, p=masses / total))
    out = np.empty((num_samples, x.shape[1]))
    uniq, starts, counts = np.unique(rows, return_index=True, return_counts=True)
    for i, st, c in zip(uniq, starts, counts):
        r = np.maximum(np.asarray(plan_access(int(i)), dtype=float), 0.0)
        rs = r.sum()
        if rs <= 0:
            raise DegeneratePlan(f"plan row {i} is empty")
        cols = rng.choice(y.shape[0], size=c, p=r / rs)
        out[st : st + c] = (1.0 - s) * x[i] + s * y[cols]
    return out


def exact_w2(x_points, y_points) -> float:
    """Exact 2-Wasserstein distance between two equal-size uniform point sets."""
    x = np.asarray(x_points, dtype=float)
    y = np.asarray(y_points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape != y.shape:
        raise SizeMismatch(f"point sets differ in shape: {x.shape} vs {y.shape}")
    if x.shape[0] > 2000:
        raise TooLarge("exact_w2 limited to 2000 points")
    C = cdist(x, y, "sqeuclidean")
    r, c = linear_sum_assignment(C)
    return float(np.sqrt(C[r, c].mean()))
