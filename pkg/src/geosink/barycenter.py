"""Fixed-support barycenters on a graph and the effects built from them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, ValidationError
from .transport import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    TINY,
    _safe_div,
    _vertex_weights,
    as_distribution,
    geodesic_sinkhorn,
    nonnegative_part,
    positive_part,
)

log = logging.getLogger(__name__)


@dataclass
class DistributionFamily:
    members: list
    alphas: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValidationError("a family needs at least one member")
        n = len(self.members[0])
        self.members = [as_distribution(m, n, f"{self.label or 'family'} member") for m in self.members]
        if self.alphas is None:
            self.alphas = np.full(len(self.members), 1.0 / len(self.members))
        a = np.asarray(self.alphas, dtype=float)
        if a.shape != (len(self.members),) or np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
            raise ValidationError("alphas must be nonnegative, one per member, summing to 1")
        self.alphas = a

    @property
    def n(self) -> int:
        return len(self.members[0])

    def matrix(self) -> np.ndarray:
        return np.column_stack(self.members)


@dataclass
class BarycenterResult:
    barycenter: np.ndarray
    per_member_scalings: list = field(repr=False)
    iterations: int
    converged: bool
    marginal_error: float


@dataclass
class TransportParams:
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL


def sinkhorn_barycenter(filt, family: DistributionFamily, a=None,
                        max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> BarycenterResult:
    """Iterative Bregman projections with a geometric-mean coupling.

    Each sweep updates ``v_i = mu_i / K(a w_i)``, sets the barycenter to
    ``prod_i K(a v_i) ** alpha_i`` and then ``w_i = barycenter / K(a v_i)``.
    All members are filtered together as one ``n x m`` block.
    """
    n = filt.n
    if family.n != n:
        raise LengthMismatch(f"family lives on {family.n} vertices, filter on {n}")
    a = _vertex_weights(a, n)
    mus = family.matrix()
    alphas = family.alphas
    aw = a[:, None]
    w = np.ones_like(mus)
    x = aw * w
    kw = nonnegative_part(filt.apply(x), x)
    bary = None
    err = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        v = _safe_div(mus, np.maximum(kw, TINY))
        x = aw * v
        kv = positive_part(filt.apply(x), x)
        bary = np.exp(np.log(kv) @ alphas)
        w = _safe_div(bary[:, None], kv)
        x = aw * w
        kw = nonnegative_part(filt.apply(x), x)
        err = float(np.abs(v * kw - mus).sum(axis=0).max())
        if err <= tol:
            break
    converged = err <= tol
    if not converged:
        log.warning("barycenter stopped after %d sweeps, marginal error %.3e", it, err)
    total = bary.sum()
    if not total > 0:
        raise ValidationError("barycenter has no mass")
    scalings = [(v[:, i], w[:, i]) for i in range(mus.shape[1])]
    return BarycenterResult(bary / total, scalings, it, converged, err)


def barycentric_distance(filt, family_t: DistributionFamily, family_c: DistributionFamily,
                         a=None, params: TransportParams | None = None) -> float:
    """Geodesic Sinkhorn cost between the barycenters of two families."""
    p = params or TransportParams()
    bt = sinkhorn_barycenter(filt, family_t, a, p.max_iter, p.tol).barycenter
    bc = sinkhorn_barycenter(filt, family_c, a, p.max_iter, p.tol).barycenter
    return geodesic_sinkhorn(filt, bt, bc, a, p.max_iter, p.tol).cost


def expected_barycenter_effect(filt, family_t: DistributionFamily, family_c: DistributionFamily,
                               features, a=None, params: TransportParams | None = None) -> np.ndarray:
    """Difference of feature expectations under the two barycenters."""
    p = params or TransportParams()
    feats = _features(features, filt.n)
    bt = sinkhorn_barycenter(filt, family_t, a, p.max_iter, p.tol).barycenter
    bc = sinkhorn_barycenter(filt, family_c, a, p.max_iter, p.tol).barycenter
    return feats.T @ bt - feats.T @ bc


def tv_baseline_effect(family_t: DistributionFamily, family_c: DistributionFamily, features) -> np.ndarray:
    """Effect under mixture barycenters: difference of alpha-weighted member means."""
    feats = _features(features, family_t.n)
    mix_t = family_t.matrix() @ family_t.alphas
    mix_c = family_c.matrix() @ family_c.alphas
    return feats.T @ mix_t - feats.T @ mix_c


def _features(features, n: int) -> np.ndarray:
    f = np.asarray(features, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != n:
        raise LengthMismatch(f"features have {f.shape[0]} rows, graph has {n} vertices")
    return f
