"""Synthetic benchmarks: swiss-roll nearest-neighbour task, treatment-effect
families and a time-series interpolation task."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import ortho_group, pearsonr, spearmanr

from .barycenter import DistributionFamily, sinkhorn_barycenter, tv_baseline_effect
from .errors import DegenerateInput, SizeMismatch, ValidationError
from .graph import knn_alpha_decay_graph, laplacian
from .heatfilter import EulerFilter, build_filter
from .transport import (
    DensePlan,
    GeodesicPlan,
    dense_plan,
    dense_sinkhorn,
    exact_w2,
    geodesic_sinkhorn,
    indicator,
    mccann_interpolate,
    pairwise_geodesic,
)

log = logging.getLogger(__name__)

S_RANGE = (1.5 * math.pi, 4.5 * math.pi)
H_RANGE = (0.0, 20.0)


@dataclass
class SwissRollSample:
    ambient_points: np.ndarray
    intrinsic_coords: np.ndarray
    center_labels: np.ndarray
    centers: np.ndarray
    rotation: np.ndarray

    @property
    def n_distributions(self) -> int:
        return self.centers.shape[0]


def roll(intrinsic: np.ndarray) -> np.ndarray:
    """Map ``(s, h)`` to ``(s cos s, h, s sin s)``."""
    s, h = intrinsic[:, 0], intrinsic[:, 1]
    return np.column_stack([s * np.cos(s), h, s * np.sin(s)])


def arclength(s):
    """Length of the spiral ``(s cos s, s sin s)`` from 0 to ``s``."""
    s = np.asarray(s, dtype=float)
    return 0.5 * (s * np.sqrt(1.0 + s * s) + np.arcsinh(s))


def make_swiss_roll(n_distributions: int = 15, samples_per_dist: int = 1000,
                    noise_sigma: float = 4.0, ambient_dim: int = 10,
                    rng_seed: int = 0) -> SwissRollSample:
    if ambient_dim < 3:
        raise ValidationError("ambient_dim must be >= 3")
    rng = np.random.default_rng(rng_seed)
    centers = np.column_stack([
        rng.uniform(*S_RANGE, n_distributions),
        rng.uniform(*H_RANGE, n_distributions),
    ])
    labels = np.repeat(np.arange(n_distributions), samples_per_dist)
    intrinsic = centers[labels] + noise_sigma * rng.standard_normal((labels.size, 2))
    pts3 = roll(intrinsic)
    padded = np.zeros((labels.size, ambient_dim))
    padded[:, :3] = pts3
    rotation = ortho_group.rvs(ambient_dim, random_state=rng)
    return SwissRollSample(padded @ rotation.T, intrinsic, labels, centers, rotation)


def ground_truth_distances(sample: SwissRollSample) -> np.ndarray:
    """Geodesic distances between distribution centres in unrolled coordinates."""
    c = sample.centers
    unrolled = np.column_stack([arclength(c[:, 0]), c[:, 1]])
    diff = unrolled[:, None, :] - unrolled[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


@dataclass
class BenchmarkReport:
    spearman: float
    pearson: float
    p_at_5: float
    wall_times: dict = field(default_factory=dict)
    converged: bool = True

    def as_dict(self) -> dict:
        return {
            "spearman": self.spearman,
            "pearson": self.pearson,
            "p_at_5": self.p_at_5,
            "wall_times": dict(self.wall_times),
            "converged": self.converged,
        }


def _neighbours(d: np.ndarray, k: int) -> list[set]:
    m = d.shape[0]
    out = []
    for i in range(m):
        others = np.delete(np.arange(m), i)
        order = np.lexsort((others, d[i, others]))
        out.append(set(others[order[:k]].tolist()))
    return out


def rank_metrics(predicted, truth, k: int = 5) -> BenchmarkReport:
    """Spearman/Pearson over the strict upper triangle and row-wise k-NN precision."""
    p = np.asarray(predicted, dtype=float)
    g = np.asarray(truth, dtype=float)
    if p.shape != g.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise SizeMismatch(f"need two equal square matrices, got {p.shape} and {g.shape}")
    iu = np.triu_indices(p.shape[0], k=1)
    pu, gu = p[iu], g[iu]
    if np.ptp(pu) == 0 or np.ptp(gu) == 0:
        raise DegenerateInput("off-diagonal entries are constant")
    k = min(k, p.shape[0] - 1)
    hits = [len(a & b) / k for a, b in zip(_neighbours(p, k), _neighbours(g, k))]
    return BenchmarkReport(
        float(spearmanr(pu, gu)[0]), float(pearsonr(pu, gu)[0]), float(np.mean(hits))
    )


METHODS = ("geodesic_sinkhorn", "dense_sinkhorn_w1", "dense_sinkhorn_w2", "euler_sinkhorn")


@dataclass
class KnnBenchConfig:
    """Swiss-roll nearest-neighbour task.

    ``noise_sigma = 4`` lets neighbouring distributions overlap so the kNN
    graph is connected; with tight clusters the graph falls apart into one
    component per distribution and no graph method can compare them.
    """

    methods: tuple = ("geodesic_sinkhorn", "dense_sinkhorn_w1", "dense_sinkhorn_w2")
    n_distributions: int = 15
    samples_per_dist: int = 1000
    noise_sigma: float = 4.0
    ambient_dim: int = 10
    seed: int = 0
    k: int = 5
    alpha: float = 40.0
    laplacian: str = "normalized"
    t: float = 30.0
    K: int = 60
    euler_steps: int = 30
    tol: float = 1e-2
    max_iter: int = 500
    dense_rel_reg: float = 0.05
    reg_subsample: int = 500

    def __post_init__(self):
        self.methods = tuple(self.methods)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValidationError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if self.n_distributions < 2:
            raise ValidationError("need at least 2 distributions")
        for name in ("samples_per_dist", "K", "euler_steps", "max_iter", "reg_subsample"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        for name in ("t", "tol", "dense_rel_reg", "alpha"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")


@dataclass
class KnnBenchResult:
    reports: dict
    distances: dict
    truth: np.ndarray
    config: KnnBenchConfig

    def as_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "reports": {m: r.as_dict() for m, r in self.reports.items()},
        }


def dense_reg_scale(points: np.ndarray, power: int, n_sub: int, rng) -> float:
    """Median pairwise ``|x - y|**power`` over a random subsample."""
    idx = rng.choice(points.shape[0], size=min(n_sub, points.shape[0]), replace=False)
    sub = points[np.sort(idx)]
    d = cdist(sub, sub)[np.triu_indices(sub.shape[0], k=1)]
    return float(np.median(d**power))


def pairwise_dense(groups: list, power: int, reg: float, max_iter: int, tol: float):
    m = len(groups)
    out = np.zeros((m, m))
    ok = True
    for i in range(m):
        for j in range(i + 1, m):
            C = cdist(groups[i], groups[j]) ** power
            mu = np.full(len(groups[i]), 1.0 / len(groups[i]))
            nu = np.full(len(groups[j]), 1.0 / len(groups[j]))
            r = dense_sinkhorn(C, mu, nu, reg, max_iter, tol)
            out[i, j] = out[j, i] = r.cost
            ok &= r.converged
    return out, ok


def knn_benchmark(config: KnnBenchConfig | None = None) -> KnnBenchResult:
    """Pairwise distances between the swiss-roll distributions, scored against the truth."""
    cfg = config or KnnBenchConfig()
    sample = make_swiss_roll(cfg.n_distributions, cfg.samples_per_dist, cfg.noise_sigma,
                             cfg.ambient_dim, cfg.seed)
    truth = ground_truth_distances(sample)
    X, labels, m = sample.ambient_points, sample.center_labels, sample.n_distributions
    reports, distances = {}, {}

    lap, graph_time = None, 0.0
    if any(meth in ("geodesic_sinkhorn", "euler_sinkhorn") for meth in cfg.methods):
        t0 = time.perf_counter()
        lap = laplacian(knn_alpha_decay_graph(X, cfg.k, cfg.alpha), cfg.laplacian)
        graph_time = time.perf_counter() - t0
        dists = np.column_stack([indicator(X.shape[0], labels == i) for i in range(m)])
    groups = [X[labels == i] for i in range(m)]
    rng = np.random.default_rng(cfg.seed + 1)
    scales = {p: dense_reg_scale(X, p, cfg.reg_subsample, rng) for p in (1, 2)}

    for meth in cfg.methods:
        t0 = time.perf_counter()
        if meth in ("geodesic_sinkhorn", "euler_sinkhorn"):
            if meth == "geodesic_sinkhorn":
                op = build_filter(lap, cfg.t, cfg.K)
            else:
                op = EulerFilter(lap, cfg.t, cfg.euler_steps)
            build = time.perf_counter() - t0
            D, ok = pairwise_geodesic(op, dists, None, cfg.max_iter, cfg.tol,
                                      raise_disconnected=False)
            times = {"graph": graph_time + build, "distances": time.perf_counter() - t0 - build}
        else:
            p = 1 if meth.endswith("w1") else 2
            D, ok = pairwise_dense(groups, p, cfg.dense_rel_reg * scales[p], cfg.max_iter, cfg.tol)
            times = {"graph": 0.0, "distances": time.perf_counter() - t0}
        rep = rank_metrics(D, truth)
        rep.wall_times = times
        rep.converged = bool(ok)
        reports[meth], distances[meth] = rep, D
        log.info("%s: spearman %.3f, P@5 %.3f, %.1fs", meth, rep.spearman, rep.p_at_5,
                 sum(times.values()))
    return KnnBenchResult(reports, distances, truth, cfg)


@dataclass
class EbeConfig:
    """Two Gaussian families on the line with an optional outlier member.

    ``outlier=None`` makes all treated members clean ``N(shift, 1)`` samples.
    """

    outlier: float | None = -60.0
    n_members: int = 10
    samples: int = 500
    shift: float = 5.0
    seed: int = 0
    k: int = 5
    alpha: float = 40.0
    laplacian: str = "normalized"
    t: float = 5.0
    K: int = 30
    max_iter: int = 30
    tol: float = 1e-6

    def __post_init__(self):
        if self.n_members < 1 or self.samples < 2:
            raise ValidationError("need n_members >= 1 and samples >= 2")
        if not self.t > 0 or self.K < 1 or self.max_iter < 1 or not self.tol > 0:
            raise ValidationError("t, K, max_iter and tol must be positive")


@dataclass
class EbeResult:
    tau: np.ndarray
    baseline_tau: np.ndarray
    converged: bool
    iterations: int
    features: np.ndarray = field(repr=False)
    barycenters: tuple = field(repr=False)


def ebe_families(cfg: EbeConfig):
    """Sample points, control family and treated family on one shared vertex set."""
    rng = np.random.default_rng(cfg.seed)
    control = [rng.normal(0.0, 1.0, cfg.samples) for _ in range(cfg.n_members)]
    treated = [rng.normal(cfg.shift, 1.0, cfg.samples) for _ in range(cfg.n_members - 1)]
    last = cfg.shift if cfg.outlier is None else cfg.outlier
    treated.append(rng.normal(last, 1.0, cfg.samples))
    X = np.concatenate(control + treated)[:, None]
    n = X.shape[0]
    member = np.repeat(np.arange(2 * cfg.n_members), cfg.samples)
    fam_c = DistributionFamily([indicator(n, member == i) for i in range(cfg.n_members)],
                               label="control")
    fam_t = DistributionFamily(
        [indicator(n, member == i) for i in range(cfg.n_members, 2 * cfg.n_members)],
        label="treated")
    return X, fam_t, fam_c


def ebe_experiment(cfg: EbeConfig | None = None) -> EbeResult:
    """Geodesic and mixture-mean treatment effects for one synthetic draw."""
    cfg = cfg or EbeConfig()
    X, fam_t, fam_c = ebe_families(cfg)
    lap = laplacian(knn_alpha_decay_graph(X, cfg.k, cfg.alpha), cfg.laplacian)
    filt = build_filter(lap, cfg.t, cfg.K)
    rt = sinkhorn_barycenter(filt, fam_t, None, cfg.max_iter, cfg.tol)
    rc = sinkhorn_barycenter(filt, fam_c, None, cfg.max_iter, cfg.tol)
    tau = X.T @ rt.barycenter - X.T @ rc.barycenter
    return EbeResult(tau, tv_baseline_effect(fam_t, fam_c, X), rt.converged and rc.converged,
                     max(rt.iterations, rc.iterations), X, (rt.barycenter, rc.barycenter))


@dataclass
class InterpConfig:
    """Particles sliding along a curve, observed at ``n_times`` snapshots.

    Particle ``p`` sits at arclength ``u_p + speed * tau`` at time ``tau``
    plus fresh isotropic noise at every snapshot. ``curved=False`` lays the
    same arclengths on a straight line as the flat control.
    """

    curved: bool = True
    n_times: int = 5
    particles: int = 400
    span: float = 70.0
    speed: float = 5.0
    noise: float = 0.8
    start_angle: float = 3 * math.pi
    seeds: tuple = (0, 1, 2, 3, 4)
    k: int = 10
    alpha: float = 40.0
    laplacian: str = "normalized"
    t: float = 10.0
    K: int = 60
    dense_reg: float = 3.0
    tol: float = 1e-3
    max_iter: int = 20000

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.n_times < 3:
            raise ValidationError("need at least 3 timepoints")
        if self.particles < 2 or not self.seeds:
            raise ValidationError("need particles >= 2 and at least one seed")
        for name in ("span", "t", "dense_reg", "tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")


def spiral_curve(u, start_angle: float = 3 * math.pi) -> np.ndarray:
    """Points at arclength ``u`` past ``start_angle`` on the spiral ``(s cos s, s sin s)``."""
    u = np.asarray(u, dtype=float)
    offset = float(arclength(start_angle))
    top = start_angle + 2.0
    while arclength(top) < offset + u.max():
        top *= 1.5
    grid = np.linspace(0.0, top, 200_001)
    s = np.interp(u + offset, arclength(grid), grid)
    return np.column_stack([s * np.cos(s), s * np.sin(s)])


def sliding_series(cfg: InterpConfig, seed: int) -> list:
    rng = np.random.default_rng(seed)
    u0 = rng.uniform(0.0, cfg.span, cfg.particles)
    out = []
    for tau in range(cfg.n_times):
        u = u0 + cfg.speed * tau
        base = spiral_curve(u, cfg.start_angle) if cfg.curved else np.column_stack(
            [u, np.zeros_like(u)])
        out.append(base + cfg.noise * rng.standard_normal(base.shape))
    return out


def interpolate_pair(x, y, cfg: InterpConfig, method: str, rng_seed: int = 0) -> np.ndarray:
    """McCann midpoint sample between point sets ``x`` and ``y`` under one method's plan."""
    m1, m2 = x.shape[0], y.shape[0]
    if method == "geodesic_sinkhorn":
        n = m1 + m2
        lap = laplacian(knn_alpha_decay_graph(np.vstack([x, y]), cfg.k, cfg.alpha), cfg.laplacian)
        filt = build_filter(lap, cfg.t, cfg.K)
        src, dst = np.arange(m1), np.arange(m1, n)
        res = geodesic_sinkhorn(filt, indicator(n, src), indicator(n, dst), None,
                                cfg.max_iter, cfg.tol)
        plan = GeodesicPlan(res, filt, None, src, dst)
    elif method == "dense_sinkhorn_w2":
        res = dense_sinkhorn(cdist(x, y, "sqeuclidean"), np.full(m1, 1.0 / m1),
                             np.full(m2, 1.0 / m2), cfg.dense_reg, cfg.max_iter, cfg.tol)
        plan = DensePlan(dense_plan(res))
    else:
        raise ValidationError(f"unknown interpolation method {method!r}")
    return mccann_interpolate(x, y, plan, 0.5, m1, rng_seed)


INTERP_METHODS = ("geodesic_sinkhorn", "dense_sinkhorn_w2")


def interpolation_benchmark(cfg: InterpConfig | None = None) -> dict:
    """Leave-one-out interpolation of every interior snapshot, scored by exact W2.

    Returns ``{"per_seed": {method: [score per seed]}, "mean": {method: score}}``;
    a seed's score is the mean over interior timepoints.
    """
    cfg = cfg or InterpConfig()
    per_seed = {m: [] for m in INTERP_METHODS}
    for seed in cfg.seeds:
        snaps = sliding_series(cfg, seed)
        for meth in INTERP_METHODS:
            scores = [
                exact_w2(interpolate_pair(snaps[tau - 1], snaps[tau + 1], cfg, meth, seed),
                         snaps[tau])
                for tau in range(1, cfg.n_times - 1)
            ]
            per_seed[meth].append(float(np.mean(scores)))
        log.info("seed %d: %s", seed, {m: round(v[-1], 4) for m, v in per_seed.items()})
    return {
        "per_seed": per_seed,
        "mean": {m: float(np.mean(v)) for m, v in per_seed.items()},
        "config": asdict(cfg),
    }
