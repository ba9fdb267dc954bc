import numpy as np
import pytest

from geosink.barycenter import (
    DistributionFamily,
    TransportParams,
    barycentric_distance,
    expected_barycenter_effect,
    sinkhorn_barycenter,
    tv_baseline_effect,
)
from geosink.errors import LengthMismatch, ValidationError
from geosink.graph import knn_alpha_decay_graph, laplacian
from geosink.heatfilter import build_filter, exact_heat_oracle
from geosink.transport import indicator

from conftest import path_adjacency, random_connected_graph
from oracles import bregman_barycenter


def test_family_validation():
    with pytest.raises(ValidationError):
        DistributionFamily([])
    with pytest.raises(ValidationError):
        DistributionFamily([[1.0, 0.0], [0.0, 1.0]], alphas=[0.5, 0.6])
    with pytest.raises(LengthMismatch):
        DistributionFamily([[1.0, 0.0], [0.0, 1.0, 0.0]])
    fam = DistributionFamily([[2.0, 2.0], [0.0, 1.0]])
    np.testing.assert_allclose(fam.alphas, [0.5, 0.5])
    np.testing.assert_allclose(fam.members[0], [0.5, 0.5])


def test_normalised_output(rng):
    n = 40
    filt = build_filter(laplacian(random_connected_graph(n, rng)), 1.0, 30)
    fam = DistributionFamily(list(rng.dirichlet(np.ones(n), size=3)))
    res = sinkhorn_barycenter(filt, fam, tol=1e-9)
    assert res.converged and res.marginal_error <= 1e-9
    assert res.barycenter.sum() == pytest.approx(1.0, abs=1e-12)
    assert res.barycenter.min() >= 0
    assert len(res.per_member_scalings) == 3


def test_single_member_closed_form(rng):
    # one sweep already satisfies the constraint: w = 1, barycenter = H(a mu / H a)
    n = 30
    filt = build_filter(laplacian(random_connected_graph(n, rng)), 0.8, 30)
    mu = rng.dirichlet(np.ones(n))
    a = np.full(n, 1.0 / n)
    res = sinkhorn_barycenter(filt, DistributionFamily([mu]))
    expect = filt.apply(a * mu / filt.apply(a))
    np.testing.assert_allclose(res.barycenter, expect / expect.sum(), atol=1e-14)
    assert res.iterations == 1


def test_single_member_small_time_recovers_member(rng):
    n = 30
    filt = build_filter(laplacian(random_connected_graph(n, rng)), 1e-4, 30)
    mu = rng.dirichlet(np.ones(n))
    res = sinkhorn_barycenter(filt, DistributionFamily([mu]))
    assert np.abs(res.barycenter - mu).sum() <= 1e-2


def test_alpha_degeneracy(rng):
    n = 30
    filt = build_filter(laplacian(random_connected_graph(n, rng)), 1.0, 30)
    mus = list(rng.dirichlet(np.ones(n), size=3))
    deg = sinkhorn_barycenter(filt, DistributionFamily(mus, alphas=[1.0, 0.0, 0.0]), tol=1e-9)
    own = sinkhorn_barycenter(filt, DistributionFamily([mus[0]]), tol=1e-9)
    assert np.abs(deg.barycenter - own.barycenter).sum() <= 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_dense_oracle_agreement(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 100))
    lap = laplacian(random_connected_graph(n, rng))
    t = float(rng.uniform(0.3, 2.0))
    m = int(rng.integers(2, 5))
    mus = rng.dirichlet(np.ones(n), size=m)
    alphas = rng.dirichlet(np.ones(m))
    res = sinkhorn_barycenter(build_filter(lap, t, 30), DistributionFamily(list(mus), alphas),
                              a=np.ones(n), tol=1e-12, max_iter=5000)
    assert res.converged
    ref = bregman_barycenter(exact_heat_oracle(lap, t), mus.T, alphas, 5000)
    assert np.abs(res.barycenter - ref).sum() <= 1e-5


def test_three_node_path_midpoint():
    lap = laplacian(path_adjacency(3))
    filt = build_filter(lap, 0.1, 30)
    e = np.eye(3)
    res = sinkhorn_barycenter(filt, DistributionFamily([e[0], e[2]]), tol=1e-10, max_iter=5000)
    ref = bregman_barycenter(exact_heat_oracle(lap, 0.1), e[[0, 2]].T, np.array([0.5, 0.5]), 5000)
    assert np.argmax(res.barycenter) == 1 and np.argmax(ref) == 1
    np.testing.assert_allclose(res.barycenter, ref, atol=1e-6)


def test_automorphism_invariance(rng):
    n = 11
    filt = build_filter(laplacian(path_adjacency(n)), 0.7, 30)
    mu = rng.dirichlet(np.ones(n))
    res = sinkhorn_barycenter(filt, DistributionFamily([mu, mu[::-1]]), tol=1e-12, max_iter=5000)
    np.testing.assert_allclose(res.barycenter, res.barycenter[::-1], atol=1e-8)


def test_member_order_irrelevant(rng):
    n = 25
    filt = build_filter(laplacian(random_connected_graph(n, rng)), 1.0, 30)
    mus = list(rng.dirichlet(np.ones(n), size=3))
    a = sinkhorn_barycenter(filt, DistributionFamily(mus, [0.2, 0.3, 0.5]), tol=1e-11)
    b = sinkhorn_barycenter(filt, DistributionFamily(mus[::-1], [0.5, 0.3, 0.2]), tol=1e-11)
    np.testing.assert_allclose(a.barycenter, b.barycenter, atol=1e-9)


def test_length_mismatch(rng):
    filt = build_filter(laplacian(path_adjacency(5)), 1.0)
    with pytest.raises(LengthMismatch):
        sinkhorn_barycenter(filt, DistributionFamily([np.ones(4)]))


def two_cluster_setup(rng, per=40):
    X = np.vstack([rng.normal(0, 1, (4 * per, 2)), rng.normal([4, 0], 1, (4 * per, 2))])
    lap = laplacian(knn_alpha_decay_graph(X, 8), "normalized")
    filt = build_filter(lap, 3.0, 40)
    n = X.shape[0]
    groups = np.arange(n) // per
    fam = lambda ids: DistributionFamily([indicator(n, groups == g) for g in ids])
    return X, filt, fam


def test_barycentric_distance_properties(rng):
    X, filt, fam = two_cluster_setup(rng)
    p = TransportParams(max_iter=2000, tol=1e-8)
    tc = barycentric_distance(filt, fam([0, 1, 2, 3]), fam([4, 5, 6, 7]), params=p)
    ct = barycentric_distance(filt, fam([4, 5, 6, 7]), fam([0, 1, 2, 3]), params=p)
    within = barycentric_distance(filt, fam([0, 1]), fam([2, 3]), params=p)
    assert tc == pytest.approx(ct, abs=1e-8)
    assert tc > within


def test_identical_families(rng):
    X, filt, fam = two_cluster_setup(rng)
    p = TransportParams(max_iter=2000, tol=1e-8)
    tau = expected_barycenter_effect(filt, fam([0, 1, 4]), fam([0, 1, 4]), X, params=p)
    np.testing.assert_allclose(tau, 0.0, atol=1e-8)
    np.testing.assert_allclose(tv_baseline_effect(fam([0, 5]), fam([0, 5]), X), 0.0, atol=1e-12)
    # the self distance is the entropic self-cost, finite and reported as is
    assert np.isfinite(barycentric_distance(filt, fam([0, 1]), fam([0, 1]), params=p))


def test_tv_baseline_is_difference_of_grand_means(rng):
    X, filt, fam = two_cluster_setup(rng)
    groups = np.arange(X.shape[0]) // 40
    expect = X[np.isin(groups, [4, 5, 6])].mean(0) - X[np.isin(groups, [0, 1])].mean(0)
    np.testing.assert_allclose(tv_baseline_effect(fam([4, 5, 6]), fam([0, 1]), X), expect,
                               atol=1e-12)


def test_effect_sign_and_feature_shape(rng):
    X, filt, fam = two_cluster_setup(rng)
    tau = expected_barycenter_effect(filt, fam([4, 5, 6, 7]), fam([0, 1, 2, 3]), X,
                                     params=TransportParams(max_iter=500, tol=1e-8))
    assert tau.shape == (2,)
    assert 3.0 < tau[0] < 5.0
    with pytest.raises(LengthMismatch):
        expected_barycenter_effect(filt, fam([0]), fam([1]), X[:-1])
