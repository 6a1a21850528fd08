import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from centrex.algorithm import (
    CentrexConfig,
    assign,
    centrex,
    estimate_centroids,
    fuse,
    wald_test,
    wald_threshold,
)
from centrex.geometry import DatasetCovariances, Diagonal, ScaledIdentity, SharedEigenbasis


def shared(model, data):
    return DatasetCovariances.shared_model(model, *data.shape)


def blobs(rng, centers, n_each, sigma):
    centers = np.asarray(centers, dtype=float)
    pts = np.vstack([c + sigma * rng.standard_normal((n_each, centers.shape[1])) for c in centers])
    return pts, np.repeat(np.arange(len(centers)), n_each)


def reference_fuse(centroids, eps, d):
    """Literal transcription of the merge loop, recomputing all distances."""
    cs = [np.asarray(c, float) for c in centroids]
    while len(cs) > 1:
        best = None
        for i in range(len(cs)):
            for j in range(i + 1, len(cs)):
                dist = np.sqrt(np.sum((cs[i] - cs[j]) ** 2))
                if best is None or dist < best[0]:
                    best = (dist, i, j)
        dist, i, j = best
        if dist / d > eps:
            break
        cs[i] = 0.5 * (cs[i] + cs[j])
        del cs[j]
    return np.array(cs)


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [{"alpha": 0.0}, {"alpha": 1.0}, {"epsilon_e": 0.0}, {"epsilon_f": -1.0}, {"seed": -1}, {"seed": 2**64}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CentrexConfig(**kw)

    def test_defaults(self):
        cfg = CentrexConfig()
        assert (cfg.epsilon_e, cfg.alpha, cfg.max_iters) == (1e-3, 1e-3, 100)


class TestWald:
    def test_threshold(self):
        assert wald_threshold(2, 0.05) ** 2 == pytest.approx(stats.chi2.ppf(0.95, 2), rel=1e-12)
        assert wald_threshold(100, 1e-3) ** 2 == pytest.approx(stats.chi2.ppf(0.999, 100), rel=1e-12)

    def test_threshold_monotone_in_alpha(self):
        alphas = [1e-12, 1e-6, 1e-3, 0.01, 0.1, 0.5]
        mus = [wald_threshold(10, a) for a in alphas]
        assert all(a > b for a, b in zip(mus, mus[1:]))

    def test_decision(self):
        cov = ScaledIdentity(1.0)
        assert not wald_test(np.zeros(3), cov, 0.01)
        assert wald_test(np.full(3, 10.0), cov, 0.01)


class TestEstimate:
    def test_single_point(self):
        y = np.array([[3.0, 4.0]])
        C, diag = estimate_centroids(y, shared(ScaledIdentity(1.0), y), CentrexConfig(), np.random.default_rng(0))
        assert C.shape == (1, 2)
        assert np.allclose(C[0], y[0])
        assert diag["n_searches"] == 1

    def test_two_clusters(self):
        rng = np.random.default_rng(1)
        y, lab = blobs(rng, [[-10, 0], [10, 0]], 50, 0.5)
        covs = shared(ScaledIdentity(0.25), y)
        C, diag = estimate_centroids(y, covs, CentrexConfig(), np.random.default_rng(2))
        assert 2 <= len(C) <= 4
        for k in range(2):
            mean = y[lab == k].mean(axis=0)
            assert np.min(np.linalg.norm(C - mean, axis=1)) <= 0.5

    def test_smaller_alpha_marks_more(self):
        rng = np.random.default_rng(3)
        y, _ = blobs(rng, [[0, 0, 0], [6, 0, 0], [0, 6, 0]], 40, 1.0)
        covs = shared(ScaledIdentity(1.0), y)
        for seed in range(10):
            strict, _ = estimate_centroids(y, covs, CentrexConfig(alpha=1e-12), np.random.default_rng(seed))
            loose, _ = estimate_centroids(y, covs, CentrexConfig(alpha=0.1), np.random.default_rng(seed))
            assert len(strict) <= len(loose)

    def test_terminates_within_n_searches(self):
        rng = np.random.default_rng(4)
        y = rng.normal(size=(30, 2)) * 50  # sparse: many searches
        _, diag = estimate_centroids(y, shared(ScaledIdentity(1.0), y), CentrexConfig(), np.random.default_rng(0))
        assert diag["n_searches"] <= 30
        marked = sum(s["n_marked"] for s in diag["searches"])
        assert marked == 30


class TestFuse:
    def test_coincident(self):
        out, merges = fuse(np.array([[1.0, 2.0], [1.0, 2.0]]), 0.1, 2)
        assert np.array_equal(out, [[1.0, 2.0]])
        assert len(merges) == 1

    def test_line(self):
        out, _ = fuse(np.array([[0.0], [1.0], [10.0]]), 2.0, 1)
        assert np.array_equal(out, [[0.5], [10.0]])

    def test_far_apart_unchanged(self):
        c = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 9.0]])
        out, merges = fuse(c, 1.0, 2)
        assert np.array_equal(out, c) and merges == []

    def test_boundary_is_inclusive(self):
        out, _ = fuse(np.array([[0.0], [2.0]]), 2.0, 1)
        assert out.shape == (1, 1)

    def test_tie_goes_to_first_pair(self):
        # (0,1) and (1,2) both at distance 1: the first pair merges
        out, merges = fuse(np.array([[0.0], [1.0], [2.0]]), 1.0, 1)
        assert merges[0]["pair"] == [0, 1]
        assert np.array_equal(out, [[0.5], [2.0]])

    def test_matches_reference_with_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            k = int(rng.integers(1, 25))
            d = int(rng.integers(1, 4))
            c = rng.integers(0, 4, size=(k, d)).astype(float)
            eps = float(rng.uniform(0.2, 2.0))
            out, _ = fuse(c, eps, d)
            assert np.array_equal(out, reference_fuse(c, eps, d))

    @settings(max_examples=50, deadline=None)
    @given(
        pts=st.lists(st.lists(st.floats(-50, 50), min_size=2, max_size=2), min_size=1, max_size=12),
        eps=st.floats(0.1, 10),
    )
    def test_idempotent(self, pts, eps):
        once, _ = fuse(np.array(pts), eps, 2)
        twice, merges = fuse(once, eps, 2)
        assert np.array_equal(once, twice) and merges == []

    def test_invalid(self):
        with pytest.raises(ValueError):
            fuse(np.zeros((2, 1)), 0.0, 1)


class TestAssign:
    def test_one_centroid(self):
        y = np.random.default_rng(0).normal(size=(9, 2))
        C, lab = assign(y, shared(ScaledIdentity(1.0), y), np.zeros((1, 2)))
        assert np.all(lab == 0) and C.shape == (1, 2)

    def test_tie_lowest_index(self):
        y = np.array([[0.0, 0.0]])
        C, lab = assign(y, shared(ScaledIdentity(1.0), y), np.array([[-1.0, 0.0], [1.0, 0.0]]))
        assert lab.tolist() == [0]
        assert np.array_equal(C, [[-1.0, 0.0]])  # the other cluster is empty and removed

    def test_heteroscedastic_fixture(self):
        y = np.array([[0.0, 3.0], [0.0, 3.0], [3.9, 0.5]])
        lam = [np.array([1.0, 100.0]), np.array([100.0, 1.0]), np.array([1.0, 1.0])]
        covs = DatasetCovariances.per_point([Diagonal(l) for l in lam], 2)
        cents = np.array([[0.0, 0.0], [4.0, 0.0]])
        table = np.array([[np.sqrt(np.sum((p - c) ** 2 / l)) for c in cents] for p, l in zip(y, lam)])
        assert table[0] == pytest.approx([0.3, np.sqrt(16.09)])
        assert table[1] == pytest.approx([3.0, np.sqrt(9.16)])
        _, lab = assign(y, covs, cents)
        assert lab.tolist() == np.argmin(table, axis=1).tolist() == [0, 0, 1]

    def test_empty_removed_and_compacted(self):
        y = np.array([[0.0], [0.1], [10.0]])
        C, lab = assign(y, shared(ScaledIdentity(1.0), y), np.array([[0.0], [50.0], [10.0]]))
        assert np.array_equal(C, [[0.0], [10.0]])
        assert lab.tolist() == [0, 0, 1]

    def test_needs_centroids(self):
        with pytest.raises(ValueError):
            assign(np.zeros((2, 1)), shared(ScaledIdentity(1.0), np.zeros((2, 1))), np.empty((0, 1)))


class TestPipeline:
    def test_three_blobs(self):
        rng = np.random.default_rng(10)
        y, lab = blobs(rng, [[0, 0], [12, 0], [0, 12]], 40, 1.0)
        covs = shared(ScaledIdentity(1.0), y)
        for seed in range(20):
            res = centrex(y, covs, CentrexConfig(epsilon_f=1.0, seed=seed))
            assert res.K_hat == 3

    def test_single_blob(self):
        rng = np.random.default_rng(11)
        y = rng.normal(size=(80, 3))
        for seed in range(5):
            assert centrex(y, shared(ScaledIdentity(1.0), y), CentrexConfig(seed=seed)).K_hat == 1

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        y, _ = blobs(rng, [[0, 0, 0], [9, 0, 0]], 30, 1.0)
        covs = shared(ScaledIdentity(1.0), y)
        a = centrex(y, covs, CentrexConfig(seed=5))
        b = centrex(y, covs, CentrexConfig(seed=5))
        assert np.array_equal(a.centroids, b.centroids) and np.array_equal(a.labels, b.labels)

    def test_result_invariants(self):
        rng = np.random.default_rng(13)
        y, _ = blobs(rng, [[0, 0], [8, 0], [4, 7]], 25, 1.2)
        res = centrex(y, shared(ScaledIdentity(1.44), y), CentrexConfig(epsilon_f=0.5))
        assert set(res.labels.tolist()) == set(range(res.K_hat))
        d = res.to_dict()
        assert d["K_hat"] == res.K_hat and len(d["labels"]) == len(y)

    def test_rotated_pipeline(self):
        rng = np.random.default_rng(14)
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        R = q * np.sign(np.diag(r))
        y, _ = blobs(rng, [[0, 0, 0], [10, 0, 0]], 30, 1.0)
        deltas = rng.uniform(0.5, 1.5, size=(60, 3))
        covs = DatasetCovariances.per_point([SharedEigenbasis(R, dl) for dl in deltas], 3)
        diag = DatasetCovariances.per_point([Diagonal(dl) for dl in deltas], 3)
        a = centrex(y, covs, CentrexConfig(seed=3))
        b = centrex(y @ R, diag, CentrexConfig(seed=3))
        assert np.array_equal(a.labels, b.labels)
        assert np.max(np.abs(a.centroids - b.centroids @ R.T)) <= 1e-8
