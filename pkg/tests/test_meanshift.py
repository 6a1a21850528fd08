import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from centrex.geometry import DatasetCovariances, Diagonal, ScaledIdentity, SharedEigenbasis
from centrex.kernels import FlatKernel, GaussianKernel, WaldKernel
from centrex.meanshift import (
    IterationConfig,
    Problem,
    cost_J,
    iterate_to_fixed_point,
    mean_shift_map,
    mean_shift_map_classic,
)


def random_orthogonal(d, rng):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def dense_map(phi, data, mats, kernel):
    """Oracle: assemble sum w S^-1 explicitly and solve."""
    A = np.zeros((data.shape[1],) * 2)
    b = np.zeros(data.shape[1])
    for y, S in zip(data, mats):
        Si = np.linalg.inv(S)
        w = kernel((y - phi) @ Si @ (y - phi))
        A += w * Si
        b += w * Si @ y
    return np.linalg.solve(A, b)


def shared(model, data):
    return DatasetCovariances.shared_model(model, *data.shape)


class TestMap:
    def test_single_point(self):
        y = np.array([[1.5, -2.0, 3.0]])
        covs = shared(Diagonal(np.array([1.0, 2.0, 3.0])), y)
        for phi in (np.zeros(3), np.array([10.0, 10.0, 10.0])):
            assert np.allclose(mean_shift_map(phi, y, covs, WaldKernel(3)), y[0], atol=1e-14)

    def test_identical_points(self):
        y = np.tile([2.0, 7.0], (6, 1))
        covs = DatasetCovariances.per_point([Diagonal(np.array([i + 1.0, 1.0])) for i in range(6)], 2)
        assert np.allclose(mean_shift_map(np.zeros(2), y, covs, GaussianKernel()), [2.0, 7.0], atol=1e-14)

    def test_symmetric_pair(self):
        y = np.array([[-1.0, 0.0], [1.0, 0.0]])
        out = mean_shift_map(np.zeros(2), y, shared(ScaledIdentity(1.0), y), WaldKernel(2))
        assert np.allclose(out, 0.0, atol=1e-15)

    def test_dense_oracle_diagonal(self):
        rng = np.random.default_rng(11)
        y = rng.normal(size=(5, 3)) * 2
        lam = rng.uniform(0.3, 4, size=(5, 3))
        covs = DatasetCovariances.per_point([Diagonal(r) for r in lam], 3)
        phi = rng.normal(size=3)
        k = WaldKernel(3)
        want = dense_map(phi, y, [np.diag(r) for r in lam], k)
        assert np.max(np.abs(mean_shift_map(phi, y, covs, k) - want)) <= 1e-12

    def test_dense_oracle_rotated(self):
        rng = np.random.default_rng(12)
        R = random_orthogonal(4, rng)
        y = rng.normal(size=(5, 4))
        deltas = rng.uniform(0.5, 3, size=(5, 4))
        covs = DatasetCovariances.per_point([SharedEigenbasis(R, dl) for dl in deltas], 4)
        phi = rng.normal(size=4)
        k = WaldKernel(4)
        want = dense_map(phi, y, [R @ np.diag(dl) @ R.T for dl in deltas], k)
        assert np.max(np.abs(mean_shift_map(phi, y, covs, k) - want)) <= 1e-12

    def test_rotation_equivalence(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            d = int(rng.integers(2, 6))
            R = random_orthogonal(d, rng)
            y = rng.normal(size=(15, d)) * 3
            deltas = rng.uniform(0.5, 3, size=(15, d))
            covs = DatasetCovariances.per_point([SharedEigenbasis(R, dl) for dl in deltas], d)
            diag = DatasetCovariances.per_point([Diagonal(dl) for dl in deltas], d)
            phi = rng.normal(size=d)
            k = WaldKernel(d)
            direct = mean_shift_map(phi, y, covs, k)
            via = R @ mean_shift_map(R.T @ phi, y @ R, diag, k)
            assert np.max(np.abs(direct - via)) <= 1e-10

    def test_barycenter_box(self):
        rng = np.random.default_rng(14)
        y = rng.normal(size=(30, 3)) * 5
        lam = rng.uniform(0.5, 2, size=(30, 3))
        covs = DatasetCovariances.per_point([Diagonal(r) for r in lam], 3)
        for phi in rng.normal(size=(20, 3)) * 20:
            out = mean_shift_map(phi, y, covs, WaldKernel(3))
            assert np.all(out >= y.min(axis=0) - 1e-12) and np.all(out <= y.max(axis=0) + 1e-12)

    def test_underflow_falls_back_to_nearest(self):
        y = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 3.0]])
        covs = shared(ScaledIdentity(1.0), y)
        out = mean_shift_map(np.array([100.0, 1.0]), y, covs, FlatKernel(0.5))
        assert np.array_equal(out, [10.0, 0.0])

    def test_shape_mismatch(self):
        y = np.zeros((4, 2))
        with pytest.raises(ValueError):
            mean_shift_map(np.zeros(2), y, DatasetCovariances.shared_model(ScaledIdentity(1.0), 3, 2), WaldKernel(2))


class TestClassic:
    def test_flat_mean(self):
        y = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        assert np.allclose(mean_shift_map_classic(np.zeros(2), y, 10.0, FlatKernel(1.0)), [1.0, 1.0])

    def test_same_as_general(self):
        y = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        k = FlatKernel(1.0)
        a = mean_shift_map_classic(np.zeros(2), y, 10.0, k)
        b = mean_shift_map(np.zeros(2), y, shared(ScaledIdentity(100.0), y), k)
        assert np.array_equal(a, b)

    def test_random_agreement(self):
        rng = np.random.default_rng(21)
        y = rng.normal(size=(20, 4))
        h = 1.7
        for k in (WaldKernel(4), GaussianKernel(5.0, 1.0), GaussianKernel(1.0, 1.0, "linear")):
            phi = rng.normal(size=4)
            a = mean_shift_map_classic(phi, y, h, k)
            b = mean_shift_map(phi, y, shared(ScaledIdentity(h * h), y), k)
            assert np.max(np.abs(a - b)) <= 1e-12

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            mean_shift_map_classic(np.zeros(1), np.zeros((2, 1)), 0.0, WaldKernel(1))


class TestIteration:
    def test_already_fixed(self):
        y = np.tile([1.0, 2.0], (5, 1))
        phi, tr = iterate_to_fixed_point(y[0], y, shared(ScaledIdentity(1.0), y), WaldKernel(2))
        assert tr.stop_reason == "converged"
        assert len(tr.iterates) == 2
        assert np.allclose(phi, [1.0, 2.0])

    def test_single_blob_tracks_sample_mean(self):
        rng = np.random.default_rng(5)
        y = rng.normal(size=(100, 2)) + [3.0, -1.0]
        phi, tr = iterate_to_fixed_point(y[17], y, shared(ScaledIdentity(1.0), y), WaldKernel(2))
        assert tr.stop_reason == "converged"
        assert np.linalg.norm(phi - y.mean(axis=0)) <= 5 / np.sqrt(100)

    def test_forced_cap(self):
        rng = np.random.default_rng(6)
        y = rng.normal(size=(50, 2)) * 3
        cfg = IterationConfig(epsilon_e=1e-300, max_iters=2)
        _, tr = iterate_to_fixed_point(y[0], y, shared(ScaledIdentity(1.0), y), WaldKernel(2), cfg)
        assert tr.stop_reason == "max_iters"
        assert len(tr.iterates) == 3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            IterationConfig(max_iters=1)
        with pytest.raises(ValueError):
            IterationConfig(epsilon_e=0.0)

    def test_boost_changes_first_step_only(self):
        rng = np.random.default_rng(8)
        y = np.vstack([rng.normal(size=(40, 2)), rng.normal(size=(40, 2)) + 6])
        covs = shared(ScaledIdentity(1.0), y)
        k = WaldKernel(2)
        cfg = IterationConfig(max_iters=2, epsilon_e=1e-300)
        _, plain = iterate_to_fixed_point(y[0], y, covs, k, cfg)
        _, boosted = iterate_to_fixed_point(y[0], y, covs, k, cfg, init_cov_boost=ScaledIdentity(1.0))
        assert boosted.boosted_first_step and not plain.boosted_first_step
        # the boosted first step equals the map with doubled covariances
        want = mean_shift_map(y[0], y, shared(ScaledIdentity(2.0), y), k)
        assert np.allclose(boosted.iterates[1], want, atol=1e-13)
        assert np.allclose(boosted.iterates[2], mean_shift_map(boosted.iterates[1], y, covs, k), atol=1e-13)

    def test_heuristic_flag_disables_boost(self):
        y = np.random.default_rng(0).normal(size=(10, 2))
        cfg = IterationConfig(use_init_heuristic=False)
        _, tr = iterate_to_fixed_point(y[0], y, shared(ScaledIdentity(1.0), y), WaldKernel(2), cfg, ScaledIdentity(1.0))
        assert not tr.boosted_first_step

    def test_boost_basis_mismatch(self):
        rng = np.random.default_rng(2)
        y = rng.normal(size=(5, 3))
        covs = shared(SharedEigenbasis(random_orthogonal(3, rng), np.ones(3)), y)
        with pytest.raises(ValueError):
            iterate_to_fixed_point(y[0], y, covs, WaldKernel(3), init_cov_boost=SharedEigenbasis(random_orthogonal(3, rng), np.ones(3)))

    def test_steps_shrink_on_convergent_runs(self):
        rng = np.random.default_rng(9)
        y = rng.normal(size=(60, 3))
        _, tr = iterate_to_fixed_point(y[3], y, shared(ScaledIdentity(1.0), y), WaldKernel(3), IterationConfig(epsilon_e=1e-9))
        steps = np.linalg.norm(np.diff(np.array(tr.iterates), axis=0), axis=1)
        assert tr.stop_reason == "converged"
        assert steps[-1] < 1e-6


class TestCost:
    def test_lone_point(self):
        y = np.array([[1.0, 2.0]])
        for k in (WaldKernel(2), GaussianKernel()):
            assert cost_J(y, y, shared(Diagonal(np.array([2.0, 3.0])), y), k) == 1 * k.antiderivative(0.0) == 0.0

    def test_finite_difference_linear_gaussian(self):
        # one datum at 0 with unit variance in d = 1: J(theta) = R(theta^2)
        y = np.zeros((1, 1))
        covs = shared(ScaledIdentity(1.0), y)
        k = GaussianKernel(2.0, 1.0, form="linear")
        for t in (0.3, 1.0, 4.0, 9.0):
            h = 1e-5
            jp = cost_J(np.array([[np.sqrt(t + h)]]), y, covs, k)
            jm = cost_J(np.array([[np.sqrt(t - h)]]), y, covs, k)
            assert (jp - jm) / (2 * h) == pytest.approx(k(t), abs=1e-6)

    def test_finite_difference_wald(self):
        y = np.zeros((1, 1))
        covs = shared(ScaledIdentity(1.0), y)
        k = WaldKernel(1)
        for t in (0.2, 2.0, 6.0):
            h = 1e-5
            jp = cost_J(np.array([[np.sqrt(t + h)]]), y, covs, k)
            jm = cost_J(np.array([[np.sqrt(t - h)]]), y, covs, k)
            assert (jp - jm) / (2 * h) == pytest.approx(k(t), abs=1e-6)

    def test_sums_over_thetas(self):
        rng = np.random.default_rng(4)
        y = rng.normal(size=(7, 2))
        covs = shared(ScaledIdentity(2.0), y)
        k = WaldKernel(2)
        th = rng.normal(size=(3, 2))
        assert cost_J(th, y, covs, k) == pytest.approx(sum(cost_J(t, y, covs, k) for t in th), rel=1e-14)

    def test_unsupported_kernel(self):
        y = np.zeros((2, 1))
        with pytest.raises(TypeError):
            cost_J(y, y, shared(ScaledIdentity(1.0), y), lambda t: np.exp(-t))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 5]), gauss=st.booleans())
def test_cost_never_increases(seed, d, gauss):
    rng = np.random.default_rng(seed)
    n = 30
    y = rng.normal(size=(n, d)) * rng.uniform(1, 4) + rng.integers(0, 2, size=(n, 1)) * 8
    lam = rng.uniform(0.5, 3, size=(n, d))
    covs = DatasetCovariances.per_point([Diagonal(r) for r in lam], d)
    k = GaussianKernel(5.0, 1.0, "linear") if gauss else WaldKernel(d)
    cfg = IterationConfig(epsilon_e=1e-8, use_init_heuristic=False)
    _, tr = iterate_to_fixed_point(y[0], y, covs, k, cfg)
    J = np.array(tr.cost_values)
    assert np.all(np.diff(J) <= 1e-9 * (1 + np.abs(J[:-1])))


def test_problem_reuse_matches_fresh():
    rng = np.random.default_rng(1)
    y = rng.normal(size=(20, 3))
    covs = shared(Diagonal(np.array([1.0, 2.0, 0.5])), y)
    prob = Problem(y, covs)
    a, _ = iterate_to_fixed_point(y[2], y, covs, WaldKernel(3), problem=prob)
    b, _ = iterate_to_fixed_point(y[2], y, covs, WaldKernel(3))
    assert np.array_equal(a, b)
