"""Mixture initialization, EM fitting, posteriors and likelihood."""

import numpy as np
import pytest

from texfisher.gmm import (
    GmmError,
    GmmModel,
    em_fit,
    init_kmeans,
    log_likelihood,
    posteriors,
    responsibilities,
    subsample_rows,
    variance_floor,
)


def two_clouds(rng, n_per=10, d=2, sep=10.0):
    a = rng.normal(size=(n_per, d)) + np.array([-sep] + [0.0] * (d - 1))
    b = rng.normal(size=(n_per, d)) + np.array([sep] + [0.0] * (d - 1))
    return np.vstack([a, b])


def exhaustive_two_means(points):
    """Optimal 2-means centers by enumerating every bipartition.

    Point 0 is pinned to one side, so each partition is visited once.
    """
    n = points.shape[0]
    sq = (points * points).sum(axis=1)
    ints = np.arange(1, 2 ** (n - 1), dtype=np.int64)
    masks = ((ints[:, None] >> np.arange(n - 1)) & 1).astype(bool)
    masks = np.hstack([np.zeros((masks.shape[0], 1), dtype=bool), masks])
    n_a = masks.sum(axis=1)
    s1_a = masks @ points
    s2_a = masks @ sq
    n_b = n - n_a
    s1_b = points.sum(axis=0) - s1_a
    s2_b = sq.sum() - s2_a
    sse = (s2_a - (s1_a**2).sum(axis=1) / n_a) + (s2_b - (s1_b**2).sum(axis=1) / n_b)
    best = int(np.argmin(sse))
    mask = masks[best]
    return points[mask].mean(axis=0), points[~mask].mean(axis=0)


class TestInitKmeans:
    def test_single_component_closed_form(self, rng):
        data = rng.normal(2.0, 1.5, size=(50, 3))
        model = init_kmeans(data, 1, seed=0)
        np.testing.assert_allclose(model.means[0], data.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(model.variances[0], data.var(axis=0), rtol=1e-10)
        assert model.weights[0] == 1.0

    def test_separated_clouds_recovered(self, rng):
        data = two_clouds(rng, n_per=10)
        oracle_a, oracle_b = exhaustive_two_means(data)
        oracle = sorted([oracle_a, oracle_b], key=lambda c: c[0])
        assert abs(oracle[0][0] + 10.0) < 0.5 and abs(oracle[1][0] - 10.0) < 0.5

        model = init_kmeans(data, 2, seed=7)
        centers = sorted(model.means, key=lambda c: c[0])
        np.testing.assert_allclose(centers[0], oracle[0], atol=0.5)
        np.testing.assert_allclose(centers[1], oracle[1], atol=0.5)
        assert np.abs(centers[0][0] + 10.0) < 0.5
        assert np.abs(centers[1][0] - 10.0) < 0.5

    def test_deterministic_given_seed(self, rng):
        data = rng.normal(size=(60, 4))
        a = init_kmeans(data, 3, seed=11)
        b = init_kmeans(data, 3, seed=11)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.variances, b.variances)

    def test_too_few_points(self, rng):
        with pytest.raises(GmmError, match="points"):
            init_kmeans(rng.normal(size=(2, 3)), 5, seed=0)

    def test_weights_floored_and_normalized(self, rng):
        # 97 points in one spot, 3 outliers: the small cluster gets the floor
        data = np.vstack([np.zeros((97, 2)), np.full((3, 2), 50.0)])
        data += 0.01 * rng.normal(size=data.shape)
        model = init_kmeans(data, 2, seed=1)
        expected = np.array([0.97, 0.05])  # raw 0.03 floored at 1/(10K) = 0.05
        expected /= expected.sum()
        np.testing.assert_allclose(sorted(model.weights), sorted(expected),
                                   rtol=1e-12)
        assert model.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_duplicate_points_fill_all_clusters(self):
        data = np.tile([[0.0, 0.0], [1.0, 1.0]], (5, 1))
        model = init_kmeans(data, 3, seed=0)
        model.validate()


class TestEmFit:
    def test_single_gaussian_mle_after_one_step(self, rng):
        data = rng.normal(3.0, 2.0, size=(200, 2))
        init = init_kmeans(data, 1, seed=0)
        # push init off the optimum to prove one M-step restores it
        init.means[0] += 1.0
        model, _ = em_fit(data, init, max_iters=1)
        np.testing.assert_allclose(model.means[0], data.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(model.variances[0], data.var(axis=0), rtol=1e-10)

    def test_stationary_at_truth(self, rng):
        truth = GmmModel(
            weights=np.array([0.4, 0.6]),
            means=np.array([[-4.0, 0.0], [4.0, 1.0]]),
            variances=np.array([[1.0, 2.0], [1.5, 0.5]]),
            var_floor=1e-12,
        )
        comp = rng.choice(2, size=10000, p=truth.weights)
        data = truth.means[comp] + rng.normal(size=(10000, 2)) * np.sqrt(
            truth.variances[comp]
        )
        model, trace = em_fit(data, truth, max_iters=50, tol=1e-5)
        assert trace.converged
        assert trace.n_iter <= 10

    def test_monotone_loglik(self, rng):
        data = rng.normal(size=(200, 2))
        init = init_kmeans(data, 2, seed=3)
        _, trace = em_fit(data, init, max_iters=100, tol=1e-9)
        diffs = np.diff(trace.loglik)
        assert (diffs >= -1e-8).all()

    def test_zero_max_iters_rejected(self, rng):
        data = rng.normal(size=(20, 2))
        init = init_kmeans(data, 1, seed=0)
        with pytest.raises(GmmError, match="max_iters"):
            em_fit(data, init, max_iters=0)

    def test_bad_tol_rejected(self, rng):
        data = rng.normal(size=(20, 2))
        init = init_kmeans(data, 1, seed=0)
        with pytest.raises(GmmError, match="tol"):
            em_fit(data, init, tol=0.0)

    def test_collapsed_component_reset(self, rng):
        data = rng.normal(size=(100, 2))
        init = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[0.0, 0.0], [1e8, 1e8]]),
            variances=np.ones((2, 2)),
            var_floor=1e-12,
        )
        model, trace = em_fit(data, init, max_iters=20)
        assert any("collapsed" in event for event in trace.events)
        model.validate()

    def test_variance_floor_enforced(self, rng):
        # second dimension is constant: its MLE variance is zero
        data = np.column_stack([rng.normal(size=200), np.zeros(200)])
        init = init_kmeans(data, 2, seed=5)
        model, _ = em_fit(data, init)
        assert (model.variances >= model.var_floor).all()
        assert model.var_floor == pytest.approx(variance_floor(data))

    def test_bitwise_determinism(self, rng):
        data = rng.normal(size=(150, 3))
        runs = []
        for _ in range(2):
            init = init_kmeans(data, 3, seed=42)
            model, _ = em_fit(data, init)
            runs.append(model)
        assert np.array_equal(runs[0].weights, runs[1].weights)
        assert np.array_equal(runs[0].means, runs[1].means)
        assert np.array_equal(runs[0].variances, runs[1].variances)


class TestPosteriors:
    def test_single_component(self, rng):
        model = init_kmeans(rng.normal(size=(30, 2)), 1, seed=0)
        np.testing.assert_array_equal(posteriors(model, np.zeros(2)), [1.0])

    def test_symmetric_point(self):
        model = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-3.0], [3.0]]),
            variances=np.ones((2, 1)),
            var_floor=1e-12,
        )
        np.testing.assert_allclose(posteriors(model, np.zeros(1)), [0.5, 0.5],
                                   atol=1e-15)

    def test_point_at_far_component_mean(self):
        model = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[0.0], [10.0]]),
            variances=np.ones((2, 1)),
            var_floor=1e-12,
        )
        gamma = posteriors(model, np.zeros(1))
        assert gamma[0] > 0.999

    def test_normalization_over_random_pairs(self, rng):
        for _ in range(200):
            k, d = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            w = rng.dirichlet(np.ones(k))
            model = GmmModel(
                weights=w,
                means=rng.normal(size=(k, d)) * 5,
                variances=rng.uniform(0.1, 3.0, (k, d)),
                var_floor=1e-12,
            )
            gamma = posteriors(model, rng.normal(size=d) * 5)
            assert abs(gamma.sum() - 1.0) < 1e-12
            assert (gamma >= 0).all()

    def test_extreme_point_does_not_underflow(self):
        model = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[0.0], [1.0]]),
            variances=np.ones((2, 1)),
            var_floor=1e-12,
        )
        gamma = posteriors(model, np.array([1e4]))
        assert np.isfinite(gamma).all()
        assert abs(gamma.sum() - 1.0) < 1e-12

    def test_dimension_mismatch(self, rng):
        model = init_kmeans(rng.normal(size=(30, 2)), 1, seed=0)
        with pytest.raises(GmmError, match="dim"):
            posteriors(model, np.zeros(3))


class TestLogLikelihood:
    def test_standard_normal_at_origin(self):
        model = GmmModel(
            weights=np.array([1.0]),
            means=np.zeros((1, 1)),
            variances=np.ones((1, 1)),
            var_floor=1e-12,
        )
        value = log_likelihood(model, np.zeros((1, 1)))
        assert value == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)

    def test_duplicated_data_doubles_value(self, rng):
        model = init_kmeans(rng.normal(size=(40, 3)), 2, seed=0)
        data = rng.normal(size=(17, 3))
        single = log_likelihood(model, data)
        double = log_likelihood(model, np.vstack([data, data]))
        assert double == 2.0 * single

    def test_translation_invariance(self, rng):
        data = rng.normal(size=(30, 2))
        model = init_kmeans(data, 2, seed=1)
        shift = np.array([5.0, -7.0])
        shifted = GmmModel(
            weights=model.weights,
            means=model.means + shift,
            variances=model.variances,
            var_floor=model.var_floor,
        )
        a = log_likelihood(model, data)
        b = log_likelihood(shifted, data + shift)
        assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_responsibilities_rows_sum_to_one(rng):
    data = rng.normal(size=(50, 3))
    model = init_kmeans(data, 4, seed=2)
    gamma = responsibilities(model, data)
    np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-12)


def test_subsample_respects_limit_and_order(rng):
    data = np.arange(100, dtype=np.float64).reshape(50, 2)
    out = subsample_rows(data, 10, seed=0)
    assert out.shape == (10, 2)
    assert (np.diff(out[:, 0]) > 0).all()
    same = subsample_rows(data, 100, seed=0)
    assert same is data
