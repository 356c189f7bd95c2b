"""PCA fitting, projection and the eigendecomposition oracle."""

import numpy as np
import pytest

from texfisher.pca import PcaError, fit_pca, load_pca, project, save_pca


def reconstruction_error(x, mean, components):
    centered = x - mean
    coords = centered @ components.T
    return float(((centered - coords @ components) ** 2).sum())


def svd_oracle_error(x, k):
    """Best possible rank-k reconstruction error, via SVD of centered data."""
    centered = x - x.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return float((s[k:] ** 2).sum())


class TestFit:
    def test_line_dataset_recovers_direction(self, rng):
        """Points on y = 2x have their variance along (1, 2)/sqrt(5)."""
        t = rng.uniform(-3, 3, 100)
        x = np.column_stack([t, 2 * t]) + 0.0
        model = fit_pca(x, 1)
        direction = np.array([1.0, 2.0]) / np.sqrt(5.0)
        dot = abs(float(model.components[0] @ direction))
        assert dot == pytest.approx(1.0, abs=1e-6)

    def test_full_rank_projection_is_isometric(self, rng):
        x = rng.standard_normal((50, 6))
        x -= x.mean(axis=0)
        model = fit_pca(x, 6)
        projected = project(model, x)
        orig = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
        new = np.linalg.norm(projected[:, None, :] - projected[None, :, :], axis=2)
        np.testing.assert_allclose(new, orig, atol=1e-6)

    def test_constant_dataset_is_degenerate(self):
        x = np.tile([3.0, -1.0, 2.0], (20, 1))
        model = fit_pca(x, 2)
        assert model.degenerate
        np.testing.assert_array_equal(model.explained_variance, 0.0)

    def test_components_orthonormal(self, rng):
        model = fit_pca(rng.standard_normal((40, 8)), 5)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-8)
        model.validate()

    def test_explained_variance_sorted(self, rng):
        model = fit_pca(rng.standard_normal((60, 7)), 7)
        assert (np.diff(model.explained_variance) <= 1e-12).all()
        assert (model.explained_variance >= 0).all()

    def test_reconstruction_matches_svd_oracle(self, rng):
        x = rng.standard_normal((20, 4))
        model = fit_pca(x, 2)
        err = reconstruction_error(x, model.mean, model.components)
        assert err == pytest.approx(svd_oracle_error(x, 2), abs=1e-6)

    def test_sign_convention(self, rng):
        model = fit_pca(rng.standard_normal((30, 5)), 4)
        for row in model.components:
            lead = row[np.abs(row) > 1e-12][0]
            assert lead >= 0

    def test_target_dim_too_large(self, rng):
        with pytest.raises(PcaError, match="target_dim"):
            fit_pca(rng.standard_normal((10, 3)), 4)

    def test_too_few_samples(self, rng):
        with pytest.raises(PcaError, match="samples"):
            fit_pca(rng.standard_normal((3, 5)), 3)

    def test_non_finite_rejected(self, rng):
        x = rng.standard_normal((10, 3))
        x[0, 0] = np.inf
        with pytest.raises(PcaError, match="non-finite"):
            fit_pca(x, 2)


class TestProject:
    def test_mean_projects_to_zero(self, rng):
        x = rng.standard_normal((25, 4)) + 3.0
        model = fit_pca(x, 2)
        np.testing.assert_allclose(project(model, model.mean[None, :]), 0.0,
                                   atol=1e-12)

    def test_component_row_projects_to_basis_vector(self, rng):
        model = fit_pca(rng.standard_normal((25, 4)), 3)
        point = model.mean + model.components[0]
        out = project(model, point[None, :])[0]
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=1e-10)

    def test_batch_matches_serial(self, rng):
        x = rng.standard_normal((30, 6))
        model = fit_pca(x, 4)
        batch = rng.standard_normal((5, 6))
        together = project(model, batch)
        one_by_one = np.vstack([project(model, row[None, :]) for row in batch])
        np.testing.assert_allclose(together, one_by_one, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        model = fit_pca(rng.standard_normal((30, 6)), 4)
        with pytest.raises(PcaError, match="features"):
            project(model, rng.standard_normal((5, 7)))


def test_save_load_roundtrip(tmp_path, rng):
    model = fit_pca(rng.standard_normal((40, 6)), 3)
    save_pca(model, tmp_path / "pca")
    back = load_pca(tmp_path / "pca")
    assert back.input_dim == 6 and back.output_dim == 3
    # storage is float32, so compare at that precision
    np.testing.assert_allclose(back.components, model.components, atol=1e-6)
    np.testing.assert_allclose(back.mean, model.mean, atol=1e-6)
