#!/usr/bin/env python3
"""Shrinking deep-layer features to the early layer's width.

The deeper convolutional layer has more channels than the earlier one,
so its local features are projected down before the two sets can pool.
The projection keeps the directions of largest variance.
"""

import numpy as np

from texfisher import fit_pca, project

rng = np.random.default_rng(1)

# Fake "deep layer" features: 12 channels, but most variance lives in a
# 4-dimensional subspace.
latent = rng.standard_normal((2000, 4)) * np.array([5.0, 3.0, 2.0, 1.0])
mixing = rng.standard_normal((4, 12))
deep_features = latent @ mixing + 0.05 * rng.standard_normal((2000, 12))

model = fit_pca(deep_features, target_dim=4)
print("explained variance:", np.round(model.explained_variance, 2))
print("kept / total variance: {:.1%}".format(
    model.explained_variance.sum() / deep_features.var(axis=0, ddof=1).sum()))

reduced = project(model, deep_features)
print("projected shape:", reduced.shape)

# The rows of the projection are orthonormal, so distances inside the
# kept subspace are preserved.
gram = model.components @ model.components.T
print("orthonormality error:", float(np.abs(gram - np.eye(4)).max()))

# Reconstruction from 4 kept directions recovers the signal almost exactly.
reconstructed = reduced @ model.components + model.mean
err = np.linalg.norm(deep_features - reconstructed) / np.linalg.norm(deep_features)
print(f"relative reconstruction error with 4 of 12 dims: {err:.4f}")
