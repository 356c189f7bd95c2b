"""Synthetic texture images for exporter tests."""

import numpy as np
import pytest
from PIL import Image


def make_texture(rng, kind, size=224):
    """Visually distinct noise patterns: stripes, smooth blobs, static."""
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "stripes":
        freq = rng.uniform(0.15, 0.25)
        angle = rng.uniform(-0.2, 0.2)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * (xx * np.cos(angle) + yy * np.sin(angle))
                      + phase)
        img = 0.5 + 0.4 * wave + 0.05 * rng.standard_normal((size, size))
    elif kind == "blobs":
        from scipy.ndimage import gaussian_filter

        base = np.kron(rng.standard_normal((size // 16, size // 16)),
                       np.ones((16, 16)))
        smooth = gaussian_filter(base, 8)
        img = 0.5 + smooth / (3 * smooth.std()) \
            + 0.02 * rng.standard_normal((size, size))
    elif kind == "static":
        img = rng.uniform(0, 1, (size, size))
    else:
        raise ValueError(kind)
    img = np.clip(img, 0, 1)
    return Image.fromarray((img * 255).astype(np.uint8)).convert("RGB")


def write_texture_dataset(root, per_class=20, size=224, seed=2024,
                          kinds=("stripes", "blobs", "static")):
    rng = np.random.default_rng(seed)
    for kind in kinds:
        class_dir = root / kind
        class_dir.mkdir(parents=True)
        for i in range(per_class):
            make_texture(rng, kind, size=size).save(class_dir / f"{i:02d}.png")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(7)
