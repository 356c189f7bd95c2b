"""Shared builders for synthetic feature bundles and datasets."""

import numpy as np
import pytest

from texfisher.tensor_store import (
    DatasetManifest,
    FeatureBundle,
    ManifestEntry,
    save_manifest,
    write_bundle,
)


def random_bundle(rng, image_id="img", t1=6, t2=3, d1=4, d2=5, fc_dim=7):
    return FeatureBundle(
        penultimate=rng.normal(size=(t1, d1)).astype(np.float32),
        last=rng.normal(size=(t2, d2)).astype(np.float32),
        fc=rng.normal(size=fc_dim).astype(np.float32),
        image_id=image_id,
    )


def _sample_mixture(rng, weights, means, variances, n):
    comp = rng.choice(len(weights), size=n, p=weights)
    return means[comp] + rng.normal(size=(n, means.shape[1])) * np.sqrt(variances[comp])


def make_class_generators(rng, n_classes, d1, d2, fc_dim, n_components=3,
                          spread=5.0):
    """Per-class sampling parameters: one mixture per layer plus an fc mean."""
    classes = []
    for _ in range(n_classes):
        cls = {}
        for key, dim in (("penultimate", d1), ("last", d2)):
            cls[key] = {
                "weights": rng.dirichlet(np.full(n_components, 5.0)),
                "means": rng.uniform(-spread, spread, (n_components, dim)),
                "variances": rng.uniform(0.3, 1.0, (n_components, dim)),
            }
        cls["fc_mean"] = rng.normal(0.0, 3.0, fc_dim)
        classes.append(cls)
    return classes


def build_synthetic_dataset(root, n_classes=5, per_class=40, t1=64, t2=16,
                            d1=8, d2=12, fc_dim=10, seed=123,
                            sample_tags=None, split_tags=None):
    """Write a labeled bundle dataset under `root`; returns the manifest path.

    Each class draws its local features from its own seeded mixtures and
    its pooled descriptor from a class mean plus small noise.  Optional
    tag lists cycle over the images of each class.
    """
    rng = np.random.default_rng(seed)
    class_names = [f"class{c}" for c in range(n_classes)]
    generators = make_class_generators(rng, n_classes, d1, d2, fc_dim)
    entries = []
    for c, name in enumerate(class_names):
        gen = generators[c]
        for j in range(per_class):
            image_id = f"{name}_{j:03d}"
            bundle = FeatureBundle(
                penultimate=_sample_mixture(
                    rng, **gen["penultimate"], n=t1).astype(np.float32),
                last=_sample_mixture(rng, **gen["last"], n=t2).astype(np.float32),
                fc=(gen["fc_mean"] + 0.1 * rng.normal(size=fc_dim)).astype(np.float32),
                image_id=image_id,
            )
            entry = write_bundle(bundle, root)
            entries.append(ManifestEntry(
                image_id=entry.image_id,
                penultimate_path=entry.penultimate_path,
                last_path=entry.last_path,
                fc_path=entry.fc_path,
                class_label=name,
                sample_tag=sample_tags[j % len(sample_tags)] if sample_tags else None,
                split_tag=split_tags[j % len(split_tags)] if split_tags else None,
            ))
    manifest = DatasetManifest(entries=entries, class_names=class_names)
    manifest_path = root / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
