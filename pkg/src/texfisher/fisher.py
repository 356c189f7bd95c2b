"""Fisher vector encoding of pooled two-layer local features.

An image's local features from both convolutional layers are merged into
one T x D set (the deeper layer projected down to D first), then encoded
as the normalized gradient of the mixture log-likelihood.  The encoding
has one scalar block per component plus K x D mean and variance blocks,
laid out [w | mu | sigma] in component-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gmm import GmmModel, responsibilities
from .pca import PcaModel, project
from .tensor_store import DatasetManifest, FeatureBundle, read_tensor, write_tensor


class EncodingError(ValueError):
    pass


@dataclass
class MergedFeatureSet:
    """Single T x D set of local features pooled from two layers."""

    features: np.ndarray
    source_counts: tuple[int, int]

    def validate(self) -> None:
        t1, t2 = self.source_counts
        if self.features.shape[0] != t1 + t2:
            raise EncodingError(
                f"row count {self.features.shape[0]} != T1 + T2 = {t1 + t2}"
            )


@dataclass
class FisherVector:
    """Length K(2D+1) encoding, blocks [weights | means | variances]."""

    values: np.ndarray
    k: int
    d: int

    def __post_init__(self):
        expected = self.k * (2 * self.d + 1)
        if self.values.shape != (expected,):
            raise EncodingError(
                f"expected length {expected} for K={self.k}, D={self.d}, "
                f"got shape {self.values.shape}"
            )

    @property
    def weight_block(self) -> np.ndarray:
        return self.values[: self.k]

    @property
    def mean_block(self) -> np.ndarray:
        return self.values[self.k : self.k * (1 + self.d)].reshape(self.k, self.d)

    @property
    def variance_block(self) -> np.ndarray:
        return self.values[self.k * (1 + self.d) :].reshape(self.k, self.d)


def fv_length(k: int, d: int) -> int:
    return k * (2 * d + 1)


def merge_layers(bundle: FeatureBundle, pca: PcaModel) -> MergedFeatureSet:
    """Stack penultimate-layer rows with the projected last-layer rows."""
    bundle.validate()
    d1 = bundle.penultimate.shape[1]
    if pca.output_dim != d1:
        raise EncodingError(
            f"projection output dim {pca.output_dim} != penultimate dim {d1}"
        )
    if pca.input_dim != bundle.last.shape[1]:
        raise EncodingError(
            f"projection input dim {pca.input_dim} != last-layer dim "
            f"{bundle.last.shape[1]}"
        )
    reduced = project(pca, bundle.last)
    features = np.vstack(
        [np.asarray(bundle.penultimate, dtype=np.float64), reduced]
    )
    return MergedFeatureSet(
        features=features,
        source_counts=(bundle.penultimate.shape[0], bundle.last.shape[0]),
    )


def encode_fv(model: GmmModel, x_set: MergedFeatureSet) -> FisherVector:
    """Encode a merged feature set against a fitted mixture.

    weight block:   (1 / T sqrt(w_i))   sum_t (gamma_ti - w_i)
    mean block:     (1 / T sqrt(w_i))   sum_t gamma_ti (x_td - mu_id) / sigma_id
    variance block: (1 / T sqrt(2 w_i)) sum_t gamma_ti ((x_td - mu_id)^2 / var_id - 1)
    """
    x_set.validate()
    x = np.asarray(x_set.features, dtype=np.float64)
    t = x.shape[0]
    if t < 1:
        raise EncodingError("need at least one local feature")
    if x.shape[1] != model.dim:
        raise EncodingError(
            f"feature dim {x.shape[1]} does not match mixture dim {model.dim}"
        )
    k, d = model.n_components, model.dim
    gamma = responsibilities(model, x)
    w = model.weights
    sigma = np.sqrt(model.variances)

    weight_block = (gamma.sum(axis=0) - t * w) / (t * np.sqrt(w))
    mean_block = np.empty((k, d))
    var_block = np.empty((k, d))
    for i in range(k):
        diff = (x - model.means[i]) / sigma[i]
        g = gamma[:, i : i + 1]
        mean_block[i] = (g * diff).sum(axis=0) / (t * np.sqrt(w[i]))
        var_block[i] = (g * (diff * diff - 1.0)).sum(axis=0) / (t * np.sqrt(2.0 * w[i]))

    for name, block in (("weight", weight_block), ("mean", mean_block),
                        ("variance", var_block)):
        if not np.isfinite(block).all():
            raise EncodingError(f"non-finite values in {name} block")

    values = np.concatenate([weight_block, mean_block.ravel(), var_block.ravel()])
    return FisherVector(values=values, k=k, d=d)


def encode_dataset(manifest: DatasetManifest, pca: PcaModel,
                   model: GmmModel) -> dict[str, FisherVector]:
    """Encode every manifest entry; aborts on the first failing image."""
    out: dict[str, FisherVector] = {}
    for entry in manifest.entries:
        try:
            bundle = manifest.load_bundle(entry)
            out[entry.image_id] = encode_fv(model, merge_layers(bundle, pca))
        except Exception as exc:
            raise EncodingError(f"image {entry.image_id!r}: {exc}") from exc
    return out


def save_fv(fv: FisherVector, base_path) -> None:
    """Write `<base>.mlfv` plus a `<base>.json` sidecar."""
    base = Path(base_path)
    write_tensor(fv.values, base.with_suffix(".mlfv"))
    sidecar = {"k": fv.k, "d": fv.d, "layout": "w|mu|sigma"}
    with open(base.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_fv(base_path) -> FisherVector:
    base = Path(base_path)
    with open(base.with_suffix(".json"), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    values = read_tensor(base.with_suffix(".mlfv")).astype(np.float64)
    return FisherVector(values=values, k=int(sidecar["k"]), d=int(sidecar["d"]))
