"""Principal component analysis used to shrink deep-layer features.

The deeper layer has more channels than the earlier one; projecting it
down to the earlier layer's width lets both layers pool into one set of
local features.  Fitting is a plain eigendecomposition of the D x D
covariance of centered data (D stays small for the supported networks,
so the Gram-matrix route is never worth it).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor_store import read_tensor, write_tensor

_RANK_TOL = 1e-10


class PcaError(ValueError):
    pass


@dataclass
class PcaModel:
    """Centered linear projection onto the leading principal directions.

    `components` rows are orthonormal, ordered by descending explained
    variance.  `degenerate` is set when the data had lower rank than the
    requested dimension (the missing directions carry zero variance).
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    degenerate: bool = False

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]

    def validate(self) -> None:
        gram = self.components @ self.components.T
        err = np.abs(gram - np.eye(self.output_dim)).max()
        if err >= 1e-8:
            raise PcaError(f"components not orthonormal (max deviation {err:.3e})")
        ev = self.explained_variance
        if (ev < 0).any() or (np.diff(ev) > 1e-12).any():
            raise PcaError("explained_variance must be non-negative and non-increasing")


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip rows so the first non-negligible coordinate is non-negative."""
    out = components.copy()
    for row in out:
        nonzero = np.nonzero(np.abs(row) > 1e-12)[0]
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1.0
    return out


def fit_pca(features, target_dim: int) -> PcaModel:
    """Fit a PCA projection to `features` (M x D) keeping `target_dim` directions.

    Requires M > target_dim and target_dim <= D.  Rank-deficient data is
    accepted: the available directions are kept, the remaining explained
    variances are clamped to zero and the model is flagged degenerate.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise PcaError(f"features must be 2D, got {x.ndim}D")
    m, d = x.shape
    if not np.isfinite(x).all():
        raise PcaError("features contain non-finite values")
    if target_dim < 1 or target_dim > d:
        raise PcaError(f"target_dim {target_dim} not in [1, {d}]")
    if m <= target_dim:
        raise PcaError(f"need more than {target_dim} samples, got {m}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (m - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order][:target_dim]
    components = eigvecs[:, order][:, :target_dim].T

    rank_floor = _RANK_TOL * max(eigvals[0], 1.0) if eigvals.size else 0.0
    degenerate = bool((eigvals <= rank_floor).any())
    explained = np.where(eigvals <= rank_floor, 0.0, eigvals)

    return PcaModel(
        mean=mean,
        components=_fix_signs(components),
        explained_variance=explained,
        degenerate=degenerate,
    )


def project(model: PcaModel, features) -> np.ndarray:
    """Project rows of `features` (T x D) onto the model's components."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise PcaError(
            f"expected T x {model.input_dim} features, got shape {x.shape}"
        )
    return (x - model.mean) @ model.components.T


def save_pca(model: PcaModel, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(model.mean, out_dir / "mean.mlfv")
    write_tensor(model.components, out_dir / "components.mlfv")
    write_tensor(model.explained_variance, out_dir / "explained_variance.mlfv")
    header = {
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "degenerate": model.degenerate,
    }
    with open(out_dir / "pca.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pca(in_dir) -> PcaModel:
    in_dir = Path(in_dir)
    with open(in_dir / "pca.json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    model = PcaModel(
        mean=read_tensor(in_dir / "mean.mlfv").astype(np.float64),
        components=read_tensor(in_dir / "components.mlfv").astype(np.float64),
        explained_variance=read_tensor(in_dir / "explained_variance.mlfv").astype(np.float64),
        degenerate=bool(header.get("degenerate", False)),
    )
    return model
