"""Diagonal-covariance Gaussian mixture fitted by expectation-maximization.

All density work happens in log-space with per-row max subtraction, since
deep-feature activations produce densities across many orders of
magnitude.  Fitting is deterministic given (data, K, seed): one RNG
drives k-means++ seeding and every later step has a fixed order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_store import read_tensor, write_tensor

_LOG_2PI = np.log(2.0 * np.pi)
_WEIGHT_COLLAPSE = 1e-8
_KMEANS_MAX_ITERS = 25


class GmmError(ValueError):
    pass


@dataclass
class GmmModel:
    """Mixture weights, K x D means and K x D diagonal variances."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    var_floor: float = 0.0

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def validate(self) -> None:
        k, d = self.means.shape
        if k < 1 or d < 1:
            raise GmmError("model needs K >= 1 and D >= 1")
        if self.weights.shape != (k,) or self.variances.shape != (k, d):
            raise GmmError("inconsistent weight/mean/variance shapes")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise GmmError(f"weights sum to {self.weights.sum()!r}, expected 1")
        if (self.weights <= 0).any():
            raise GmmError("all weights must be positive")
        if (self.variances < self.var_floor).any() or (self.variances <= 0).any():
            raise GmmError("variances below floor")


@dataclass
class EmTrace:
    """Per-iteration average log-likelihood plus degeneracy events."""

    loglik: list[float] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0


def variance_floor(data: np.ndarray) -> float:
    """Relative variance floor: 1e-4 of the mean per-dimension data variance."""
    rel = 1e-4 * float(np.var(data, axis=0).mean())
    # Tiny absolute guard keeps densities defined on degenerate data.
    return max(rel, 1e-12)


def _check_data(data, dim: int | None = None) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise GmmError(f"data must be 2D, got {x.ndim}D")
    if not np.isfinite(x).all():
        raise GmmError("data contains non-finite values")
    if dim is not None and x.shape[1] != dim:
        raise GmmError(f"data dim {x.shape[1]} does not match model dim {dim}")
    return x


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (x * x).sum(axis=1)[:, None]
        - 2.0 * x @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def init_kmeans(data, k: int, seed: int) -> GmmModel:
    """Initial mixture from k-means++ seeding and at most 25 Lloyd rounds.

    Weights are cluster-size proportions floored at 1/(10K) and
    renormalized; variances are per-cluster per-dimension scatter,
    floored.  An empty cluster is refilled with the farthest point of the
    largest cluster.
    """
    x = _check_data(data)
    m, d = x.shape
    if k < 1:
        raise GmmError("k must be >= 1")
    if m < k:
        raise GmmError(f"need at least {k} points, got {m}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, d))
    centers[0] = x[rng.integers(m)]
    best_d2 = _sq_dists(x, centers[:1]).ravel()
    for i in range(1, k):
        total = best_d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(m))
        else:
            idx = int(rng.choice(m, p=best_d2 / total))
        centers[i] = x[idx]
        best_d2 = np.minimum(best_d2, _sq_dists(x, centers[i : i + 1]).ravel())

    assign = np.full(m, -1, dtype=np.intp)
    for _ in range(_KMEANS_MAX_ITERS):
        new_assign = np.argmin(_sq_dists(x, centers), axis=1)
        counts = np.bincount(new_assign, minlength=k)
        for empty in np.nonzero(counts == 0)[0]:
            largest = int(np.argmax(counts))
            members = np.nonzero(new_assign == largest)[0]
            dists = ((x[members] - centers[largest]) ** 2).sum(axis=1)
            farthest = members[int(np.argmax(dists))]
            new_assign[farthest] = empty
            counts = np.bincount(new_assign, minlength=k)
        if (new_assign == assign).all():
            break
        assign = new_assign
        for i in range(k):
            centers[i] = x[assign == i].mean(axis=0)

    counts = np.bincount(assign, minlength=k).astype(np.float64)
    weights = np.maximum(counts / m, 1.0 / (10.0 * k))
    weights /= weights.sum()

    floor = variance_floor(x)
    variances = np.empty((k, d))
    for i in range(k):
        members = x[assign == i]
        variances[i] = ((members - centers[i]) ** 2).mean(axis=0)
    variances = np.maximum(variances, floor)

    model = GmmModel(weights=weights, means=centers.copy(),
                     variances=variances, var_floor=floor)
    model.validate()
    return model


def _log_densities(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """M x K matrix of log(w_i) + log-density of row t under component i."""
    inv_var = 1.0 / model.variances
    # sum_d (x - mu)^2 / var expanded to three matmul-friendly terms
    quad = (
        (x * x) @ inv_var.T
        - 2.0 * x @ (model.means * inv_var).T
        + ((model.means**2) * inv_var).sum(axis=1)[None, :]
    )
    log_det = np.log(model.variances).sum(axis=1)
    log_pdf = -0.5 * (model.dim * _LOG_2PI + log_det[None, :] + quad)
    return log_pdf + np.log(model.weights)[None, :]


def _log_normalize(weighted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize in log-space; returns (responsibilities, row log-sums)."""
    row_max = weighted.max(axis=1, keepdims=True)
    shifted = np.exp(weighted - row_max)
    norm = shifted.sum(axis=1, keepdims=True)
    log_norm = row_max.ravel() + np.log(norm.ravel())
    return shifted / norm, log_norm


def responsibilities(model: GmmModel, data) -> np.ndarray:
    """M x K posterior responsibilities, each row summing to 1."""
    x = _check_data(data, model.dim)
    resp, _ = _log_normalize(_log_densities(model, x))
    return resp


def posteriors(model: GmmModel, x) -> np.ndarray:
    """Posterior component probabilities for a single observation."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1:
        raise GmmError(f"expected a vector, got {vec.ndim}D input")
    return responsibilities(model, vec[None, :])[0]


def log_likelihood(model: GmmModel, data) -> float:
    """Total log-likelihood of `data` rows under the mixture.

    The final reduction is correctly rounded (math.fsum), so stacking a
    dataset twice yields exactly twice the value.
    """
    x = _check_data(data, model.dim)
    _, log_norm = _log_normalize(_log_densities(model, x))
    return math.fsum(log_norm)


def em_fit(data, init: GmmModel, max_iters: int = 200,
           tol: float = 1e-5) -> tuple[GmmModel, EmTrace]:
    """Fit the mixture by EM starting from `init`.

    Stops when the average log-likelihood improves by less than `tol`
    or after `max_iters` iterations.  A collapsing component (weight
    below 1e-8 or zero responsibility mass) is reset to a perturbed copy
    of the heaviest component; the event lands in the trace.
    """
    if max_iters < 1:
        raise GmmError("max_iters must be >= 1")
    if tol <= 0:
        raise GmmError("tol must be positive")
    init.validate()
    x = _check_data(data, init.dim)
    m, d = x.shape
    k = init.n_components
    floor = max(variance_floor(x), init.var_floor)

    weights = init.weights.copy()
    means = init.means.copy()
    variances = np.maximum(init.variances, floor)
    trace = EmTrace()
    prev_avg = -np.inf

    for iteration in range(max_iters):
        model = GmmModel(weights, means, variances, var_floor=floor)
        resp, log_norm = _log_normalize(_log_densities(model, x))
        avg_ll = float(log_norm.mean())
        trace.loglik.append(avg_ll)
        trace.n_iter = iteration + 1
        if avg_ll - prev_avg < tol and iteration > 0:
            trace.converged = True
            break
        prev_avg = avg_ll

        mass = resp.sum(axis=0)
        new_weights = mass / m
        collapsed = np.nonzero((mass <= 0.0) | (new_weights < _WEIGHT_COLLAPSE))[0]
        safe_mass = np.maximum(mass, np.finfo(np.float64).tiny)
        new_means = resp.T @ x / safe_mass[:, None]
        sq_moment = resp.T @ (x * x) / safe_mass[:, None]
        new_vars = np.maximum(sq_moment - new_means**2, floor)

        for i in collapsed:
            heaviest = int(np.argmax(new_weights))
            trace.events.append(
                f"iter {iteration}: component {i} collapsed, "
                f"reset from component {heaviest}"
            )
            new_means[i] = new_means[heaviest] + 1e-3 * np.sqrt(new_vars[heaviest])
            new_vars[i] = new_vars[heaviest]
            half = new_weights[heaviest] / 2.0
            new_weights[heaviest] = half
            new_weights[i] = half

        new_weights = np.maximum(new_weights, np.finfo(np.float64).tiny)
        weights = new_weights / new_weights.sum()
        means = new_means
        variances = new_vars

    model = GmmModel(weights, means, variances, var_floor=floor)
    model.validate()
    return model, trace


def save_gmm(model: GmmModel, out_dir, seed: int | None = None,
             n_iter: int | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(model.weights, out_dir / "weights.mlfv")
    write_tensor(model.means, out_dir / "means.mlfv")
    write_tensor(model.variances, out_dir / "variances.mlfv")
    header = {
        "k": model.n_components,
        "d": model.dim,
        "seed": seed,
        "iterations": n_iter,
        "var_floor": model.var_floor,
    }
    with open(out_dir / "gmm.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_gmm(in_dir) -> GmmModel:
    in_dir = Path(in_dir)
    with open(in_dir / "gmm.json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    weights = read_tensor(in_dir / "weights.mlfv").astype(np.float64)
    # float32 storage perturbs the unit sum; renormalize on load
    weights /= weights.sum()
    return GmmModel(
        weights=weights,
        means=read_tensor(in_dir / "means.mlfv").astype(np.float64),
        variances=read_tensor(in_dir / "variances.mlfv").astype(np.float64),
        var_floor=float(header.get("var_floor", 0.0)),
    )


def subsample_rows(data, max_rows: int, seed: int) -> np.ndarray:
    """Uniform random row subsample (without replacement), order-preserving."""
    x = np.asarray(data)
    if x.shape[0] <= max_rows:
        return x
    rng = np.random.default_rng(seed)
    idx = rng.choice(x.shape[0], size=max_rows, replace=False)
    idx.sort()
    return x[idx]
