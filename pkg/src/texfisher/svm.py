"""One-vs-rest linear SVM trained by dual coordinate descent.

Inputs are expected to be prepared descriptors, so a plain linear machine
here is exactly the kernelized classifier under the signed-square-root
similarity.  The bias is a constant-1 augmented feature, which also keeps
every diagonal entry of the dual quadratic positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_store import read_tensor, write_tensor

_PG_EPS = 1e-12


class SvmError(ValueError):
    pass


@dataclass
class BinarySolveResult:
    w: np.ndarray
    alpha: np.ndarray
    objective: list[float]
    max_violation: float
    epochs: int
    converged: bool


def solve_binary_hinge(x_aug: np.ndarray, y: np.ndarray, cost: float,
                       rng: np.random.Generator, max_epochs: int = 1000,
                       tol: float = 1e-3) -> BinarySolveResult:
    """L1-hinge binary SVM on pre-augmented rows, labels in {-1, +1}.

    Coordinates are visited in a fresh seeded permutation each epoch;
    convergence is declared when the largest projected-gradient violation
    over an epoch drops below `tol`.
    """
    m = x_aug.shape[0]
    alpha = np.zeros(m)
    w = np.zeros(x_aug.shape[1])
    q_diag = (x_aug * x_aug).sum(axis=1)
    objective: list[float] = []
    max_pg = np.inf
    epochs = 0
    for epoch in range(max_epochs):
        max_pg = 0.0
        for i in rng.permutation(m):
            g = y[i] * (w @ x_aug[i]) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= cost:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > max_pg:
                max_pg = abs(pg)
            if abs(pg) > _PG_EPS:
                new_a = min(max(a - g / q_diag[i], 0.0), cost)
                if new_a != a:
                    w += (new_a - a) * y[i] * x_aug[i]
                    alpha[i] = new_a
        objective.append(0.5 * float(w @ w) - float(alpha.sum()))
        epochs = epoch + 1
        if max_pg < tol:
            break
    return BinarySolveResult(
        w=w, alpha=alpha, objective=objective,
        max_violation=float(max_pg), epochs=epochs,
        converged=bool(max_pg < tol),
    )


@dataclass
class SvmModel:
    """Per-class weight rows with the bias as the last coordinate."""

    class_names: list[str]
    weights: np.ndarray
    cost: float
    stats: list[dict] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - 1


@dataclass
class DecisionScores:
    per_class: np.ndarray
    class_names: list[str]


def _augment(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def train_ovr(features, labels, cost: float = 1.0, seed: int = 0,
              class_names: list[str] | None = None) -> SvmModel:
    """Train one binary hinge SVM per class against the rest.

    `class_names` fixes the class order; by default the sorted distinct
    labels are used.  Every label must appear in `class_names`.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise SvmError("need a 2D feature matrix with at least 2 rows")
    if not np.isfinite(x).all():
        raise SvmError("features contain non-finite values")
    labels = list(labels)
    if len(labels) != x.shape[0]:
        raise SvmError(f"{len(labels)} labels for {x.shape[0]} rows")
    if class_names is None:
        class_names = sorted(set(labels))
    if len(class_names) < 2:
        raise SvmError("need at least 2 classes")
    missing = set(labels) - set(class_names)
    if missing:
        raise SvmError(f"labels {sorted(missing)} not in class_names")

    x_aug = _augment(x)
    weights = np.zeros((len(class_names), x_aug.shape[1]))
    stats = []
    for c, name in enumerate(class_names):
        y = np.where(np.asarray(labels) == name, 1.0, -1.0)
        rng = np.random.default_rng([seed, c])
        result = solve_binary_hinge(x_aug, y, cost, rng)
        weights[c] = result.w
        stats.append({
            "class": name,
            "epochs": result.epochs,
            "max_violation": result.max_violation,
            "converged": result.converged,
        })
    return SvmModel(class_names=list(class_names), weights=weights,
                    cost=cost, stats=stats)


def decision_values(model: SvmModel, x) -> DecisionScores:
    """Per-class scores <w_c, [x; 1]> for one sample."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != model.n_features:
        raise SvmError(
            f"expected a vector of length {model.n_features}, got shape {vec.shape}"
        )
    scores = model.weights[:, :-1] @ vec + model.weights[:, -1]
    return DecisionScores(per_class=scores, class_names=model.class_names)


def decision_matrix(model: SvmModel, features) -> np.ndarray:
    """Scores for a batch of rows, one row of per-class values per sample."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise SvmError(
            f"expected T x {model.n_features} features, got shape {x.shape}"
        )
    return x @ model.weights[:, :-1].T + model.weights[:, -1]


def predict(model: SvmModel, x) -> str:
    """Class with the highest decision value; ties go to the lowest index."""
    scores = decision_values(model, x)
    return model.class_names[int(np.argmax(scores.per_class))]


def fuse_predict(fc_scores: DecisionScores, fv_scores: DecisionScores) -> str:
    """Classify by the argmax of summed per-class scores from two models."""
    if fc_scores.class_names != fv_scores.class_names:
        raise SvmError("fused score vectors must share the same class order")
    total = fc_scores.per_class + fv_scores.per_class
    return fc_scores.class_names[int(np.argmax(total))]


def save_svm(model: SvmModel, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(model.weights, out_dir / "weights.mlfv")
    header = {
        "class_names": model.class_names,
        "cost": model.cost,
        "stats": model.stats,
    }
    with open(out_dir / "svm.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_svm(in_dir) -> SvmModel:
    in_dir = Path(in_dir)
    with open(in_dir / "svm.json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    return SvmModel(
        class_names=list(header["class_names"]),
        weights=read_tensor(in_dir / "weights.mlfv").astype(np.float64),
        cost=float(header["cost"]),
        stats=list(header.get("stats", [])),
    )
