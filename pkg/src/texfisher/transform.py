"""Descriptor normalization and the signed-square-root similarity.

Every descriptor (Fisher encoding or pooled network output) goes through
the same chain before classification: signed square root, unit L2 scaling,
then the signed square root again as an explicit feature map.  The last
step makes the signed-square-root similarity an ordinary inner product,
so a linear classifier on mapped vectors is the kernelized machine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

DESCRIPTOR_KINDS = ("FV", "FC")


class DegenerateVectorWarning(UserWarning):
    """Raised once when a zero vector hits L2 normalization."""


def _signed_sqrt(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.sqrt(np.abs(v))


def power_normalize(v) -> np.ndarray:
    """Elementwise sign(x) * sqrt(|x|); dampens peaky descriptor entries."""
    return _signed_sqrt(np.asarray(v, dtype=np.float64))


def l2_normalize(v) -> np.ndarray:
    """Scale to unit L2 norm; a zero vector passes through with a warning."""
    x = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        warnings.warn("zero vector left unnormalized", DegenerateVectorWarning,
                      stacklevel=2)
        return x.copy()
    return x / norm


def phi_map(v) -> np.ndarray:
    """Explicit feature map of the signed-square-root similarity.

    Numerically the same map as :func:`power_normalize`; it gets its own
    name because it plays a different role (applied after normalization,
    turning the kernel machine into a linear one).
    """
    return _signed_sqrt(np.asarray(v, dtype=np.float64))


def bhattacharyya_kernel(x, y) -> float:
    """Signed-square-root similarity: sum_i sign(x_i y_i) sqrt(|x_i y_i|)."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    prod = a * b
    return float((np.sign(prod) * np.sqrt(np.abs(prod))).sum())


@dataclass
class Descriptor:
    """A classification-ready vector with its origin tag."""

    values: np.ndarray
    kind: str
    normalized: bool

    def __post_init__(self):
        if self.kind not in DESCRIPTOR_KINDS:
            raise ValueError(f"kind must be one of {DESCRIPTOR_KINDS}, got {self.kind!r}")


def prepare_descriptor(raw, kind: str) -> Descriptor:
    """Full chain: signed sqrt, unit L2 scaling, then the feature map.

    Applied identically to both descriptor kinds.  The `normalized` flag
    describes the vector state before the final feature map.
    """
    x = np.asarray(raw, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("descriptor contains non-finite values")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateVectorWarning)
        normalized = l2_normalize(power_normalize(x))
    return Descriptor(values=phi_map(normalized), kind=kind, normalized=True)
