"""Writers for the bundle wire format consumed by the core pipeline.

This module deliberately re-implements the byte layout instead of
importing the core package: the file format is the interface between the
two tools, and keeping an independent writer means the reader round-trip
actually exercises cross-implementation compatibility.

    magic "MLFV" | version u16 = 1 | dtype u8 = 1 (f32) | ndim u8 |
    ndim x u64 dims | row-major float32 payload     (all little-endian)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MLFV"
VERSION = 1
DTYPE_F32 = 1


class ExportFormatError(ValueError):
    pass


def write_tensor_file(path, array) -> None:
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim < 1 or any(d < 1 for d in arr.shape):
        raise ExportFormatError(f"invalid tensor shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ExportFormatError("refusing to write non-finite activations")
    arr = np.ascontiguousarray(arr)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHBB", MAGIC, VERSION, DTYPE_F32, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def write_manifest(path, class_names, entries) -> None:
    """Manifest JSON: ordered class names plus per-image bundle entries."""
    doc = {
        "class_names": list(class_names),
        "entries": [
            {
                "image_id": e["image_id"],
                "penultimate_path": e["penultimate_path"],
                "last_path": e["last_path"],
                "fc_path": e["fc_path"],
                "class_label": e["class_label"],
            }
            for e in entries
        ],
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
