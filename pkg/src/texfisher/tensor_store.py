"""Binary tensor files, per-image feature bundles and dataset manifests.

The on-disk tensor format is fixed and little-endian:

    magic "MLFV" (4 bytes) | version u16 = 1 | dtype u8 = 1 (float32) |
    ndim u8 | ndim x u64 dims | row-major float32 payload

Only 32-bit floats are supported.  Non-finite payloads are rejected on
both write and read: a file that cannot be read back is useless, and
every downstream statistic silently corrupts on NaN.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MLFV"
VERSION = 1
DTYPE_F32 = 1

_HEADER = struct.Struct("<4sHBB")


class TensorStoreError(Exception):
    """Base class for tensor store failures."""


class TensorFormatError(TensorStoreError):
    """Structural problem: bad magic, version, dtype, shape or truncation."""


class TensorDataError(TensorStoreError):
    """Payload contains NaN or infinite values."""


class ManifestError(TensorStoreError):
    """Dataset manifest violates its invariants."""


def _as_f32(array) -> np.ndarray:
    out = np.asarray(array, dtype=np.float32)
    # check ndim before ascontiguousarray, which silently promotes 0-d to 1-d
    if out.ndim < 1:
        raise TensorFormatError("tensor must have ndim >= 1")
    if any(dim < 1 for dim in out.shape):
        raise TensorFormatError(f"all dimensions must be >= 1, got shape {out.shape}")
    return np.ascontiguousarray(out)


def write_tensor(array, sink) -> None:
    """Write a float32 tensor to `sink` (path or binary file object)."""
    out = _as_f32(array)
    if not np.isfinite(out).all():
        raise TensorDataError("tensor payload contains non-finite values")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, out.ndim)
    dims = struct.pack(f"<{out.ndim}Q", *out.shape)
    payload = out.tobytes(order="C")
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            fh.write(header)
            fh.write(dims)
            fh.write(payload)
    else:
        sink.write(header)
        sink.write(dims)
        sink.write(payload)


def read_tensor(source) -> np.ndarray:
    """Read a tensor written by :func:`write_tensor`; returns float32 ndarray."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return _read_stream(fh)
    return _read_stream(source)


def _read_stream(fh) -> np.ndarray:
    head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise TensorFormatError("truncated header")
    magic, version, dtype, ndim = _HEADER.unpack(head)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype tag {dtype}")
    if ndim < 1:
        raise TensorFormatError("tensor must have ndim >= 1")
    raw_dims = fh.read(8 * ndim)
    if len(raw_dims) < 8 * ndim:
        raise TensorFormatError("truncated dimension list")
    shape = struct.unpack(f"<{ndim}Q", raw_dims)
    if any(dim < 1 for dim in shape):
        raise TensorFormatError(f"all dimensions must be >= 1, got shape {shape}")
    # math.prod stays exact for adversarial u64 dims where int64 would wrap
    count = math.prod(shape)
    if count > (2**63 - 1) // 4:
        raise TensorFormatError(f"implausible element count {count}")
    payload = fh.read(4 * count)
    if len(payload) < 4 * count:
        raise TensorFormatError(
            f"truncated payload: expected {4 * count} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4", count=count).reshape(shape)
    if not np.isfinite(data).all():
        raise TensorDataError("tensor payload contains non-finite values")
    # frombuffer yields a read-only view; downstream code mutates freely.
    return np.array(data, dtype=np.float32)


@dataclass
class FeatureBundle:
    """Per-image features: two convolutional layers plus the pooled descriptor.

    `penultimate` is T1 x D1 (earlier layer, finer resolution), `last` is
    T2 x D2 (deeper layer), `fc` is the global descriptor vector.
    """

    penultimate: np.ndarray
    last: np.ndarray
    fc: np.ndarray
    image_id: str

    def validate(self) -> None:
        if self.penultimate.ndim != 2 or self.last.ndim != 2 or self.fc.ndim != 1:
            raise TensorFormatError(
                f"bundle {self.image_id}: expected 2D/2D/1D tensors, got "
                f"{self.penultimate.ndim}D/{self.last.ndim}D/{self.fc.ndim}D"
            )
        t1, d1 = self.penultimate.shape
        t2, d2 = self.last.shape
        if t1 < t2:
            raise TensorFormatError(
                f"bundle {self.image_id}: penultimate rows {t1} < last rows {t2}"
            )
        if d1 > d2:
            raise TensorFormatError(
                f"bundle {self.image_id}: penultimate dim {d1} > last dim {d2}"
            )
        for name, arr in (("penultimate", self.penultimate),
                          ("last", self.last), ("fc", self.fc)):
            if not np.isfinite(arr).all():
                raise TensorDataError(
                    f"bundle {self.image_id}: non-finite values in {name}"
                )


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    penultimate_path: str
    last_path: str
    fc_path: str
    class_label: str
    sample_tag: str | None = None
    split_tag: str | None = None


@dataclass
class DatasetManifest:
    """Ordered list of image entries plus the ordered class vocabulary."""

    entries: list[ManifestEntry]
    class_names: list[str]
    base_dir: Path = field(default_factory=Path)

    def resolve(self, relpath: str) -> Path:
        return self.base_dir / relpath

    def load_bundle(self, entry: ManifestEntry) -> FeatureBundle:
        bundle = FeatureBundle(
            penultimate=read_tensor(self.resolve(entry.penultimate_path)),
            last=read_tensor(self.resolve(entry.last_path)),
            fc=read_tensor(self.resolve(entry.fc_path)),
            image_id=entry.image_id,
        )
        bundle.validate()
        return bundle


def load_manifest(path) -> DatasetManifest:
    """Load and validate a JSON dataset manifest.

    Bundle paths are resolved relative to the manifest's directory and must
    exist.  Entry order is the file order.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "class_names" not in doc or "entries" not in doc:
        raise ManifestError("manifest must contain 'class_names' and 'entries'")
    class_names = list(doc["class_names"])
    if len(set(class_names)) != len(class_names):
        raise ManifestError("class_names contains duplicates")
    known = set(class_names)
    base_dir = path.parent
    entries: list[ManifestEntry] = []
    seen_ids: set[str] = set()
    for raw in doc["entries"]:
        entry = ManifestEntry(
            image_id=raw["image_id"],
            penultimate_path=raw["penultimate_path"],
            last_path=raw["last_path"],
            fc_path=raw["fc_path"],
            class_label=raw["class_label"],
            sample_tag=raw.get("sample_tag"),
            split_tag=raw.get("split_tag"),
        )
        if entry.image_id in seen_ids:
            raise ManifestError(f"duplicate image_id {entry.image_id!r}")
        seen_ids.add(entry.image_id)
        if entry.class_label not in known:
            raise ManifestError(
                f"entry {entry.image_id!r} has unknown class_label "
                f"{entry.class_label!r}"
            )
        for rel in (entry.penultimate_path, entry.last_path, entry.fc_path):
            if not (base_dir / rel).is_file():
                raise ManifestError(
                    f"entry {entry.image_id!r} references missing file {rel!r}"
                )
        entries.append(entry)
    return DatasetManifest(entries=entries, class_names=class_names, base_dir=base_dir)


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest as JSON (paths stored as given, entry order kept)."""
    doc = {
        "class_names": list(manifest.class_names),
        "entries": [
            {
                "image_id": e.image_id,
                "penultimate_path": e.penultimate_path,
                "last_path": e.last_path,
                "fc_path": e.fc_path,
                "class_label": e.class_label,
                **({"sample_tag": e.sample_tag} if e.sample_tag is not None else {}),
                **({"split_tag": e.split_tag} if e.split_tag is not None else {}),
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_bundle(bundle: FeatureBundle, out_dir, prefix: str | None = None) -> ManifestEntry:
    """Write the three tensors of a bundle under `out_dir`.

    Returns a manifest entry with paths relative to `out_dir` and an empty
    class label (the caller owns labeling).
    """
    bundle.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = prefix if prefix is not None else bundle.image_id
    # image ids may contain path separators; file stems must not
    stem = stem.replace("/", "_").replace("\\", "_")
    names = {
        "penultimate": f"{stem}.penultimate.mlfv",
        "last": f"{stem}.last.mlfv",
        "fc": f"{stem}.fc.mlfv",
    }
    write_tensor(bundle.penultimate, out_dir / names["penultimate"])
    write_tensor(bundle.last, out_dir / names["last"])
    write_tensor(bundle.fc, out_dir / names["fc"])
    return ManifestEntry(
        image_id=bundle.image_id,
        penultimate_path=names["penultimate"],
        last_path=names["last"],
        fc_path=names["fc"],
        class_label="",
    )
