"""Dataset export: images in class subdirectories to feature bundles."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image
from torchvision import transforms

from .format import write_manifest, write_tensor_file
from .networks import ActivationExtractor

log = logging.getLogger("texfisher_export")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ExportSpecError(ValueError):
    pass


@dataclass
class ExportSpec:
    architecture: str
    image_dir: str
    out_dir: str
    resolution: int = 512
    pretrained: bool = True

    def validate(self) -> None:
        if self.resolution < 224 or self.resolution % 32 != 0:
            raise ExportSpecError(
                f"resolution must be >= 224 and divisible by 32, got "
                f"{self.resolution}"
            )
        if not Path(self.image_dir).is_dir():
            raise ExportSpecError(f"image_dir {self.image_dir!r} is not a directory")


def _preprocess(resolution: int):
    return transforms.Compose([
        transforms.Resize((resolution, resolution)),
        transforms.ToTensor(),
        transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
    ])


def _iter_images(image_dir: Path):
    """Yields (class_name, image_path) in sorted order; one dir per class."""
    class_dirs = sorted(p for p in image_dir.iterdir() if p.is_dir())
    if not class_dirs:
        raise ExportSpecError(f"no class subdirectories under {image_dir}")
    for class_dir in class_dirs:
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() in IMAGE_SUFFIXES:
                yield class_dir.name, path


def export_dataset(spec: ExportSpec) -> Path:
    """Run the network over every image and write bundles plus the manifest.

    Unreadable images are skipped with a log line; the manifest lists only
    successfully exported bundles.  Returns the manifest path.
    """
    spec.validate()
    extractor = ActivationExtractor(spec.architecture, pretrained=spec.pretrained)
    preprocess = _preprocess(spec.resolution)
    image_dir = Path(spec.image_dir)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    class_names: list[str] = []
    entries: list[dict] = []
    for class_name, path in _iter_images(image_dir):
        if class_name not in class_names:
            class_names.append(class_name)
        try:
            with Image.open(path) as img:
                tensor = preprocess(img.convert("RGB"))
        except Exception as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            continue
        penult, last, descriptor = extractor.extract(tensor)
        if penult.shape[0] < last.shape[0] or penult.shape[1] > last.shape[1]:
            raise RuntimeError(
                f"{path}: tapped shapes {penult.shape} / {last.shape} violate "
                f"the bundle contract"
            )

        image_id = f"{class_name}/{path.stem}"
        rel_dir = Path(class_name)
        (out_dir / rel_dir).mkdir(parents=True, exist_ok=True)
        paths = {
            "penultimate_path": str(rel_dir / f"{path.stem}.penultimate.mlfv"),
            "last_path": str(rel_dir / f"{path.stem}.last.mlfv"),
            "fc_path": str(rel_dir / f"{path.stem}.fc.mlfv"),
        }
        write_tensor_file(out_dir / paths["penultimate_path"], penult)
        write_tensor_file(out_dir / paths["last_path"], last)
        write_tensor_file(out_dir / paths["fc_path"], descriptor)
        entries.append({
            "image_id": image_id,
            "class_label": class_name,
            **paths,
        })
        log.info("exported %s (%d + %d local features)", image_id,
                 penult.shape[0], last.shape[0])

    if not entries:
        raise ExportSpecError(f"no exportable images under {image_dir}")
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest_path, class_names, entries)
    return manifest_path


def extract_single(spec: ExportSpec, image_path) -> tuple:
    """Feature triple for one image; used for shape checks and debugging."""
    spec.validate()
    extractor = ActivationExtractor(spec.architecture, pretrained=spec.pretrained)
    with Image.open(image_path) as img:
        tensor = _preprocess(spec.resolution)(img.convert("RGB"))
    return extractor.extract(tensor)
