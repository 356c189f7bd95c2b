"""Pretrained-CNN activation exporter producing texfisher feature bundles."""

from .export import ExportSpec, ExportSpecError, export_dataset, extract_single
from .networks import ARCHITECTURES, ActivationExtractor, WeightLoadError

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "ActivationExtractor",
    "ExportSpec",
    "ExportSpecError",
    "WeightLoadError",
    "export_dataset",
    "extract_single",
]
