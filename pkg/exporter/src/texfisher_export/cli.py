"""CLI: export a directory of class-labeled images to feature bundles."""

from __future__ import annotations

import argparse
import logging
import sys

from .export import ExportSpec, ExportSpecError, export_dataset
from .networks import ARCHITECTURES, WeightLoadError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="texfisher-export",
        description="Run a pretrained network over images (one subdirectory "
                    "per class) and write feature bundles + manifest.json",
    )
    parser.add_argument("--arch", required=True, choices=sorted(ARCHITECTURES))
    parser.add_argument("--resolution", type=int, default=512,
                        help="square input size, >= 224 and divisible by 32")
    parser.add_argument("--images", required=True,
                        help="directory with one subdirectory per class")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--weights", choices=("pretrained", "none"),
                        default="pretrained",
                        help="'none' uses random initialization (offline "
                             "testing only; features are not meaningful)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    spec = ExportSpec(
        architecture=args.arch,
        image_dir=args.images,
        out_dir=args.out,
        resolution=args.resolution,
        pretrained=args.weights == "pretrained",
    )
    try:
        manifest = export_dataset(spec)
    except ExportSpecError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 1
    except WeightLoadError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
