"""Command-line entry points: run an experiment, inspect splits, encode.

Exit codes: 0 success, 1 configuration error, 2 data error (manifest or
tensor files), 3 numeric failure inside a pipeline stage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from pathlib import Path

from .fisher import EncodingError, encode_dataset, save_fv
from .gmm import GmmError, load_gmm
from .pca import PcaError, load_pca
from .runner import (
    ConfigError,
    RunError,
    emit_report,
    load_config,
    make_splits,
    run_experiment,
)
from .svm import SvmError
from .tensor_store import TensorStoreError, load_manifest

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="texfisher",
                     description="Multilayer Fisher-vector texture classification")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a full experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--out", default=".", help="directory for report.json / confusion.csv")

    split_p = sub.add_parser("split", help="print the train/test splits a protocol produces")
    split_p.add_argument("--manifest", required=True)
    split_p.add_argument("--protocol", required=True)
    split_p.add_argument("--seed", type=int, default=0)
    split_p.add_argument("--rounds", type=int, default=1)

    enc_p = sub.add_parser("encode", help="encode every manifest image with saved models")
    enc_p.add_argument("--manifest", required=True)
    enc_p.add_argument("--gmm", required=True, help="directory of a saved mixture model")
    enc_p.add_argument("--pca", required=True, help="directory of a saved projection model")
    enc_p.add_argument("--out", required=True, help="output directory for encodings")
    return parser


def _slug(image_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", image_id)
    tag = hashlib.sha256(image_id.encode()).hexdigest()[:8]
    return f"{safe}__{tag}"


def _cmd_run(args) -> int:
    config = load_config(args.config)
    report = run_experiment(config)
    paths = emit_report(report, args.out)
    print(f"rounds: {len(report.per_round_accuracy)}  "
          f"mean accuracy: {report.mean_accuracy:.4f} "
          f"+/- {report.std_accuracy:.4f}")
    for stage, seconds in report.timing.items():
        print(f"  {stage}: {seconds:.2f}s", file=sys.stderr)
    print(f"wrote {paths['report']} and {paths['confusion']}")
    return EXIT_OK


def _cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    splits = make_splits(manifest, args.protocol, args.rounds, args.seed)
    doc = [
        {"round": idx, "train": train, "test": test}
        for idx, (train, test) in enumerate(splits)
    ]
    json.dump(doc, sys.stdout, indent=2)
    print()
    return EXIT_OK


def _cmd_encode(args) -> int:
    manifest = load_manifest(args.manifest)
    gmm_model = load_gmm(args.gmm)
    pca_model = load_pca(args.pca)
    encodings = encode_dataset(manifest, pca_model, gmm_model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for image_id, fv in encodings.items():
        save_fv(fv, out / _slug(image_id))
    print(f"encoded {len(encodings)} images into {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "split":
            return _cmd_split(args)
        return _cmd_encode(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TensorStoreError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EncodingError, GmmError, PcaError, SvmError, RunError,
            FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
