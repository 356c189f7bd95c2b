"""End-to-end experiment orchestration over a dataset manifest.

A run follows a fixed per-round recipe: split the dataset by protocol,
fit the projection and the mixture on training images only, encode every
image, prepare descriptors, train the classifier(s) for the requested
mode and score the held-out images.  Everything is deterministic given
the config, including the emitted report bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fisher, gmm, pca, svm, transform
from .tensor_store import DatasetManifest, load_manifest, read_tensor, write_tensor

PROTOCOLS = ("kth_sample", "half_split", "predefined_split")
MODES = ("FV", "FC", "FV+FC")

GMM_SUBSAMPLE_LIMIT = 500_000
COST_GRID = (0.1, 1.0, 10.0)
CACHE_ENV_VAR = "TEXFISHER_CACHE"


class ConfigError(ValueError):
    pass


class RunError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    manifest_path: str
    protocol: str
    rounds: int = 1
    k_gaussians: int = 64
    cost: float = 1.0
    seed: int = 0
    mode: str = "FV"
    cache_dir: str | None = None

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.k_gaussians < 1:
            raise ConfigError("k_gaussians must be >= 1")
        if self.cost <= 0:
            raise ConfigError("cost must be positive")

    def effective_cache_dir(self) -> str | None:
        return os.environ.get(CACHE_ENV_VAR) or self.cache_dir


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "manifest_path" not in doc or "protocol" not in doc:
        raise ConfigError("config requires 'manifest_path' and 'protocol'")
    config = ExperimentConfig(**doc)
    config.validate()
    return config


def make_splits(manifest: DatasetManifest, protocol: str, rounds: int,
                seed: int) -> list[tuple[list[str], list[str]]]:
    """Train/test image-id partitions for each evaluation round.

    kth_sample: one round per sample tag, that tag's images train and the
    rest test (the `rounds` argument is ignored).  half_split: `rounds`
    seeded per-class 50/50 partitions, the odd image going to training.
    predefined_split: one round per split tag with the remaining groups
    (any validation group included) merged into training.
    """
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}")
    entries = manifest.entries
    if not entries:
        raise ConfigError("manifest has no entries")

    if protocol == "kth_sample":
        missing = [e.image_id for e in entries if e.sample_tag is None]
        if missing:
            raise ConfigError(
                f"kth_sample requires sample_tag on every entry; missing for "
                f"{missing[0]!r}"
            )
        tags = sorted({e.sample_tag for e in entries})
        splits = []
        for tag in tags:
            train = [e.image_id for e in entries if e.sample_tag == tag]
            test = [e.image_id for e in entries if e.sample_tag != tag]
            splits.append((train, test))
    elif protocol == "half_split":
        if rounds < 1:
            raise ConfigError("half_split needs rounds >= 1")
        rng = np.random.default_rng(seed)
        by_class = {name: [e.image_id for e in entries if e.class_label == name]
                    for name in manifest.class_names}
        splits = []
        for _ in range(rounds):
            train: list[str] = []
            test: list[str] = []
            for name in manifest.class_names:
                ids = by_class[name]
                perm = rng.permutation(len(ids))
                cut = math.ceil(len(ids) / 2)
                train.extend(ids[i] for i in perm[:cut])
                test.extend(ids[i] for i in perm[cut:])
            splits.append((train, test))
    else:  # predefined_split
        missing = [e.image_id for e in entries if e.split_tag is None]
        if missing:
            raise ConfigError(
                f"predefined_split requires split_tag on every entry; missing "
                f"for {missing[0]!r}"
            )
        tags = sorted({e.split_tag for e in entries})
        test_tags = [t for t in tags if t.lower() != "val"]
        if not test_tags:
            raise ConfigError("predefined_split needs at least one non-val split_tag")
        splits = []
        for tag in test_tags:
            train = [e.image_id for e in entries if e.split_tag != tag]
            test = [e.image_id for e in entries if e.split_tag == tag]
            splits.append((train, test))

    label_of = {e.image_id: e.class_label for e in entries}
    for idx, (train, test) in enumerate(splits):
        if not test:
            raise ConfigError(f"round {idx}: empty test set")
        covered = {label_of[i] for i in train}
        absent = [c for c in manifest.class_names if c not in covered]
        if absent:
            raise ConfigError(
                f"round {idx}: class {absent[0]!r} absent from the training split"
            )
    return splits


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    class_names: list[str]
    per_round_accuracy: list[float]
    mean_accuracy: float
    std_accuracy: float
    overall_accuracy: float
    confusion: np.ndarray
    total_test: int
    aborted_rounds: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)


def _round_seed(seed: int, round_idx: int, stage: str) -> int:
    material = np.random.SeedSequence(
        [seed, round_idx, int.from_bytes(stage.encode(), "little")]
    )
    return int(material.generate_state(1)[0])


class _DescriptorCache:
    """Optional on-disk cache of prepared encodings, keyed by run context."""

    def __init__(self, cache_dir: str, context: dict):
        self.root = Path(cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        blob = json.dumps(context, sort_keys=True).encode()
        self.prefix = hashlib.sha256(blob).hexdigest()[:16]

    def _path(self, image_id: str) -> Path:
        tag = hashlib.sha256(image_id.encode()).hexdigest()[:16]
        return self.root / f"{self.prefix}_{tag}.mlfv"

    def get(self, image_id: str):
        path = self._path(image_id)
        if path.is_file():
            return read_tensor(path)
        return None

    def put(self, image_id: str, values: np.ndarray) -> None:
        path = self._path(image_id)
        tmp = path.with_suffix(".tmp")
        write_tensor(values, tmp)
        os.replace(tmp, path)


def _fit_round_models(bundles, train_ids, k_gaussians, seed, round_idx, fit_hook):
    """PCA then GMM, both on training images only."""
    if fit_hook is not None:
        fit_hook("pca", list(train_ids))
    last_pool = np.vstack([bundles[i].last for i in train_ids])
    target_dim = bundles[train_ids[0]].penultimate.shape[1]
    pca_model = pca.fit_pca(last_pool, target_dim)

    if fit_hook is not None:
        fit_hook("gmm", list(train_ids))
    merged_pool = np.vstack([
        fisher.merge_layers(bundles[i], pca_model).features for i in train_ids
    ])
    merged_pool = gmm.subsample_rows(
        merged_pool, GMM_SUBSAMPLE_LIMIT, _round_seed(seed, round_idx, "subsample")
    )
    init = gmm.init_kmeans(merged_pool, k_gaussians,
                           _round_seed(seed, round_idx, "kmeans"))
    gmm_model, _ = gmm.em_fit(merged_pool, init)
    return pca_model, gmm_model


def _prepare_fv(bundles, ids, pca_model, gmm_model, cache) -> dict[str, np.ndarray]:
    out = {}
    for image_id in ids:
        cached = cache.get(image_id) if cache is not None else None
        if cached is not None:
            out[image_id] = cached.astype(np.float32)
            continue
        merged = fisher.merge_layers(bundles[image_id], pca_model)
        fv = fisher.encode_fv(gmm_model, merged)
        prepared = transform.prepare_descriptor(fv.values, "FV").values.astype(np.float32)
        if cache is not None:
            cache.put(image_id, prepared)
        out[image_id] = prepared
    return out


def _prepare_fc(bundles, ids) -> dict[str, np.ndarray]:
    return {
        i: transform.prepare_descriptor(bundles[i].fc, "FC").values.astype(np.float32)
        for i in ids
    }


def _train_mode(descriptors, labels_of, class_names, train_ids, cost, seed):
    features = np.stack([descriptors[i] for i in train_ids])
    labels = [labels_of[i] for i in train_ids]
    return svm.train_ovr(features, labels, cost=cost, seed=seed,
                         class_names=class_names)


def _select_cost(config, manifest, descriptor_sets, labels_of, class_names,
                 train_ids, round_idx):
    """Grid-search the regularization cost on a validation group, if any."""
    if config.protocol != "predefined_split":
        return config.cost
    val_ids = [e.image_id for e in manifest.entries
               if e.split_tag is not None and e.split_tag.lower() == "val"
               and e.image_id in set(train_ids)]
    if not val_ids:
        return config.cost
    val_set = set(val_ids)
    core_ids = [i for i in train_ids if i not in val_set]
    if not core_ids:
        return config.cost
    best_cost, best_acc = config.cost, -1.0
    for cost in COST_GRID:
        correct = 0
        models = {
            kind: _train_mode(desc, labels_of, class_names, core_ids, cost,
                              _round_seed(config.seed, round_idx, f"val-{kind}"))
            for kind, desc in descriptor_sets.items()
        }
        for image_id in val_ids:
            label = _predict_modes(models, descriptor_sets, image_id)
            if label == labels_of[image_id]:
                correct += 1
        acc = correct / len(val_ids)
        if acc > best_acc:
            best_acc, best_cost = acc, cost
    return best_cost


def _predict_modes(models, descriptor_sets, image_id) -> str:
    if set(models) == {"FV", "FC"}:
        fv_scores = svm.decision_values(models["FV"], descriptor_sets["FV"][image_id])
        fc_scores = svm.decision_values(models["FC"], descriptor_sets["FC"][image_id])
        return svm.fuse_predict(fc_scores, fv_scores)
    (kind, model), = models.items()
    return svm.predict(model, descriptor_sets[kind][image_id])


def run_experiment(config: ExperimentConfig, fit_hook=None) -> ExperimentReport:
    """Run all rounds of the configured experiment and aggregate a report.

    `fit_hook(stage, image_ids)` is invoked before each model-fitting
    stage with the exact ids whose features the fit consumes; tests use
    it to assert training-only fitting.
    """
    config.validate()
    t_start = time.perf_counter()
    timing = {"fit": 0.0, "encode": 0.0, "train": 0.0, "evaluate": 0.0}

    manifest = load_manifest(config.manifest_path)
    labels_of = {e.image_id: e.class_label for e in manifest.entries}
    class_names = list(manifest.class_names)
    splits = make_splits(manifest, config.protocol, config.rounds, config.seed)

    bundles = {e.image_id: manifest.load_bundle(e) for e in manifest.entries}
    needs_fv = config.mode in ("FV", "FV+FC")
    needs_fc = config.mode in ("FC", "FV+FC")

    n_classes = len(class_names)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    class_index = {name: i for i, name in enumerate(class_names)}
    accuracies: list[float] = []
    aborted: list[dict] = []
    total_test = 0

    for round_idx, (train_ids, test_ids) in enumerate(splits):
        stage = "fit"
        try:
            t0 = time.perf_counter()
            descriptor_sets: dict[str, dict[str, np.ndarray]] = {}
            if needs_fv:
                pca_model, gmm_model = _fit_round_models(
                    bundles, train_ids, config.k_gaussians, config.seed,
                    round_idx, fit_hook,
                )
                timing["fit"] += time.perf_counter() - t0

                stage = "encode"
                t0 = time.perf_counter()
                cache = None
                cache_dir = config.effective_cache_dir()
                if cache_dir:
                    cache = _DescriptorCache(cache_dir, {
                        "manifest": str(Path(config.manifest_path).resolve()),
                        "protocol": config.protocol,
                        "rounds": config.rounds,
                        "seed": config.seed,
                        "k": config.k_gaussians,
                        "round": round_idx,
                    })
                all_ids = list(train_ids) + list(test_ids)
                descriptor_sets["FV"] = _prepare_fv(
                    bundles, all_ids, pca_model, gmm_model, cache
                )
                timing["encode"] += time.perf_counter() - t0
            if needs_fc:
                stage = "encode"
                t0 = time.perf_counter()
                descriptor_sets["FC"] = _prepare_fc(
                    bundles, list(train_ids) + list(test_ids)
                )
                timing["encode"] += time.perf_counter() - t0

            stage = "train"
            t0 = time.perf_counter()
            cost = _select_cost(config, manifest, descriptor_sets, labels_of,
                                class_names, train_ids, round_idx)
            models = {
                kind: _train_mode(
                    desc, labels_of, class_names, train_ids, cost,
                    _round_seed(config.seed, round_idx, f"svm-{kind}"),
                )
                for kind, desc in descriptor_sets.items()
            }
            timing["train"] += time.perf_counter() - t0

            stage = "evaluate"
            t0 = time.perf_counter()
            correct = 0
            for image_id in test_ids:
                label = _predict_modes(models, descriptor_sets, image_id)
                truth = labels_of[image_id]
                confusion[class_index[truth], class_index[label]] += 1
                if label == truth:
                    correct += 1
            accuracies.append(correct / len(test_ids))
            total_test += len(test_ids)
            timing["evaluate"] += time.perf_counter() - t0
        except Exception as exc:
            aborted.append({"round": round_idx, "stage": stage, "error": str(exc)})

    if not accuracies:
        raise RunError(f"all rounds aborted: {aborted}")

    timing["total"] = time.perf_counter() - t_start
    acc = np.asarray(accuracies)
    trace = int(np.trace(confusion))
    return ExperimentReport(
        config=config,
        class_names=class_names,
        per_round_accuracy=[float(a) for a in acc],
        mean_accuracy=float(acc.mean()),
        std_accuracy=float(acc.std()),
        overall_accuracy=trace / total_test,
        confusion=confusion,
        total_test=total_test,
        aborted_rounds=aborted,
        timing=timing,
    )


def emit_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write `report.json` and `confusion.csv` under `out_dir`.

    Wall-clock timings are deliberately left out of the JSON so that
    identical configurations reproduce identical bytes; timing lives on
    the in-memory report object.
    """
    if not report.per_round_accuracy:
        raise RunError("cannot emit a report with no completed rounds")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    doc = {
        "config": {
            "manifest_path": report.config.manifest_path,
            "protocol": report.config.protocol,
            "rounds": report.config.rounds,
            "k_gaussians": report.config.k_gaussians,
            "cost": report.config.cost,
            "seed": report.config.seed,
            "mode": report.config.mode,
            "cache_dir": report.config.cache_dir,
        },
        "class_names": report.class_names,
        "rounds_completed": len(report.per_round_accuracy),
        "per_round_accuracy": report.per_round_accuracy,
        "mean_accuracy": report.mean_accuracy,
        "std_accuracy": report.std_accuracy,
        "overall_accuracy": report.overall_accuracy,
        "total_test_images": report.total_test,
        "aborted_rounds": report.aborted_rounds,
        "confusion": report.confusion.tolist(),
    }
    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")

    csv_path = out_dir / "confusion.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("true_class," + ",".join(report.class_names) + "\n")
        for name, row in zip(report.class_names, report.confusion):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")
    return {"report": report_path, "confusion": csv_path}
