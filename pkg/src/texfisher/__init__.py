"""Multilayer deep-feature Fisher vector encoding for texture recognition.

The pipeline: local features from the last two convolutional layers of a
pretrained network are pooled (the deeper layer projected down by PCA),
encoded against a diagonal Gaussian mixture as a Fisher vector,
normalized with signed square root and L2 scaling, and classified by a
one-vs-rest linear SVM whose scores can be fused with the network's own
pooled-descriptor scores.
"""

from .fisher import (
    FisherVector,
    MergedFeatureSet,
    encode_dataset,
    encode_fv,
    fv_length,
    merge_layers,
)
from .gmm import GmmModel, em_fit, init_kmeans, log_likelihood, posteriors
from .pca import PcaModel, fit_pca, project
from .runner import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    make_splits,
    run_experiment,
)
from .svm import (
    DecisionScores,
    SvmModel,
    decision_values,
    fuse_predict,
    predict,
    train_ovr,
)
from .tensor_store import (
    DatasetManifest,
    FeatureBundle,
    ManifestEntry,
    load_manifest,
    read_tensor,
    save_manifest,
    write_tensor,
)
from .transform import (
    Descriptor,
    bhattacharyya_kernel,
    l2_normalize,
    phi_map,
    power_normalize,
    prepare_descriptor,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "DecisionScores",
    "Descriptor",
    "ExperimentConfig",
    "ExperimentReport",
    "FeatureBundle",
    "FisherVector",
    "GmmModel",
    "ManifestEntry",
    "MergedFeatureSet",
    "PcaModel",
    "SvmModel",
    "bhattacharyya_kernel",
    "decision_values",
    "em_fit",
    "emit_report",
    "encode_dataset",
    "encode_fv",
    "fit_pca",
    "fuse_predict",
    "fv_length",
    "init_kmeans",
    "l2_normalize",
    "load_manifest",
    "log_likelihood",
    "make_splits",
    "merge_layers",
    "phi_map",
    "posteriors",
    "power_normalize",
    "predict",
    "prepare_descriptor",
    "project",
    "read_tensor",
    "run_experiment",
    "save_manifest",
    "train_ovr",
    "write_tensor",
]
