"""Sampling, reconstruction and baseline classification for labeled data generated on trees."""
from .baselines import BaselineKind, classify, local_classify, shallow_classify
from .compression import CompressedData, CompressionScheme, compress
from .core import (
    Dataset,
    LabelAssignment,
    ModelParams,
    NodeRef,
    Regime,
    TreeTopology,
    Variant,
    build_tree,
    graph_distance,
    validate_labeling,
)
from .experiments import ExperimentConfig, estimate_tv_distance, run_separation_experiment
from .reconstruct import ancestral_bp, reconstruct_tree
from .samplers import (
    GroundTruth,
    InstanceSpec,
    generate_instance,
    make_dataset,
    sample,
    sample_fim,
    sample_iidm,
    sample_vrm,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineKind",
    "CompressedData",
    "CompressionScheme",
    "Dataset",
    "ExperimentConfig",
    "GroundTruth",
    "InstanceSpec",
    "LabelAssignment",
    "ModelParams",
    "NodeRef",
    "Regime",
    "TreeTopology",
    "Variant",
    "ancestral_bp",
    "build_tree",
    "classify",
    "compress",
    "estimate_tv_distance",
    "generate_instance",
    "graph_distance",
    "local_classify",
    "make_dataset",
    "reconstruct_tree",
    "run_separation_experiment",
    "sample",
    "sample_fim",
    "sample_iidm",
    "sample_vrm",
    "shallow_classify",
    "validate_labeling",
]
