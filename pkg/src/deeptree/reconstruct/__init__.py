"""Inference of the hierarchy, internal representations and labels from leaf data."""
from .ancestral import ancestral_bp
from .distances import (
    DistanceEstimate,
    estimate_distance,
    estimate_distances,
    normalized_hamming,
    relative_hamming,
)
from .fim import fim_recover_pairperm, fim_resolve_flip
from .labels import UNLABELED, Hierarchy, is_well_represented, propagate_labels
from .structure import LocalStructure, ReconstructionFailure, local_structure
from .tree import ReconstructionResult, UnsupportedConfiguration, reconstruct_tree, topology_correct

__all__ = [
    "DistanceEstimate",
    "Hierarchy",
    "LocalStructure",
    "ReconstructionFailure",
    "ReconstructionResult",
    "UNLABELED",
    "UnsupportedConfiguration",
    "ancestral_bp",
    "estimate_distance",
    "estimate_distances",
    "fim_recover_pairperm",
    "fim_resolve_flip",
    "is_well_represented",
    "local_structure",
    "normalized_hamming",
    "propagate_labels",
    "reconstruct_tree",
    "relative_hamming",
    "topology_correct",
]
