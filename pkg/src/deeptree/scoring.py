"""Compare inference output against the ground truth that generated the data."""
from __future__ import annotations

import numpy as np

from .core import Dataset, NodeRef, TreeTopology
from .reconstruct.fim import pair_residual
from .reconstruct.tree import ReconstructionResult, topology_correct
from .samplers import GroundTruth


def label_accuracy(predicted, data: Dataset, truth: GroundTruth) -> float:
    """Fraction of unlabeled leaves whose predicted label matches the truth."""
    predicted = np.asarray(predicted)
    if len(data.unlabeled_nodes) == 0:
        return 1.0
    want = np.array([truth.labels.leaf_label(n) for n in data.unlabeled_nodes], dtype=object)
    return float(np.mean([p == w for p, w in zip(predicted.tolist(), want.tolist())]))


def deep_predictions(result: ReconstructionResult, data: Dataset) -> np.ndarray:
    """Labels for the unlabeled leaves in dataset order."""
    n_lab = len(data.labeled_nodes)
    return np.array([result.labels[n_lab + i] for i in range(len(data.unlabeled_nodes))], dtype=np.int64)


def path_map(truth: GroundTruth, top: NodeRef, leaf: NodeRef) -> np.ndarray:
    """Composition of the edge relabelings from ``top`` down to ``leaf``."""
    tree = truth.tree
    out = np.arange(truth.params.q)
    for level in range(top.level + 1, leaf.level + 1):
        out = truth.edges.of(tree.ancestor(leaf, level))[out]
    return out


def vrm_sibling_scores(result: ReconstructionResult, truth: GroundTruth) -> tuple[int, int]:
    """(correct, total) sibling relabelings against the true relative maps.

    A reconstructed node is written in the alphabet of its first leaf, so the
    true map between siblings ``v1``, ``v2`` with parent ``p`` sends
    ``p``-to-leaf-of-``v1`` letters to ``p``-to-leaf-of-``v2`` letters.
    """
    tree = truth.tree
    ok = total = 0
    for rec in result.diagnostics.get("sibling_relabelings", []):
        a1, a2 = result.leaf_ids[rec["anchor"]], result.leaf_ids[rec["other"]]
        level = rec["level"]
        p1, p2 = tree.ancestor(a1, level - 1), tree.ancestor(a2, level - 1)
        total += 1
        if p1 != p2:
            continue
        m1, m2 = path_map(truth, p1, a1), path_map(truth, p1, a2)
        want = np.empty_like(m1)
        want[m1] = m2
        ok += bool(np.array_equal(want, np.asarray(rec["sigma"])))
    return ok, total


def fim_scores(result: ReconstructionResult, truth: GroundTruth) -> dict:
    """Check every recovered pair map and every flip decision against the truth."""
    tree, q = truth.tree, truth.params.q
    groups = result.diagnostics.get("groups", [])
    by_anchor = {(g["level"], g["members"][0]): g for g in groups}
    tau_ok = tau_total = flip_ok = flip_total = 0
    for g in groups:
        level = g["level"]
        for row, tau in zip(g["members"], g["tau"]):
            node = tree.ancestor(result.leaf_ids[row], level)
            res = pair_residual(truth.edges.of(node), np.asarray(tau), q, frame_search=level < tree.h)
            tau_total += 1
            tau_ok += res is not None
        for row, flip in zip(g["members"], g.get("flips", [])):
            child = by_anchor.get((level + 1, row))
            flip_total += 1
            if child is None:
                continue
            node = tree.ancestor(result.leaf_ids[row], level + 1)
            res = pair_residual(truth.edges.of(node), np.asarray(child["tau"][0]), q, frame_search=level + 1 < tree.h)
            flip_ok += res is not None and res[2] == flip
    return {"tau_ok": tau_ok, "tau_total": tau_total, "flip_ok": flip_ok, "flip_total": flip_total}


def reconstruction_summary(result: ReconstructionResult, data: Dataset, truth: GroundTruth) -> dict:
    tree: TreeTopology = truth.tree
    out = {
        "ok": result.ok,
        "topology": bool(result.ok and topology_correct(result, tree)),
        "accuracy": label_accuracy(deep_predictions(result, data), data, truth),
        "failure": None if result.failure is None else f"{result.failure['stage']}: {result.failure['reason']}",
    }
    if "sibling_relabelings" in result.diagnostics:
        out["sigma_ok"], out["sigma_total"] = vrm_sibling_scores(result, truth)
    if "groups" in result.diagnostics:
        out.update(fim_scores(result, truth))
    return out
