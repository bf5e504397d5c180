"""Level-by-level tree reconstruction from leaf representations.

Repeats three steps starting at the leaves: group the current level into
``r``-level subtrees from pairwise similarities, stop once the groups
reach the root, otherwise estimate the representation of each subtree's
root by belief propagation and continue one window higher.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..core import Dataset, ModelParams, NodeRef, TreeTopology, Variant
from .ancestral import ancestral_bp
from .distances import (
    agreement_matrix,
    estimate_distances,
    relabelings,
    relative_agreement_matrix,
    similarity,
    similarity_from_agreement,
)
from .fim import (
    FimNode,
    decode_group,
    fim_recover_pairperm,
    fim_resolve_flip,
    node_agreement,
    pair_codes,
    resolve_frames,
    rewiring_swap,
)
from .labels import UNLABELED, Hierarchy, propagate_labels
from .structure import ReconstructionFailure, local_structure

MIN_QUALITY = 1e-3


class UnsupportedConfiguration(ValueError):
    """The requested model/arity combination has no reconstruction procedure."""


@dataclasses.dataclass
class ReconState:
    """Working state between iterations."""

    level: int
    r: int
    lam: float
    quality: float
    items: list
    nested: list
    anchors: list[int]


@dataclasses.dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Inferred hierarchy over the dataset's leaves, leaf labels and diagnostics.

    Leaves are referred to by their row in ``Dataset.all_reps`` (labeled rows
    first); ``leaf_ids`` converts rows to node references for scoring.
    """

    ok: bool
    leaf_ids: tuple[NodeRef, ...]
    nested: list | None
    labels: dict
    diagnostics: dict
    failure: dict | None = None

    @property
    def hierarchy(self) -> Hierarchy:
        if self.nested is None:
            raise ValueError("reconstruction failed; no hierarchy")
        return Hierarchy(self.nested)

    def nested_ids(self):
        def conv(item):
            return [conv(c) for c in item] if isinstance(item, list) else str(self.leaf_ids[item])

        return None if self.nested is None else conv(self.nested)

    def leaf_labels(self) -> dict[NodeRef, int]:
        return {self.leaf_ids[row]: lab for row, lab in self.labels.items()}

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "tree": self.nested_ids(),
            "labels": {str(n): int(lab) for n, lab in sorted(self.leaf_labels().items())},
            "diagnostics": self.diagnostics,
            "failure": self.failure,
        }


def _compose(group_nested, nested):
    if isinstance(group_nested, list):
        return [_compose(g, nested) for g in group_nested]
    return nested[group_nested]


def _finite(x: float):
    return x if math.isfinite(x) else (None if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def _sibling_quality(S: np.ndarray, clusters: list[list[int]], lam: float) -> float:
    vals = [S[i, j] for c in clusters for a, i in enumerate(c) for j in c[a + 1 :]]
    s = float(np.mean(vals)) if vals else 1.0
    return float(np.clip(math.sqrt(max(s, 0.0)) / lam, MIN_QUALITY, 1.0))


def _level_record(level, window, ls, quality, S, lam, r):
    sib = []
    for c in ls.clusters[0]:
        dist = estimate_distances(S[np.ix_(c, c)], lam, np.full(len(c), quality), r)
        sib.extend(dist[a, b] for a in range(len(c)) for b in range(a + 1, len(c)))
    return {
        "level": level,
        "window": window,
        "groups": len(ls.groups),
        "margins": [_finite(m) for m in ls.margins],
        "min_margin": _finite(min(ls.margins)),
        "quality": quality,
        "sibling_distance_two": float(np.mean(np.asarray(sib) == 2)) if sib else 1.0,
    }


def reconstruct_tree(
    data: Dataset,
    params: ModelParams,
    r: int = 2,
    min_count: int = 30,
    neighbors: int | None = None,
) -> ReconstructionResult:
    """Recover the hierarchy and leaf labels from a dataset.

    Stage failures (an impossible grouping, an ambiguous pair recovery or
    flip) end the run and are reported in ``failure`` rather than raised.
    """
    if r < 1:
        raise ValueError("window r must be >= 1")
    if not 0.0 < params.lam <= 1.0:
        raise ValueError("reconstruction needs a copy probability in (0, 1]")
    if params.q != data.q or params.k != data.k:
        raise ValueError("model parameters do not match the dataset")
    leaf_ids = tuple(data.labeled_nodes) + tuple(data.unlabeled_nodes)
    labeled = {row: int(lab) for row, lab in enumerate(data.labels)}
    diag: dict = {"model": params.variant.value, "r": r, "levels": [], "quality_trace": []}
    try:
        if params.variant is Variant.FIM:
            nested = _reconstruct_fim(data, params, diag, min_count, neighbors)
        else:
            nested = _reconstruct_sequence(data, params, r, diag, neighbors)
    except ReconstructionFailure as exc:
        labels = {row: UNLABELED for row in range(len(leaf_ids))}
        return ReconstructionResult(
            False, leaf_ids, None, labels, diag, {"stage": exc.stage, "reason": exc.reason}
        )
    labels = propagate_labels(Hierarchy(nested), labeled)
    return ReconstructionResult(True, leaf_ids, nested, labels, diag)


def _lam_for_distances(lam: float) -> float:
    # The distance estimate needs lam < 1; a noiseless channel behaves like lam just below 1.
    return min(lam, 1.0 - 1e-9)


def _reconstruct_sequence(data: Dataset, params: ModelParams, r: int, diag: dict, neighbors):
    d, q, lam = data.d, data.q, params.lam
    lam_d = _lam_for_distances(lam)
    vrm = params.variant is Variant.VRM
    X = np.ascontiguousarray(data.all_reps)
    state = ReconState(
        level=data.h, r=r, lam=lam, quality=1.0, items=list(range(X.shape[0])),
        nested=list(range(X.shape[0])), anchors=list(range(X.shape[0])),
    )
    if vrm:
        diag["sibling_relabelings"] = []
    while True:
        w = min(r, state.level)
        k = X.shape[1]
        agree = relative_agreement_matrix(X, q) if vrm else agreement_matrix(X)
        S = similarity_from_agreement(agree, k, q)
        del agree
        ls = local_structure(S, d, w, lam_d, neighbors)
        if state.level < data.h:
            state.quality = _sibling_quality(S, ls.clusters[0], lam)
        diag["levels"].append(_level_record(state.level, w, ls, state.quality, S, lam_d, r))
        if vrm:
            for c in ls.clusters[0]:
                sig = relabelings(X, [c[0]] * (d - 1), c[1:], q)
                for j, s in zip(c[1:], sig):
                    diag["sibling_relabelings"].append(
                        {
                            "level": state.level,
                            "anchor": state.anchors[c[0]],
                            "other": state.anchors[j],
                            "sigma": s.tolist(),
                        }
                    )
        if state.level - w <= 0:
            if len(ls.groups) != 1:
                raise ReconstructionFailure("local-structure", "top window does not close at one root")
            return _compose(ls.nested[0], state.nested)
        new_rows, new_nested, new_anchors, accs = [], [], [], []
        for g, nest in zip(ls.groups, ls.nested):
            window = X[g]
            if vrm:
                sig = relabelings(X, [g[0]] * (len(g) - 1), g[1:], q)
                inv = np.argsort(sig, axis=1)
                aligned = window.copy()
                for t in range(1, len(g)):
                    aligned[t] = inv[t - 1][window[t]]
                window = aligned
            est, acc, _ = ancestral_bp(window, d, state.quality, lam, q)
            new_rows.append(est.astype(X.dtype))
            new_nested.append(_compose(nest, state.nested))
            new_anchors.append(state.anchors[g[0]])
            accs.append(acc)
        diag["quality_trace"].append(
            {"level": state.level - w, "input_quality": state.quality, "predicted_accuracy": float(np.mean(accs))}
        )
        X = np.ascontiguousarray(np.stack(new_rows))
        state.level -= w
        state.nested, state.anchors = new_nested, new_anchors


def _reconstruct_fim(data: Dataset, params: ModelParams, diag: dict, min_count: int, neighbors):
    d, q, lam = data.d, data.q, params.lam
    if d < 3:
        raise UnsupportedConfiguration("pair-bijection recovery needs at least three siblings (d >= 3)")
    if params.rewiring is None or len(params.rewiring) < data.h:
        raise ValueError("FIM reconstruction needs the rewiring permutations of every level")
    lam_d = _lam_for_distances(lam)
    diag["r"] = 1
    diag["groups"] = []
    nodes = [FimNode.observed(x) for x in data.all_reps]
    nested = list(range(len(nodes)))
    anchors = list(range(len(nodes)))
    level = data.h
    while True:
        n = len(nodes)
        P = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                P[i, j] = P[j, i] = node_agreement(nodes[i], nodes[j], q)
        S = similarity(1.0 - np.sqrt(P), q)
        ls = local_structure(S, d, 1, lam_d, neighbors)
        quality = 1.0 if level == data.h else _sibling_quality(S, ls.clusters[0], lam)
        diag["levels"].append(_level_record(level, 1, ls, quality, S, lam_d, 1))
        if level - 1 <= 0:
            if len(ls.groups) != 1:
                raise ReconstructionFailure("local-structure", "top window does not close at one root")
            return _compose(ls.nested[0], nested)
        sigma = params.rewiring[level - 1]
        swap = rewiring_swap(sigma)
        cls = np.zeros(data.k, dtype=np.int64)
        cls[sigma[1::2]] = 1
        new_nodes, new_nested, new_anchors, accs = [], [], [], []
        for g, nest in zip(ls.groups, ls.nested):
            members = [nodes[i] for i in g]
            record = {"level": level, "members": [anchors[i] for i in g]}
            if members[0].can_flip:
                flips = fim_resolve_flip(members, q)
                members = [m.settled(f) for m, f in zip(members, flips.flips)]
                record["flips"] = list(flips.flips)
                record["flip_margin"] = flips.margin
            members, deltas = resolve_frames(members, q)
            record["frames"] = [dl.tolist() for dl in deltas]
            codes = np.stack([pair_codes(m.letters, q) for m in members])
            recs = [fim_recover_pairperm(codes, q, index=j, min_count=min_count) for j in range(d)]
            record["tau"] = [rc.tau.tolist() for rc in recs]
            record["min_gap"] = min(rc.min_gap for rc in recs)
            views = decode_group(members, recs[0], sigma, q)
            agree = np.mean([np.mean(views[a] == views[b]) for a in range(d) for b in range(a + 1, d)])
            mu = math.sqrt(float(np.clip((agree - 1 / q) / (1 - 1 / q), MIN_QUALITY**2, 1.0)))
            est, acc, _ = ancestral_bp(views, d, mu, 1.0, q)
            record["view_quality"] = mu
            diag["groups"].append(record)
            new_nodes.append(FimNode(est, cls.copy(), swap))
            new_nested.append(_compose(nest, nested))
            new_anchors.append(anchors[g[0]])
            accs.append(acc)
        diag["quality_trace"].append(
            {"level": level - 1, "input_quality": quality, "predicted_accuracy": float(np.mean(accs))}
        )
        nodes, nested, anchors = new_nodes, new_nested, new_anchors
        level -= 1


def topology_errors(result: ReconstructionResult, tree: TreeTopology) -> int:
    """Number of inferred subtrees whose leaf set is not a true subtree at the same depth."""
    if result.nested is None:
        return -1
    hier = result.hierarchy
    bad = 0
    for node in range(len(hier)):
        refs = [result.leaf_ids[x] for x in hier.leaves[node]]
        top = tree.mca(refs)
        if top.level != hier.depth[node] or len(refs) != tree.d ** (tree.h - top.level):
            bad += 1
    return bad


def topology_correct(result: ReconstructionResult, tree: TreeTopology) -> bool:
    return topology_errors(result, tree) == 0
