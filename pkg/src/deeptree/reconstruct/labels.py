"""Label identifiability and propagation over an (inferred) hierarchy."""
from __future__ import annotations

from collections.abc import Iterable, Mapping

from ..core import LabelAssignment, NodeRef, TreeTopology

UNLABELED = -1


def is_well_represented(label: int, S: Iterable[NodeRef], labels: LabelAssignment, tree: TreeTopology) -> bool:
    """True when the label's top node reaches ``S`` along two edge-disjoint paths.

    Paths leaving the top node through the same child share that edge, so
    the labeled leaves must sit below at least two different children (or
    the top node is itself a labeled leaf).
    """
    top = labels.tops().get(label)
    if top is None:
        return False
    below = [n for n in map(NodeRef._make, S) if tree.is_ancestor(top, n)]
    if not below:
        return False
    if top in below:
        return True
    children = {tree.ancestor(n, top.level + 1) for n in below}
    return len(children) >= 2


class Hierarchy:
    """Rooted hierarchy given as nested lists whose innermost items are leaf ids."""

    def __init__(self, nested):
        self.parent: list[int] = []
        self.depth: list[int] = []
        self.leaves: list[list] = []
        self.leaf_node: dict = {}
        self._build(nested, -1, 0)

    def _build(self, item, parent: int, depth: int) -> int:
        nid = len(self.parent)
        self.parent.append(parent)
        self.depth.append(depth)
        self.leaves.append([])
        if isinstance(item, (list, tuple)):
            for child in item:
                cid = self._build(child, nid, depth + 1)
                self.leaves[nid].extend(self.leaves[cid])
        else:
            self.leaves[nid].append(item)
            self.leaf_node[item] = nid
        return nid

    def __len__(self) -> int:
        return len(self.parent)

    def internal(self) -> list[int]:
        leaf_ids = set(self.leaf_node.values())
        return [n for n in range(len(self)) if n not in leaf_ids]

    def mca(self, leaves: Iterable) -> int:
        """Deepest node containing all given leaves."""
        nodes = [self.leaf_node[x] for x in leaves]
        if not nodes:
            raise ValueError("mca of an empty leaf set")
        current = nodes[0]
        for other in nodes[1:]:
            a, b = current, other
            while self.depth[a] > self.depth[b]:
                a = self.parent[a]
            while self.depth[b] > self.depth[a]:
                b = self.parent[b]
            while a != b:
                a, b = self.parent[a], self.parent[b]
            current = a
        return current


def propagate_labels(hierarchy: Hierarchy | list, labeled: Mapping) -> dict:
    """Give each leaf the label whose common ancestor of labeled examples is deepest above it.

    For every label the deepest node covering all of its labeled leaves
    claims the whole subtree. A leaf claimed at equal depth by different
    labels, or by none, gets ``UNLABELED``.
    """
    if not isinstance(hierarchy, Hierarchy):
        hierarchy = Hierarchy(hierarchy)
    by_label: dict[int, list] = {}
    for leaf, lab in labeled.items():
        by_label.setdefault(int(lab), []).append(leaf)
    claims: dict = {}
    for lab in sorted(by_label):
        w = hierarchy.mca(by_label[lab])
        for leaf in hierarchy.leaves[w]:
            claims.setdefault(leaf, []).append((hierarchy.depth[w], lab))
    out = {}
    for leaf in hierarchy.leaf_node:
        got = claims.get(leaf)
        if not got:
            out[leaf] = UNLABELED
            continue
        deepest = max(dep for dep, _ in got)
        winners = {lab for dep, lab in got if dep == deepest}
        out[leaf] = winners.pop() if len(winners) == 1 else UNLABELED
    return out
