"""Grouping nodes of one level into complete d-ary subtrees from pairwise similarities."""
from __future__ import annotations

import dataclasses
import heapq
import math

import numpy as np


ROW_BLOCK = 256


class ReconstructionFailure(RuntimeError):
    """A stage could not produce a structure consistent with a complete d-ary tree."""

    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason


@dataclasses.dataclass(frozen=True)
class LocalStructure:
    """Result of grouping one level.

    ``groups[g]`` lists input indices in tree order (siblings contiguous);
    ``nested[g]`` is the same group as nested lists of depth ``depth``.
    ``clusters[j]`` holds the partition after ``j + 1`` rounds, each cluster
    in tree order. ``margins[j]`` compares the weakest within-cluster
    similarity with the strongest between-cluster similarity at round ``j``,
    in units of tree distance; positive means cleanly separated.
    """

    groups: list[list[int]]
    nested: list
    clusters: list[list[list[int]]]
    margins: list[float]
    depth: int


def _capped_merge(S: np.ndarray, d: int, neighbors: int) -> list[list[int]]:
    """Average-linkage agglomeration that never builds a cluster larger than ``d``.

    Only the ``neighbors`` most similar items of each item are candidates at
    first; if that leaves incomplete clusters, every pair among them is
    offered before giving up.
    """
    n = S.shape[0]
    members = {i: [i] for i in range(n)}
    version = {i: 0 for i in range(n)}
    heap: list = []

    def link(a, b):
        ma, mb = members[a], members[b]
        if len(ma) == 1 and len(mb) == 1:
            return float(S[ma[0], mb[0]])
        return float(S[np.ix_(ma, mb)].mean())

    def push(a, b):
        if a == b or len(members[a]) + len(members[b]) > d:
            return
        lo, hi = min(a, b), max(a, b)
        heapq.heappush(heap, (-link(lo, hi), lo, hi, version[lo], version[hi]))

    m = min(neighbors, n - 1)
    if m > 0:
        seen = set()
        for i0 in range(0, n, ROW_BLOCK):
            # row blocks keep memory at O(block * n)
            rows = np.arange(i0, min(i0 + ROW_BLOCK, n))
            neg = -S[rows]
            neg[rows - i0, rows] = np.inf
            top = np.argpartition(neg, m - 1, axis=1)[:, :m]
            for i, row in zip(rows.tolist(), top):
                for j in row:
                    key = (min(i, int(j)), max(i, int(j)))
                    if key not in seen:
                        seen.add(key)
                        push(*key)
    adjacency: dict[int, set[int]] = {i: set() for i in range(n)}
    for _, a, b, _, _ in heap:
        adjacency[a].add(b)
        adjacency[b].add(a)

    next_id = n

    def drain():
        nonlocal next_id
        while heap:
            _, a, b, va, vb = heapq.heappop(heap)
            if a not in members or b not in members or version[a] != va or version[b] != vb:
                continue
            if len(members[a]) + len(members[b]) > d:
                continue
            new = next_id
            next_id += 1
            members[new] = members.pop(a) + members.pop(b)
            version[new] = 0
            nbrs = (adjacency.pop(a) | adjacency.pop(b)) - {a, b}
            adjacency[new] = set()
            for c in nbrs:
                adjacency[c].discard(a)
                adjacency[c].discard(b)
                if c in members:
                    adjacency[c].add(new)
                    adjacency[new].add(c)
            if len(members[new]) < d:
                for c in adjacency[new]:
                    push(new, c)

    drain()
    open_ = [c for c, mem in members.items() if len(mem) < d]
    if open_:
        for i, a in enumerate(open_):
            for b in open_[i + 1 :]:
                adjacency[a].add(b)
                adjacency[b].add(a)
                push(a, b)
        drain()
    return [sorted(mem) for mem in members.values()]


def _margin(S: np.ndarray, clusters: list[list[int]], lam: float) -> float:
    label = np.empty(S.shape[0], dtype=np.int64)
    for g, mem in enumerate(clusters):
        label[mem] = g
    if len(clusters) < 2 or max(len(c) for c in clusters) < 2:
        return math.inf
    s_in = min(S[np.ix_(c, c)][~np.eye(len(c), dtype=bool)].min() for c in clusters if len(c) > 1)
    s_out = -math.inf
    for i0 in range(0, S.shape[0], ROW_BLOCK):
        block = S[i0 : i0 + ROW_BLOCK]
        other = label[i0 : i0 + ROW_BLOCK, None] != label[None, :]
        s_out = max(s_out, float(block[other].max()))
    if s_in <= 0:
        return -math.inf
    if s_out <= 0:
        return math.inf
    return math.log(s_in / s_out) / math.log(1.0 / lam)


def local_structure(
    S: np.ndarray,
    d: int,
    depth: int,
    lam: float,
    neighbors: int | None = None,
) -> LocalStructure:
    """Partition level nodes into rooted ``depth``-level subtrees.

    ``S`` holds pairwise similarities whose expectation decreases with tree
    distance (e.g. ``lam**dist`` times endpoint qualities). The first round
    groups siblings; each later round groups the previous clusters using the
    mean similarity between their members.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("similarity matrix must be square")
    if n % d**depth:
        raise ReconstructionFailure("local-structure", f"{n} nodes do not fill {d}-ary subtrees of depth {depth}")
    neighbors = neighbors or 2 * d
    clusters: list[list[int]] = [[i] for i in range(n)]
    nested: list = list(range(n))
    history, margins = [], []
    block = S
    for round_ in range(depth):
        parts = _capped_merge(block, d, neighbors)
        bad = [p for p in parts if len(p) != d]
        if bad:
            raise ReconstructionFailure(
                "local-structure",
                f"round {round_ + 1}: {len(bad)} clusters of size {sorted({len(p) for p in bad})} instead of {d}",
            )
        margins.append(_margin(block, parts, lam))
        parts.sort(key=lambda p: min(min(clusters[i]) for i in p))
        nested = [[nested[i] for i in p] for p in parts]
        clusters = [[leaf for i in p for leaf in clusters[i]] for p in parts]
        history.append(clusters)
        if round_ + 1 < depth:
            block = _block_means(S, clusters)
    return LocalStructure(
        groups=clusters, nested=nested, clusters=history, margins=margins, depth=depth
    )


def _block_means(S: np.ndarray, clusters: list[list[int]]) -> np.ndarray:
    order = np.concatenate([np.asarray(c) for c in clusters])
    size = len(clusters[0])
    m = len(clusters)
    out = np.empty((m, m))
    step = max(1, ROW_BLOCK // size)
    for a0 in range(0, m, step):
        rows = order[a0 * size : (a0 + step) * size]
        out[a0 : a0 + step] = S[np.ix_(rows, order)].reshape(-1, size, m, size).mean(axis=(1, 3))
    return out
