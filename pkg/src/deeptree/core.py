"""Complete d-ary trees, node addressing, labels, model parameters and datasets.

Nodes are addressed implicitly in level order: the root is ``(0, 0)`` and the
children of ``(level, i)`` are ``(level + 1, d*i) ... (level + 1, d*i + d - 1)``.
Nothing about the tree is stored beyond ``d`` and ``h``.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import io
import os
from collections.abc import Iterable, Iterator, Mapping
from typing import NamedTuple, TextIO

import numpy as np

MAX_NODES = 1 << 26
FORMAT_TAG = "HTL1"


class NodeRef(NamedTuple):
    level: int
    index: int

    def __str__(self) -> str:
        return f"{self.level}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeRef":
        level, _, index = text.partition(":")
        if not _:
            raise ValueError(f"malformed node reference {text!r}")
        return cls(int(level), int(index))


@dataclasses.dataclass(frozen=True)
class TreeTopology:
    """A complete ``d``-ary tree with levels ``0..h`` (root at 0, leaves at ``h``)."""

    d: int
    h: int
    max_nodes: int = dataclasses.field(default=MAX_NODES, compare=False, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"arity must be an integer >= 2, got {self.d}")
        if int(self.h) != self.h or self.h < 1:
            raise ValueError(f"height must be an integer >= 1, got {self.h}")
        if self.n_nodes > self.max_nodes:
            raise ValueError(
                f"tree with d={self.d}, h={self.h} has {self.n_nodes} nodes, "
                f"above the cap of {self.max_nodes}"
            )

    @property
    def n_nodes(self) -> int:
        return (self.d ** (self.h + 1) - 1) // (self.d - 1)

    @property
    def n_leaves(self) -> int:
        return self.d**self.h

    @property
    def root(self) -> NodeRef:
        return NodeRef(0, 0)

    def level_size(self, level: int) -> int:
        if not 0 <= level <= self.h:
            raise ValueError(f"level {level} outside [0, {self.h}]")
        return self.d**level

    def contains(self, node: NodeRef) -> bool:
        level, index = node
        return 0 <= level <= self.h and 0 <= index < self.d**level

    def check(self, node) -> NodeRef:
        node = NodeRef(*node)
        if not self.contains(node):
            raise ValueError(f"node {node} is not in a tree with d={self.d}, h={self.h}")
        return node

    def is_leaf(self, node: NodeRef) -> bool:
        return self.check(node).level == self.h

    def parent(self, node: NodeRef) -> NodeRef | None:
        level, index = self.check(node)
        if level == 0:
            return None
        return NodeRef(level - 1, index // self.d)

    def children(self, node: NodeRef) -> list[NodeRef]:
        level, index = self.check(node)
        if level == self.h:
            return []
        return [NodeRef(level + 1, self.d * index + j) for j in range(self.d)]

    def ancestor(self, node: NodeRef, level: int) -> NodeRef:
        """Ancestor of ``node`` at ``level`` (the node itself when levels agree)."""
        nl, ni = self.check(node)
        if not 0 <= level <= nl:
            raise ValueError(f"level {level} is not above node {node}")
        return NodeRef(level, ni // self.d ** (nl - level))

    def is_ancestor(self, upper: NodeRef, lower: NodeRef) -> bool:
        """True when ``upper`` is ``lower`` or one of its ancestors."""
        upper, lower = self.check(upper), self.check(lower)
        return upper.level <= lower.level and self.ancestor(lower, upper.level) == upper

    def descendant_range(self, node: NodeRef, level: int) -> range:
        nl, ni = self.check(node)
        if not nl <= level <= self.h:
            raise ValueError(f"level {level} is not below node {node}")
        span = self.d ** (level - nl)
        return range(ni * span, (ni + 1) * span)

    def leaves_under(self, node: NodeRef) -> list[NodeRef]:
        return [NodeRef(self.h, i) for i in self.descendant_range(node, self.h)]

    def nodes(self, level: int | None = None) -> Iterator[NodeRef]:
        levels = range(self.h + 1) if level is None else [level]
        for lv in levels:
            for i in range(self.level_size(lv)):
                yield NodeRef(lv, i)

    def leaves(self) -> list[NodeRef]:
        return list(self.nodes(self.h))

    def mca(self, nodes: Iterable[NodeRef]) -> NodeRef:
        """Most common (deepest shared) ancestor of a non-empty node collection."""
        nodes = [self.check(n) for n in nodes]
        if not nodes:
            raise ValueError("mca of an empty collection")
        level = min(n.level for n in nodes)
        while True:
            anc = {self.ancestor(n, level) for n in nodes}
            if len(anc) == 1:
                return anc.pop()
            level -= 1

    def distance(self, u: NodeRef, v: NodeRef) -> int:
        return graph_distance(self, u, v)


def build_tree(d: int, h: int, max_nodes: int = MAX_NODES) -> TreeTopology:
    return TreeTopology(d, h, max_nodes)


def graph_distance(tree: TreeTopology, u: NodeRef, v: NodeRef) -> int:
    """Number of edges on the path between ``u`` and ``v``."""
    (ul, ui), (vl, vi) = tree.check(u), tree.check(v)
    dist = 0
    while ul > vl:
        ui //= tree.d
        ul -= 1
        dist += 1
    while vl > ul:
        vi //= tree.d
        vl -= 1
        dist += 1
    while ui != vi:
        ui //= tree.d
        vi //= tree.d
        dist += 2
    return dist


# -- labels -----------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class LabelAssignment:
    """Sparse map from nodes to their (non-empty) label sets."""

    nodes: Mapping[NodeRef, frozenset[int]]

    def __post_init__(self):
        cleaned = {NodeRef(*n): frozenset(s) for n, s in self.nodes.items() if s}
        object.__setattr__(self, "nodes", cleaned)

    def of(self, node: NodeRef) -> frozenset[int]:
        return self.nodes.get(NodeRef(*node), frozenset())

    @property
    def label_ids(self) -> list[int]:
        return sorted(set().union(*self.nodes.values())) if self.nodes else []

    @classmethod
    def empty(cls) -> "LabelAssignment":
        return cls({})

    @classmethod
    def from_tops(cls, tree: TreeTopology, tops: Mapping[int, NodeRef]) -> "LabelAssignment":
        """Give each label to its top node and every descendant of it."""
        nodes: dict[NodeRef, set[int]] = {}
        for label, top in tops.items():
            top = tree.check(top)
            for level in range(top.level, tree.h + 1):
                for i in tree.descendant_range(top, level):
                    nodes.setdefault(NodeRef(level, i), set()).add(int(label))
        return cls({n: frozenset(s) for n, s in nodes.items()})

    def tops(self) -> dict[int, NodeRef]:
        """Highest node carrying each label (smallest index on ties)."""
        return dict(self._tops)

    @functools.cached_property
    def _tops(self) -> dict[int, NodeRef]:
        best: dict[int, NodeRef] = {}
        for node in sorted(self.nodes):
            for label in self.nodes[node]:
                if label not in best:
                    best[label] = node
        return best

    def leaf_label(self, node: NodeRef) -> int | None:
        """Most specific label of a node: the one whose top is deepest."""
        labels = self.of(node)
        if not labels:
            return None
        tops = self._tops
        return max(labels, key=lambda lab: (tops[lab].level, -lab))


@dataclasses.dataclass(frozen=True)
class LabelingReport:
    ok: bool
    label: int | None = None
    nodes: tuple[NodeRef, NodeRef] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_labeling(tree: TreeTopology, labels: LabelAssignment) -> LabelingReport:
    """Check that labels are inherited downward and each label sits on one subtree."""
    for node in sorted(labels.nodes):
        if not tree.contains(node):
            return LabelingReport(False, None, (node, node), "node outside tree")
    # Monotonicity is a parent/child property.
    for node in sorted(labels.nodes):
        own = labels.nodes[node]
        for child in tree.children(node):
            missing = own - labels.of(child)
            if missing:
                return LabelingReport(
                    False, min(missing), (node, child), "label not inherited by child"
                )
    # Under monotonicity a label is subtree-closed iff it has exactly one top.
    tops: dict[int, list[NodeRef]] = {}
    for node in sorted(labels.nodes):
        parent = tree.parent(node)
        for label in labels.nodes[node]:
            if parent is None or label not in labels.of(parent):
                tops.setdefault(label, []).append(node)
    for label in sorted(tops):
        if len(tops[label]) > 1:
            a, b = tops[label][:2]
            return LabelingReport(False, label, (a, b), "label carried by disjoint subtrees")
    return LabelingReport(True)


# -- model parameters ---------------------------------------------------------


class Variant(str, enum.Enum):
    IIDM = "IIDM"
    VRM = "VRM"
    FIM = "FIM"


class Regime(str, enum.Enum):
    RANDOM = "random"
    SHARED = "shared"
    ADVERSARIAL = "adversarial"


def letter_dtype(q: int) -> np.dtype:
    return np.dtype(np.uint8) if q <= 256 else np.dtype(np.uint16)


def check_rewiring(perm, k: int) -> np.ndarray:
    """Validate one level's rewiring permutation of the k positions."""
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (k,) or not np.array_equal(np.sort(perm), np.arange(k)):
        raise ValueError("rewiring must be a permutation of range(k)")
    firsts, seconds = perm[0::2], perm[1::2]
    pairs = np.arange(0, k, 2)
    lo, hi = np.minimum(firsts, seconds), np.maximum(firsts, seconds)
    bad = (lo == pairs) & (hi == pairs + 1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"rewiring keeps pair ({2 * i}, {2 * i + 1}) in place")
    return perm


@dataclasses.dataclass(frozen=True, eq=False)
class ModelParams:
    """Generative model settings.

    ``rewiring[j - 1]`` is the permutation used for edges into level ``j``
    (FIM only). ``adversarial`` holds caller-chosen edge parameters, one row
    per edge in level order (children of level 1 first).
    """

    variant: Variant
    q: int
    k: int
    lam: float
    regime: Regime = Regime.RANDOM
    rewiring: tuple[np.ndarray, ...] | None = None
    seed: int = 0
    adversarial: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "regime", Regime(self.regime))
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"copy probability must lie in [0, 1], got {self.lam}")
        if self.q < 2:
            raise ValueError("alphabet size q must be >= 2")
        if self.k < 1:
            raise ValueError("representation length k must be >= 1")
        if self.variant is Variant.FIM:
            if self.k % 2:
                raise ValueError("FIM needs an even representation length")
            if self.q > 256:
                raise ValueError("FIM pair codes need q <= 256")
            if self.rewiring is not None:
                object.__setattr__(
                    self, "rewiring", tuple(check_rewiring(p, self.k) for p in self.rewiring)
                )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def dtype(self) -> np.dtype:
        return letter_dtype(self.q)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


def check_representation(rep, q: int, k: int) -> np.ndarray:
    arr = np.asarray(rep)
    if arr.shape != (k,):
        raise ValueError(f"representation must have length {k}, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= q):
        raise ValueError(f"letters must lie in [0, {q})")
    return arr.astype(letter_dtype(q), copy=False)


# -- datasets -----------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled and unlabeled leaf representations.

    The node references of unlabeled leaves are kept only so results can be
    scored; inference code works from ``unlabeled_reps`` alone.
    """

    d: int
    h: int
    q: int
    k: int
    model: Variant
    labeled_nodes: tuple[NodeRef, ...]
    labeled_reps: np.ndarray
    labels: np.ndarray
    unlabeled_nodes: tuple[NodeRef, ...]
    unlabeled_reps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model", Variant(self.model))
        tree = self.tree
        dt = letter_dtype(self.q)
        lreps = np.asarray(self.labeled_reps).reshape(len(self.labeled_nodes), self.k)
        ureps = np.asarray(self.unlabeled_reps).reshape(len(self.unlabeled_nodes), self.k)
        for reps in (lreps, ureps):
            if reps.size and (reps.min() < 0 or reps.max() >= self.q):
                raise ValueError(f"letters must lie in [0, {self.q})")
        object.__setattr__(self, "labeled_reps", lreps.astype(dt, copy=False))
        object.__setattr__(self, "unlabeled_reps", ureps.astype(dt, copy=False))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64).reshape(-1))
        if len(self.labels) != len(self.labeled_nodes):
            raise ValueError("one label per labeled leaf is required")
        nodes = [NodeRef(*n) for n in self.labeled_nodes + self.unlabeled_nodes]
        if len(set(nodes)) != len(nodes):
            raise ValueError("a leaf appears twice in the dataset")
        if any(n.level != self.h or not tree.contains(n) for n in nodes):
            raise ValueError("dataset entries must be leaves of the tree")
        if len(nodes) != tree.n_leaves:
            raise ValueError("labeled and unlabeled entries must cover every leaf")

    @property
    def tree(self) -> TreeTopology:
        return TreeTopology(self.d, self.h)

    @property
    def labeled(self) -> list[tuple[NodeRef, np.ndarray, int]]:
        return [
            (n, self.labeled_reps[i], int(self.labels[i]))
            for i, n in enumerate(self.labeled_nodes)
        ]

    @property
    def unlabeled(self) -> list[tuple[NodeRef, np.ndarray]]:
        return [(n, self.unlabeled_reps[i]) for i, n in enumerate(self.unlabeled_nodes)]

    @property
    def all_reps(self) -> np.ndarray:
        """Labeled rows followed by unlabeled rows."""
        return np.concatenate([self.labeled_reps, self.unlabeled_reps], axis=0)

    # -- text format ----------------------------------------------------------

    def header(self) -> str:
        return (
            f"{FORMAT_TAG} d={self.d} h={self.h} q={self.q} k={self.k} "
            f"model={self.model.value}"
        )

    def to_text(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    def write(self, out: TextIO | str | os.PathLike) -> None:
        if isinstance(out, (str, os.PathLike)):
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                self.write(fh)
            return
        rows = [(n, r, str(lab)) for n, r, lab in zip(self.labeled_nodes, self.labeled_reps, self.labels)]
        rows += [(n, r, "-") for n, r in zip(self.unlabeled_nodes, self.unlabeled_reps)]
        rows.sort(key=lambda row: row[0])
        out.write(self.header() + "\n")
        for node, rep, lab in rows:
            out.write(f"{node} {format_letters(rep)} {lab}\n")

    @classmethod
    def from_text(cls, text: str) -> "Dataset":
        return cls.read(io.StringIO(text))

    @classmethod
    def read(cls, src: TextIO | str | os.PathLike) -> "Dataset":
        if isinstance(src, (str, os.PathLike)):
            with open(src, encoding="utf-8") as fh:
                return cls.read(fh)
        header = parse_header(src.readline())
        q, k = header["q"], header["k"]
        labeled, unlabeled = [], []
        for lineno, line in enumerate(src, start=2):
            line = line.strip()
            if not line:
                continue
            node, rep, lab = parse_node_line(line, q, k, lineno)
            if lab == "-":
                unlabeled.append((node, rep))
            else:
                labeled.append((node, rep, int(lab)))
        dt = letter_dtype(q)
        return cls(
            d=header["d"],
            h=header["h"],
            q=q,
            k=k,
            model=header["model"],
            labeled_nodes=tuple(n for n, _, _ in labeled),
            labeled_reps=np.array([r for _, r, _ in labeled], dtype=dt).reshape(-1, k),
            labels=np.array([lab for _, _, lab in labeled], dtype=np.int64),
            unlabeled_nodes=tuple(n for n, _ in unlabeled),
            unlabeled_reps=np.array([r for _, r in unlabeled], dtype=dt).reshape(-1, k),
        )


def format_letters(rep: np.ndarray) -> str:
    return ",".join(map(str, np.asarray(rep).tolist()))


def parse_header(line: str) -> dict:
    parts = line.split()
    if not parts or parts[0] != FORMAT_TAG:
        raise ValueError(f"not a {FORMAT_TAG} file: {line.strip()!r}")
    fields = dict(p.split("=", 1) for p in parts[1:])
    try:
        out = {key: int(fields[key]) for key in ("d", "h", "q", "k")}
        out["model"] = Variant(fields["model"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad header: {line.strip()!r}") from exc
    return out


def parse_node_line(line: str, q: int, k: int, lineno: int = 0):
    try:
        node_text, letters_text, label = line.split()
        node = NodeRef.parse(node_text)
        letters = [int(x) for x in letters_text.split(",")]
    except ValueError as exc:
        raise ValueError(f"line {lineno}: malformed entry {line!r}") from exc
    if len(letters) != k:
        raise ValueError(f"line {lineno}: expected {k} letters, got {len(letters)}")
    if min(letters) < 0 or max(letters) >= q:
        raise ValueError(f"line {lineno}: letter outside [0, {q})")
    return node, letters, label
