"""Sampling node representations under IIDM, VRM and FIM, and drawing instances."""
from __future__ import annotations

import dataclasses
import io
import os
from typing import TextIO

import numpy as np

from .core import (
    Dataset,
    LabelAssignment,
    ModelParams,
    NodeRef,
    Regime,
    TreeTopology,
    Variant,
    check_representation,
    check_rewiring,
    format_letters,
    letter_dtype,
    parse_header,
    parse_node_line,
)
from .rng import node_rng, stream


def channel_step(parent_letter: int, lam: float, q: int, rand: float) -> int:
    """Symmetric channel driven by a single uniform draw.

    ``rand < lam`` copies the parent letter; otherwise the remainder of the
    unit interval is split evenly between the ``q`` letters.
    """
    if not 0 <= parent_letter < q:
        raise ValueError(f"letter {parent_letter} outside [0, {q})")
    if rand < lam:
        return int(parent_letter)
    return min(int((rand - lam) / (1.0 - lam) * q), q - 1)


def apply_channel(parent: np.ndarray, lam: float, q: int, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`channel_step` over matching arrays of letters and draws."""
    parent = np.asarray(parent)
    copy = u < lam
    if lam >= 1.0:
        return parent.copy()
    fresh = np.minimum(((u - lam) / (1.0 - lam) * q).astype(np.int64), q - 1)
    return np.where(copy, parent, fresh).astype(parent.dtype)


# -- edge parameters ------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class EdgeParams:
    """Per-edge letter permutations (VRM) or pair bijections (FIM).

    ``tables[j - 1][i]`` belongs to the edge entering node ``(j, i)``. For FIM a
    row maps the pair code ``a*q + b`` to the child's pair code; ``f`` is the
    first letter of the image and ``g`` the second.
    """

    kind: Variant
    q: int
    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", Variant(self.kind))
        m = self.size
        for j, table in enumerate(self.tables, start=1):
            if table.ndim != 2 or table.shape[1] != m:
                raise ValueError(f"edge table for level {j} must have {m} columns")
            if not (np.sort(table, axis=1) == np.arange(m)).all():
                raise ValueError(f"edge parameters at level {j} are not bijections")

    @property
    def size(self) -> int:
        return self.q if self.kind is Variant.VRM else self.q * self.q

    def of(self, node: NodeRef) -> np.ndarray:
        level, index = node
        if level < 1:
            raise ValueError("the root has no incoming edge")
        return self.tables[level - 1][index]

    def f(self, node: NodeRef, a: int, b: int) -> int:
        return int(self.of(node)[a * self.q + b]) // self.q

    def g(self, node: NodeRef, a: int, b: int) -> int:
        return int(self.of(node)[a * self.q + b]) % self.q

    def rows(self) -> list[tuple[NodeRef, np.ndarray]]:
        return [
            (NodeRef(j, i), table[i])
            for j, table in enumerate(self.tables, start=1)
            for i in range(table.shape[0])
        ]


def draw_edge_params(tree: TreeTopology, params: ModelParams) -> EdgeParams | None:
    if params.variant is Variant.IIDM:
        return None
    m = params.q if params.variant is Variant.VRM else params.q**2
    tables = []
    if params.regime is Regime.ADVERSARIAL:
        given = params.adversarial
        if given is None:
            raise ValueError("adversarial regime needs caller-supplied edge parameters")
        given = np.asarray(given, dtype=np.int64)
        if given.ndim != 2 or given.shape[0] != tree.n_nodes - 1:
            raise ValueError(
                f"adversarial list must hold {tree.n_nodes - 1} edges, got {given.shape[0]}"
            )
        start = 0
        for j in range(1, tree.h + 1):
            n = tree.level_size(j)
            tables.append(given[start : start + n])
            start += n
    elif params.regime is Regime.SHARED:
        for j in range(1, tree.h + 1):
            perm = node_rng(params.seed, j, 0, "shared-edge").permutation(m)
            tables.append(np.broadcast_to(perm, (tree.level_size(j), m)))
    else:
        for j in range(1, tree.h + 1):
            tables.append(
                np.stack(
                    [node_rng(params.seed, j, i, "edge").permutation(m) for i in range(tree.level_size(j))]
                )
            )
    return EdgeParams(params.variant, params.q, tuple(tables))


def random_rewiring(k: int, h: int, seed: int) -> tuple[np.ndarray, ...]:
    """Rewiring permutations for levels ``1..h``.

    Beyond the required condition (pair ``i`` is not sent back onto positions
    ``2i, 2i+1``), no pair is sent onto any pair, so that swapping the two
    letters of every rewired pair always breaks the pair structure.
    """
    if k % 2 or k < 4:
        raise ValueError("rewiring needs an even k >= 4")
    out = []
    for j in range(1, h + 1):
        rng = node_rng(seed, j, 0, "rewire")
        perm = rng.permutation(k)
        while True:
            lo = np.minimum(perm[0::2], perm[1::2])
            hi = np.maximum(perm[0::2], perm[1::2])
            bad = np.flatnonzero((lo % 2 == 0) & (hi == lo + 1))
            if bad.size == 0:
                break
            for i in bad:
                other = int(rng.integers(k))
                perm[2 * i + 1], perm[other] = perm[other], perm[2 * i + 1]
        out.append(check_rewiring(perm, k))
    return tuple(out)


# -- ground truth -----------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class GroundTruth:
    tree: TreeTopology
    params: ModelParams
    reps: tuple[np.ndarray, ...]
    edges: EdgeParams | None = None
    labels: LabelAssignment = dataclasses.field(default_factory=LabelAssignment.empty)
    S: frozenset = frozenset()

    def rep(self, node: NodeRef) -> np.ndarray:
        level, index = self.tree.check(node)
        return self.reps[level][index]

    @property
    def leaf_reps(self) -> np.ndarray:
        return self.reps[self.tree.h]

    def with_instance(self, labels: LabelAssignment, S) -> "GroundTruth":
        return dataclasses.replace(self, labels=labels, S=frozenset(NodeRef(*n) for n in S))

    # -- text format ----------------------------------------------------------

    def write(self, out: TextIO | str | os.PathLike) -> None:
        if isinstance(out, (str, os.PathLike)):
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                self.write(fh)
            return
        t, p = self.tree, self.params
        out.write(f"HTL1 d={t.d} h={t.h} q={p.q} k={p.k} model={p.variant.value}\n")
        for level, reps in enumerate(self.reps):
            for i, rep in enumerate(reps):
                node = NodeRef(level, i)
                lab = self.labels.leaf_label(node) if node in self.S else None
                out.write(f"{node} {format_letters(rep)} {'-' if lab is None else lab}\n")
        out.write(f"#params lam={p.lam!r} regime={p.regime.value} seed={p.seed}\n")
        out.write("#labels\n")
        for label, top in sorted(self.labels.tops().items()):
            out.write(f"{label} {top}\n")
        out.write("#S\n")
        for node in sorted(self.S):
            out.write(f"{node}\n")
        if self.edges is not None:
            out.write(f"#edges {self.edges.kind.value}\n")
            for node, row in self.edges.rows():
                out.write(f"{node} {format_letters(row)}\n")
        if p.rewiring is not None:
            out.write("#rewiring\n")
            for j, perm in enumerate(p.rewiring, start=1):
                out.write(f"{j} {format_letters(perm)}\n")

    def to_text(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    @classmethod
    def read(cls, src: TextIO | str | os.PathLike) -> "GroundTruth":
        if isinstance(src, (str, os.PathLike)):
            with open(src, encoding="utf-8") as fh:
                return cls.read(fh)
        head = parse_header(src.readline())
        tree = TreeTopology(head["d"], head["h"])
        q, k = head["q"], head["k"]
        reps = [np.zeros((tree.level_size(j), k), dtype=letter_dtype(q)) for j in range(tree.h + 1)]
        section, extra = "nodes", {}
        tops, S, edge_rows, rewiring = {}, set(), [], []
        for lineno, line in enumerate(src, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                section, *rest = line[1:].split()
                if section == "params":
                    extra = dict(item.split("=", 1) for item in rest)
                continue
            if section == "nodes":
                node, letters, _ = parse_node_line(line, q, k, lineno)
                reps[node.level][node.index] = letters
            elif section == "labels":
                label, node = line.split()
                tops[int(label)] = NodeRef.parse(node)
            elif section == "S":
                S.add(NodeRef.parse(line))
            elif section == "edges":
                node, row = line.split()
                edge_rows.append([int(x) for x in row.split(",")])
            elif section == "rewiring":
                _, row = line.split()
                rewiring.append(np.array([int(x) for x in row.split(",")]))
        params = ModelParams(
            head["model"],
            q,
            k,
            float(extra.get("lam", 0.0)),
            regime=extra.get("regime", "random"),
            rewiring=tuple(rewiring) if rewiring else None,
            seed=int(extra.get("seed", 0)),
        )
        edges = None
        if edge_rows:
            rows = np.array(edge_rows, dtype=np.int64)
            tables, start = [], 0
            for j in range(1, tree.h + 1):
                n = tree.level_size(j)
                tables.append(rows[start : start + n])
                start += n
            edges = EdgeParams(head["model"], q, tuple(tables))
        return cls(tree, params, tuple(reps), edges, LabelAssignment.from_tops(tree, tops), frozenset(S))


# -- samplers ---------------------------------------------------------------------


def _root(tree: TreeTopology, params: ModelParams, root_rep) -> np.ndarray:
    if isinstance(root_rep, str):
        if root_rep != "uniform":
            raise ValueError(f"unknown root option {root_rep!r}")
        rng = node_rng(params.seed, 0, 0, "root")
        return rng.integers(params.q, size=params.k).astype(params.dtype)
    return check_representation(root_rep, params.q, params.k).copy()


def _noisy_copy(params: ModelParams, parent: np.ndarray, level: int, index: int) -> np.ndarray:
    u = node_rng(params.seed, level, index, "noise").random(params.k)
    return apply_channel(parent, params.lam, params.q, u)


def _require(params: ModelParams, variant: Variant) -> None:
    if params.variant is not variant:
        raise ValueError(f"expected a {variant.value} model, got {params.variant.value}")


def _sample(tree: TreeTopology, params: ModelParams, root_rep, transform) -> list[np.ndarray]:
    reps = [_root(tree, params, root_rep)[None, :]]
    for level in range(1, tree.h + 1):
        parents = reps[-1]
        out = np.empty((tree.level_size(level), params.k), dtype=params.dtype)
        for i in range(out.shape[0]):
            noisy = _noisy_copy(params, parents[i // tree.d], level, i)
            out[i] = transform(noisy, level, i)
        reps.append(out)
    return reps


def sample_iidm(tree: TreeTopology, params: ModelParams, root_rep="uniform") -> GroundTruth:
    _require(params, Variant.IIDM)
    reps = _sample(tree, params, root_rep, lambda noisy, level, i: noisy)
    return GroundTruth(tree, params, tuple(reps))


def sample_vrm(tree: TreeTopology, params: ModelParams, root_rep="uniform") -> GroundTruth:
    _require(params, Variant.VRM)
    edges = draw_edge_params(tree, params)
    reps = _sample(tree, params, root_rep, lambda noisy, level, i: edges.tables[level - 1][i][noisy])
    return GroundTruth(tree, params, tuple(reps), edges)


def fim_transform(noisy: np.ndarray, pair_table: np.ndarray, rewiring: np.ndarray, q: int) -> np.ndarray:
    """Rewire a noisy parent string and push every position pair through ``pair_table``."""
    codes = noisy[rewiring[0::2]].astype(np.int64) * q + noisy[rewiring[1::2]]
    mixed = pair_table[codes]
    out = np.empty_like(noisy)
    out[0::2] = mixed // q
    out[1::2] = mixed % q
    return out


def sample_fim(tree: TreeTopology, params: ModelParams, root_rep="uniform") -> GroundTruth:
    _require(params, Variant.FIM)
    if params.rewiring is None or len(params.rewiring) < tree.h:
        raise ValueError(f"FIM sampling needs {tree.h} rewiring permutations")
    edges = draw_edge_params(tree, params)
    q = params.q

    def transform(noisy, level, i):
        return fim_transform(noisy, edges.tables[level - 1][i], params.rewiring[level - 1], q)

    reps = _sample(tree, params, root_rep, transform)
    return GroundTruth(tree, params, tuple(reps), edges)


def sample(tree: TreeTopology, params: ModelParams, root_rep="uniform") -> GroundTruth:
    return {
        Variant.IIDM: sample_iidm,
        Variant.VRM: sample_vrm,
        Variant.FIM: sample_fim,
    }[params.variant](tree, params, root_rep)


# -- instances ----------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class InstanceSpec:
    h0: int
    h1: int

    def validate(self, tree: TreeTopology) -> None:
        if not 0 < self.h0 < self.h1 < tree.h:
            raise ValueError(
                f"instance levels need 0 < h0 < h1 < h, got h0={self.h0}, h1={self.h1}, h={tree.h}"
            )

    def n_labels(self, tree: TreeTopology) -> int:
        return tree.d**self.h0


def generate_instance(
    tree: TreeTopology, spec: InstanceSpec, seed: int
) -> tuple[LabelAssignment, frozenset]:
    """Draw labels at level ``h0`` and the labeled leaf set ``S``.

    The ``d**h0`` nodes at level ``h0`` receive labels ``0..d**h0 - 1`` in a
    random order. Under each of them two level-``h1`` descendants are picked
    from two different children, so their deepest common ancestor is exactly
    that node; all leaves below the two picks join ``S``.
    """
    spec.validate(tree)
    rng = stream(seed, "instance")
    n_top = tree.level_size(spec.h0)
    order = rng.permutation(n_top)
    tops = {int(order[i]): NodeRef(spec.h0, i) for i in range(n_top)}
    below = tree.d ** (spec.h1 - spec.h0 - 1)
    S = set()
    for i in range(n_top):
        kids = rng.choice(tree.d, size=2, replace=False)
        for c in kids:
            child_index = tree.d * i + int(c)
            pick = NodeRef(spec.h1, child_index * below + int(rng.integers(below)))
            S.update(tree.leaves_under(pick))
    return LabelAssignment.from_tops(tree, tops), frozenset(S)


def make_dataset(truth: GroundTruth, tree: TreeTopology | None = None) -> Dataset:
    tree = tree or truth.tree
    leaves = truth.reps[tree.h]
    lab_nodes, lab_ids, unl_nodes = [], [], []
    for i in range(tree.n_leaves):
        node = NodeRef(tree.h, i)
        if node in truth.S:
            label = truth.labels.leaf_label(node)
            if label is None:
                raise ValueError(f"labeled leaf {node} carries no label")
            lab_nodes.append(node)
            lab_ids.append(label)
        else:
            unl_nodes.append(node)
    p = truth.params
    return Dataset(
        d=tree.d,
        h=tree.h,
        q=p.q,
        k=p.k,
        model=p.variant,
        labeled_nodes=tuple(lab_nodes),
        labeled_reps=leaves[[n.index for n in lab_nodes]],
        labels=np.array(lab_ids, dtype=np.int64),
        unlabeled_nodes=tuple(unl_nodes),
        unlabeled_reps=leaves[[n.index for n in unl_nodes]],
    )
