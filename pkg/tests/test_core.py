import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deeptree.core import (
    Dataset,
    LabelAssignment,
    ModelParams,
    NodeRef,
    TreeTopology,
    build_tree,
    check_rewiring,
    graph_distance,
    validate_labeling,
)


@pytest.mark.parametrize("d,h,leaves,nodes", [(2, 3, 8, 15), (3, 1, 3, 4), (4, 2, 16, 21)])
def test_tree_sizes(d, h, leaves, nodes):
    tree = build_tree(d, h)
    assert tree.n_leaves == leaves
    assert tree.n_nodes == nodes
    assert len(tree.leaves()) == leaves
    assert sum(1 for _ in tree.nodes()) == nodes


@pytest.mark.parametrize("d,h", [(1, 5), (0, 2), (2, 0)])
def test_tree_rejects_degenerate(d, h):
    with pytest.raises(ValueError):
        build_tree(d, h)


def test_tree_rejects_oversized():
    with pytest.raises(ValueError):
        build_tree(2, 40)


def test_root_children():
    tree = build_tree(3, 1)
    assert tree.children(tree.root) == [NodeRef(1, 0), NodeRef(1, 1), NodeRef(1, 2)]
    assert all(tree.is_leaf(c) for c in tree.children(tree.root))


def test_distance_examples():
    tree = build_tree(2, 3)
    assert graph_distance(tree, NodeRef(3, 0), NodeRef(3, 1)) == 2
    assert graph_distance(tree, tree.root, NodeRef(3, 5)) == 3
    assert graph_distance(tree, NodeRef(3, 0), NodeRef(3, 7)) == 6
    with pytest.raises(ValueError):
        graph_distance(tree, NodeRef(4, 0), NodeRef(3, 0))


def _bfs_distance(tree, u, v):
    # independent oracle: breadth-first search over an explicit adjacency list
    adj = {}
    for n in tree.nodes():
        for c in tree.children(n):
            adj.setdefault(n, []).append(c)
            adj.setdefault(c, []).append(n)
    seen, frontier, dist = {u}, [u], 0
    while frontier:
        if v in frontier:
            return dist
        nxt = []
        for n in frontier:
            for m in adj.get(n, []):
                if m not in seen:
                    seen.add(m)
                    nxt.append(m)
        frontier, dist = nxt, dist + 1
    raise AssertionError("disconnected")


@st.composite
def tree_and_nodes(draw, count=3):
    d = draw(st.integers(2, 4))
    h = draw(st.integers(1, 4))
    tree = build_tree(d, h)
    nodes = []
    for _ in range(count):
        level = draw(st.integers(0, h))
        nodes.append(NodeRef(level, draw(st.integers(0, tree.level_size(level) - 1))))
    return tree, nodes


@given(tree_and_nodes())
def test_distance_triangle_and_parent_step(args):
    tree, (u, v, w) = args
    duv = graph_distance(tree, u, v)
    assert duv == graph_distance(tree, v, u)
    assert duv <= graph_distance(tree, u, w) + graph_distance(tree, w, v)
    parent = tree.parent(v)
    if parent is not None:
        assert abs(graph_distance(tree, u, parent) - duv) == 1


@given(tree_and_nodes(count=2))
def test_distance_matches_bfs(args):
    tree, (u, v) = args
    assert graph_distance(tree, u, v) == _bfs_distance(tree, u, v)


@given(tree_and_nodes(count=1))
def test_parent_child_round_trip(args):
    tree, (n,) = args
    parent = tree.parent(n)
    if parent is None:
        assert n == tree.root
    else:
        assert n in tree.children(parent)
    for c in tree.children(n):
        assert tree.parent(c) == n


def test_mca_and_ancestor():
    tree = build_tree(2, 3)
    assert tree.mca([NodeRef(3, 0), NodeRef(3, 1)]) == NodeRef(2, 0)
    assert tree.mca([NodeRef(3, 0), NodeRef(3, 3)]) == NodeRef(1, 0)
    assert tree.mca([NodeRef(3, 0), NodeRef(3, 7)]) == tree.root
    assert tree.ancestor(NodeRef(3, 6), 1) == NodeRef(1, 1)
    assert tree.is_ancestor(NodeRef(1, 1), NodeRef(3, 6))
    assert not tree.is_ancestor(NodeRef(1, 0), NodeRef(3, 6))


def test_labeling_examples():
    tree = build_tree(2, 2)
    root_only = LabelAssignment.from_tops(tree, {5: tree.root})
    assert validate_labeling(tree, root_only).ok
    assert validate_labeling(tree, LabelAssignment.empty()).ok
    siblings = LabelAssignment({NodeRef(2, 0): {1}, NodeRef(2, 1): {1}})
    report = validate_labeling(tree, siblings)
    assert not report.ok and report.label == 1


def test_labeling_rejects_non_inherited():
    tree = build_tree(2, 2)
    labels = LabelAssignment({NodeRef(1, 0): {3}, NodeRef(2, 0): {3}})
    report = validate_labeling(tree, labels)
    assert not report.ok
    assert report.nodes == (NodeRef(1, 0), NodeRef(2, 1))


@given(tree_and_nodes(count=3))
def test_labeling_from_tops_is_valid(args):
    tree, tops = args
    labels = LabelAssignment.from_tops(tree, dict(enumerate(tops)))
    assert validate_labeling(tree, labels).ok
    assert labels.tops() == dict(enumerate(tops))


def test_leaf_label_most_specific():
    tree = build_tree(2, 2)
    labels = LabelAssignment.from_tops(tree, {0: tree.root, 1: NodeRef(1, 1)})
    assert labels.leaf_label(NodeRef(2, 0)) == 0
    assert labels.leaf_label(NodeRef(2, 3)) == 1


@pytest.mark.parametrize(
    "perm,ok",
    [([2, 0, 3, 1], True), ([1, 0, 2, 3], False), ([0, 1, 3, 2], False), ([0, 2, 1, 3], True)],
)
def test_rewiring_condition(perm, ok):
    if ok:
        check_rewiring(perm, 4)
    else:
        with pytest.raises(ValueError):
            check_rewiring(perm, 4)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(variant="IIDM", q=1, k=4, lam=0.5),
        dict(variant="IIDM", q=2, k=4, lam=1.5),
        dict(variant="FIM", q=2, k=3, lam=0.5),
        dict(variant="IIDM", q=2, k=0, lam=0.5),
    ],
)
def test_model_params_validation(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def _small_dataset():
    return Dataset(
        d=2, h=1, q=3, k=2, model="IIDM",
        labeled_nodes=(NodeRef(1, 1),), labeled_reps=np.array([[2, 0]]), labels=np.array([4]),
        unlabeled_nodes=(NodeRef(1, 0),), unlabeled_reps=np.array([[1, 1]]),
    )


def test_dataset_text_round_trip():
    data = _small_dataset()
    text = data.to_text()
    assert text.splitlines()[0] == "HTL1 d=2 h=1 q=3 k=2 model=IIDM"
    again = Dataset.from_text(text)
    assert again.to_text() == text
    (node, rep, label), = again.labeled
    assert node == NodeRef(1, 1) and label == 4
    np.testing.assert_array_equal(rep, [2, 0])


@pytest.mark.parametrize(
    "text",
    [
        "HTL1 d=2 h=1 q=3 k=2 model=IIDM\n1:0 1,1 -\n",  # missing a leaf
        "HTL1 d=2 h=1 q=3 k=2 model=IIDM\n1:0 1,3 -\n1:1 0,0 -\n",  # letter out of range
        "HTL1 d=2 h=1 q=3 k=2 model=IIDM\n1:0 1 -\n1:1 0,0 -\n",  # wrong length
        "XX d=2\n",
    ],
)
def test_dataset_rejects_bad_files(text):
    with pytest.raises(ValueError):
        Dataset.read(io.StringIO(text))
