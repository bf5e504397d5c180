import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeptree.core import LabelAssignment, NodeRef, TreeTopology
from deeptree.reconstruct.labels import UNLABELED, Hierarchy, is_well_represented, propagate_labels
from deeptree.samplers import InstanceSpec, generate_instance


def true_nested(tree, node=None):
    node = node or tree.root
    if tree.is_leaf(node):
        return node.index
    return [true_nested(tree, c) for c in tree.children(node)]


def test_well_represented_examples():
    tree = TreeTopology(2, 3)
    v = NodeRef(1, 0)
    labels = LabelAssignment.from_tops(tree, {0: v})
    assert not is_well_represented(0, [NodeRef(3, 0)], labels, tree)
    assert not is_well_represented(0, [NodeRef(3, 0), NodeRef(3, 1)], labels, tree)
    assert is_well_represented(0, [NodeRef(3, 0), NodeRef(3, 2)], labels, tree)
    assert not is_well_represented(0, [NodeRef(3, 4), NodeRef(3, 6)], labels, tree)
    assert not is_well_represented(9, [NodeRef(3, 0)], labels, tree)


def test_labeled_leaf_top_is_well_represented():
    tree = TreeTopology(2, 2)
    labels = LabelAssignment.from_tops(tree, {4: NodeRef(2, 3)})
    assert is_well_represented(4, [NodeRef(2, 3)], labels, tree)


def test_hierarchy_navigation():
    hier = Hierarchy([[0, 1], [2, [3, 4]]])
    assert len(hier) == 9
    assert hier.leaves[0] == [0, 1, 2, 3, 4]
    assert hier.depth[hier.leaf_node[3]] == 3
    assert hier.leaves[hier.mca([3, 4])] == [3, 4]
    assert hier.mca([0, 4]) == 0
    assert len(hier.internal()) == 4
    with pytest.raises(ValueError):
        hier.mca([])


def test_single_labeled_leaf_claims_only_itself():
    out = propagate_labels([[0, 1], [2, 3]], {2: 7})
    assert out == {0: UNLABELED, 1: UNLABELED, 2: 7, 3: UNLABELED}


def test_deepest_claim_wins():
    # hand-enumerated: label 1 spans the root, 3 and 4 a half each, 2 one leaf
    nested = [[[0, 1], [2, 3]], [[4, 5], [6, 7]]]
    out = propagate_labels(nested, {0: 1, 4: 1, 2: 2, 1: 3, 3: 3, 5: 4, 6: 4})
    assert out == {0: 3, 1: 3, 2: 2, 3: 3, 4: 4, 5: 4, 6: 4, 7: 4}


def test_equal_depth_claims_unlabel():
    # interleaved labels in a wrong tree: both meet only at the root
    out = propagate_labels([[0, 1], [2, 3]], {0: 1, 2: 1, 1: 2, 3: 2})
    assert out == {0: UNLABELED, 1: UNLABELED, 2: UNLABELED, 3: UNLABELED}


@settings(max_examples=30)
@given(st.integers(2, 4), st.integers(3, 5), st.integers(0, 2**32))
def test_instance_on_true_tree_recovers_every_label(d, h, seed):
    tree = TreeTopology(d, h)
    labels, S = generate_instance(tree, InstanceSpec(1, min(2 + seed % 2, h - 1)), seed)
    labeled = {n.index: labels.leaf_label(n) for n in S}
    out = propagate_labels(true_nested(tree), labeled)
    assert out == {n.index: labels.leaf_label(n) for n in tree.leaves()}
