import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeptree.core import ModelParams, NodeRef, TreeTopology
from deeptree.reconstruct.distances import agreement_matrix, similarity
from deeptree.reconstruct.structure import ReconstructionFailure, local_structure
from deeptree.samplers import sample_iidm


def true_similarity(tree, lam, order):
    leaves = [NodeRef(tree.h, i) for i in order]
    return np.array([[lam ** tree.distance(a, b) for b in leaves] for a in leaves])


def true_groups(tree, order, depth):
    # the true depth-level subtrees, as sets of positions in ``order``
    top = tree.h - depth
    groups = {}
    for pos, i in enumerate(order):
        groups.setdefault(tree.ancestor(NodeRef(tree.h, i), top), set()).add(pos)
    return sorted(map(frozenset, groups.values()), key=min)


@settings(max_examples=40)
@given(st.integers(2, 4), st.integers(1, 3), st.floats(0.3, 0.9), st.randoms(use_true_random=False))
def test_exact_similarities_give_true_clusters(d, depth, lam, rnd):
    tree = TreeTopology(d, depth + 1)
    order = list(range(tree.n_leaves))
    rnd.shuffle(order)
    ls = local_structure(true_similarity(tree, lam, order), d, depth, lam)
    assert sorted(map(frozenset, ls.groups), key=min) == true_groups(tree, order, depth)
    assert all(m > 0 for m in ls.margins)
    # nested output repeats the groups with the rounds made explicit
    flat = lambda x: [y for z in x for y in flat(z)] if isinstance(x, list) else [x]
    assert [flat(n) for n in ls.nested] == ls.groups


def test_pairs_at_distance_two_become_siblings():
    tree = TreeTopology(2, 3)
    order = [5, 0, 7, 2, 1, 4, 6, 3]
    ls = local_structure(true_similarity(tree, 0.5, order), 2, 1, 0.5)
    for a, b in ls.groups:
        assert tree.distance(NodeRef(3, order[a]), NodeRef(3, order[b])) == 2


def test_groups_listed_in_tree_order():
    tree = TreeTopology(3, 2)
    ls = local_structure(true_similarity(tree, 0.6, range(9)), 3, 1, 0.6)
    assert ls.groups == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
    assert ls.clusters == [ls.groups]


def test_size_mismatch_is_a_failure():
    with pytest.raises(ReconstructionFailure) as err:
        local_structure(np.eye(6), 4, 1, 0.5)
    assert err.value.stage == "local-structure"


def test_inconsistent_similarities_have_negative_margin():
    # three mutually close nodes and one isolated: no pairing is a complete binary split
    S = np.full((4, 4), 0.9)
    S[3, :3] = S[:3, 3] = -1.0
    np.fill_diagonal(S, 1.0)
    ls = local_structure(S, 2, 1, 0.5)
    assert ls.margins[0] < 0


def test_non_square_rejected():
    with pytest.raises(ValueError):
        local_structure(np.zeros((4, 3)), 2, 1, 0.5)


@pytest.mark.slow
def test_sampled_clusters_match_truth():
    # d=2, h=4, q=4, lambda=0.9, k=5000: sibling pairs and grandparent groups from data
    tree = TreeTopology(2, 4)
    hits = 0
    for seed in range(100):
        truth = sample_iidm(tree, ModelParams("IIDM", 4, 5000, 0.9, seed=seed))
        X = truth.leaf_reps
        S = similarity(1 - agreement_matrix(X) / X.shape[1], 4)
        ls = local_structure(S, 2, 2, 0.9)
        hits += sorted(map(frozenset, ls.groups), key=min) == true_groups(tree, range(16), 2)
    assert hits >= 99
