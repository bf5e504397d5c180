import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeptree.baselines import (
    BaselineKind,
    classify,
    default_scheme,
    local_classify,
    local_classify_batch,
    path_match_probability,
    shallow_classify,
    trivial_classify,
)
from deeptree.compression import CompressionScheme, compress
from deeptree.core import ModelParams, TreeTopology
from deeptree.reconstruct.distances import cross_agreement
from deeptree.reconstruct.labels import UNLABELED
from deeptree.samplers import InstanceSpec, generate_instance, make_dataset, sample_iidm
from deeptree.scoring import label_accuracy
from test_compression import datasets, star_dataset

LOCAL = [BaselineKind.LOCAL_NN, BaselineKind.LOCAL_ML]


def instance(d, h, q, k, lam, seed, spec):
    tree = TreeTopology(d, h)
    truth = sample_iidm(tree, ModelParams("IIDM", q, k, lam, seed=seed))
    labels, S = generate_instance(tree, InstanceSpec(*spec), seed)
    truth = truth.with_instance(labels, S)
    return make_dataset(truth), truth


@pytest.mark.parametrize("kind", LOCAL)
def test_local_copy_of_labeled_rep(kind):
    rng = np.random.default_rng(0)
    reps = rng.integers(0, 4, (5, 30))
    labeled = [(reps[i], 10 + i) for i in range(5)]
    assert local_classify(reps[3].copy(), labeled, kind, lam=0.99, q=4, depth=2) == 13


@pytest.mark.parametrize("kind", LOCAL)
def test_local_equidistant_takes_smallest_label(kind):
    labeled = [(np.array([1, 0, 0]), 9), (np.array([0, 1, 0]), 4), (np.array([0, 0, 1]), 6)]
    assert local_classify(np.array([0, 0, 0]), labeled, kind, lam=0.5, q=2, depth=4) == 4


def test_local_needs_examples():
    with pytest.raises(ValueError):
        local_classify(np.zeros(3), [], BaselineKind.LOCAL_NN, 0.5, 2, 2)
    assert local_classify_batch(np.zeros((2, 3)), np.zeros((0, 3)), [], "LOCAL_NN", 0.5, 2, 2).tolist() == [
        UNLABELED,
        UNLABELED,
    ]


def test_local_ml_sums_over_examples():
    # one close example of label 1 against two moderately close examples of label 0
    rep = np.zeros(10, dtype=int)
    close = rep.copy()
    close[:1] = 1
    mid = rep.copy()
    mid[:3] = 1
    labeled = [(close, 1), (mid, 0), (mid.copy(), 0)]
    assert local_classify(rep, labeled, "LOCAL_NN", 0.5, 2, 2) == 1
    p_same = path_match_probability(0.5, 2, 2)
    log_same, log_diff = np.log(p_same), np.log(1 - p_same)
    score = {1: 9 * log_same + log_diff, 0: 2 * (7 * log_same + 3 * log_diff)}
    assert local_classify(rep, labeled, "LOCAL_ML", 0.5, 2, 2) == max(score, key=score.get)


@pytest.mark.parametrize("kind", LOCAL)
def test_local_is_local(kind):
    data, _ = instance(2, 5, 4, 60, 0.8, 1, (1, 3))
    before = classify(data, kind, lam=0.8, depth=4)
    altered = data.unlabeled_reps.copy()
    altered[1:] = (altered[1:] + 1) % 4
    after = local_classify_batch(altered, data.labeled_reps, data.labels, kind, 0.8, 4, 4)
    assert after[0] == before[0]


def test_shared_agreement_gives_same_predictions():
    data, _ = instance(2, 5, 4, 60, 0.8, 1, (1, 3))
    agree = cross_agreement(data.unlabeled_reps, data.labeled_reps)
    for kind in LOCAL:
        np.testing.assert_array_equal(
            classify(data, kind, lam=0.8, depth=4, agree=agree), classify(data, kind, lam=0.8, depth=4)
        )


def test_local_ml_needs_model():
    data, _ = instance(2, 4, 4, 20, 0.8, 1, (1, 2))
    with pytest.raises(ValueError):
        classify(data, "LOCAL_ML")


def test_shallow_identical_histograms_take_smallest_label():
    data = star_dataset([[0, 1], [0, 1]], [5, 3], [[1, 0], [0, 1]], q=2)
    c = compress(data, CompressionScheme.canonical(2))
    assert shallow_classify(c).tolist() == [3, 3]


def test_shallow_matching_histogram_wins():
    rep = [2, 0, 1, 1]
    data = star_dataset([rep, rep, [0, 1, 2, 0], [1, 2, 0, 2], [2, 1, 0, 1]], [8, 8, 2, 2, 2], [rep], q=3)
    for kind, scheme in [("SHALLOW_NB", CompressionScheme.canonical(4)), ("SHALLOW_S", default_scheme("SHALLOW_S", 4))]:
        assert shallow_classify(compress(data, scheme), kind).tolist() == [8]


def test_shallow_nb_needs_canonical_scheme():
    data = star_dataset([[0, 1]], [1], [[1, 0]], q=2)
    with pytest.raises(ValueError):
        shallow_classify(compress(data, CompressionScheme.full(2)), "SHALLOW_NB")
    with pytest.raises(ValueError):
        shallow_classify(compress(data, CompressionScheme.full(2)), "LOCAL_NN")


def test_shallow_scores_follow_smoothed_formula():
    data = star_dataset([[0, 1], [1, 1], [0, 0]], [0, 0, 1], [[0, 1]], q=2)
    c = compress(data, CompressionScheme.canonical(2))
    from deeptree.baselines import shallow_scores

    got = shallow_scores(c)[0]
    want0 = np.log((1 + 1) / (2 + 2)) + np.log((2 + 1) / (2 + 2))
    want1 = np.log((1 + 1) / (1 + 2)) + np.log((0 + 1) / (1 + 2))
    np.testing.assert_allclose(got, [want0, want1])


@settings(max_examples=30)
@given(datasets(), st.randoms(use_true_random=False))
def test_shallow_ignores_labeled_order(data, rnd):
    order = list(range(len(data.labels)))
    rnd.shuffle(order)
    shuffled = star_dataset(data.labeled_reps[order], data.labels[order], data.unlabeled_reps, data.q)
    for kind in ("SHALLOW_NB", "SHALLOW_S", "TRIVIAL"):
        np.testing.assert_array_equal(classify(data, kind), classify(shuffled, kind))


def test_trivial_rules():
    data = star_dataset([[0], [1], [1], [0]], [3, 2, 3, 2], [[0]], q=2)
    assert trivial_classify(compress(data, CompressionScheme.canonical(1))) == 2
    single = star_dataset([[0], [1]], [7, 7], [[0]], q=2)
    assert classify(single, "TRIVIAL").tolist() == [7]
    empty = star_dataset(np.zeros((0, 1), int), [], [[0], [1]], q=2)
    assert classify(empty, "TRIVIAL").tolist() == [UNLABELED, UNLABELED]
    assert classify(empty, "SHALLOW_NB").tolist() == [UNLABELED, UNLABELED]


def test_trivial_accuracy_concentrates():
    # balanced instances: the constant guess is right on 1/d of the unlabeled leaves
    d, trials = 3, 60
    accs = []
    for seed in range(trials):
        data, truth = instance(d, 4, 2, 4, 0.5, seed, (1, 2))
        accs.append(label_accuracy(classify(data, "TRIVIAL"), data, truth))
    n = trials * len(data.unlabeled_nodes)
    p = 1 / d
    assert abs(np.mean(accs) - p) <= 3 * np.sqrt(p * (1 - p) / n) + 1 / len(data.unlabeled_nodes)


@pytest.mark.slow
@pytest.mark.parametrize("kind", LOCAL)
def test_local_accuracy_at_chance_deep_below_labels(kind):
    # d=2, h=12, lambda=0.6, q=4, k=100 with labels two levels below the top labels
    accs = []
    for seed in range(200):
        data, truth = instance(2, 12, 4, 100, 0.6, seed, (1, 3))
        accs.append(label_accuracy(classify(data, kind, lam=0.6, depth=18), data, truth))
    assert abs(np.mean(accs) - 0.5) <= 0.05


@pytest.mark.slow
def test_shallow_accuracy_below_census_threshold():
    # d*lambda^2 = 0.81 < 1: letter histograms carry little about the top labels
    accs = []
    for seed in range(200):
        data, truth = instance(4, 6, 8, 256, 0.45, seed, (1, 2))
        accs.append(label_accuracy(classify(data, "SHALLOW_NB"), data, truth))
    assert abs(np.mean(accs) - 0.25) <= 0.05
