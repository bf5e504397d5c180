import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deeptree.reconstruct.ancestral import ancestral_bp, quality_from_accuracy
from oracles import all_patterns, bp_posterior_bruteforce, exact_census_tv


def bp_posteriors(patterns, d, mu, lam, q):
    # one coordinate per pattern: the window's k axis carries the patterns
    _, _, post = ancestral_bp(patterns.T.copy(), d, mu, lam, q, posterior=True)
    return post


def test_oracle_census_tv_one_level():
    # both children copy the root with probability 0.8
    assert exact_census_tv(2, 1, 2, 0.6, 0, 1) == pytest.approx(0.6)


def test_exhaustive_two_level_binary():
    patterns = all_patterns(2, 4)
    got = bp_posteriors(patterns, 2, 0.8, 0.6, 2)
    want = bp_posterior_bruteforce(patterns, 2, 2, 0.8, 0.6, 2)
    np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)


@pytest.mark.parametrize("d,depth", [(2, 0), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
@pytest.mark.parametrize("q", [2, 3])
def test_posterior_matches_enumeration(d, depth, q):
    rng = np.random.default_rng(d * 100 + depth * 10 + q)
    m = d**depth
    mu = rng.uniform(0.3, 1.0, m)
    lam = 0.7
    patterns = all_patterns(q, m) if q**m <= 20_000 else rng.integers(0, q, (1000, m))
    got = bp_posteriors(patterns, d, mu, lam, q)
    want = bp_posterior_bruteforce(patterns, d, depth, mu, lam, q)
    np.testing.assert_allclose(got, want, atol=1e-10, rtol=0)
    np.testing.assert_allclose(got.sum(axis=1), 1.0, atol=1e-12)


@given(st.integers(2, 9), st.integers(0, 8))
def test_unanimous_leaves(q, a):
    a %= q
    est, _, _ = ancestral_bp(np.full((3, 5), a), 3, 1.0, 0.8, q)
    assert (est == a).all()


def test_single_leaf_posterior_is_channel_row():
    lam2 = 0.6
    _, _, post = ancestral_bp(np.array([[2, 0]]), 2, lam2, 0.9, 4, posterior=True)
    row = lam2 * np.eye(4)[2] + (1 - lam2) / 4
    np.testing.assert_allclose(post[0], row, atol=1e-15)
    est, _, _ = ancestral_bp(np.array([[2, 0]]), 2, lam2, 0.9, 4)
    assert est.tolist() == [2, 0]


def test_ties_go_to_smallest_letter():
    # two leaves disagree symmetrically: letters 1 and 3 are equally likely
    est, _, post = ancestral_bp(np.array([[3], [1]]), 2, 1.0, 0.5, 5, posterior=True)
    assert post[0, 1] == pytest.approx(post[0, 3])
    assert est[0] == 1
    # without information every letter ties
    est, _, _ = ancestral_bp(np.array([[4], [2]]), 2, 0.0, 0.5, 5)
    assert est[0] == 0


def test_large_alphabet_matches_dense_enumeration():
    # with q far above the window size the compact slots must still be exact
    rng = np.random.default_rng(0)
    q, d, depth = 6, 2, 2
    patterns = rng.integers(0, q, (200, 4))
    got = bp_posteriors(patterns, d, [0.9, 0.5, 1.0, 0.7], 0.55, q)
    want = bp_posterior_bruteforce(patterns, d, depth, [0.9, 0.5, 1.0, 0.7], 0.55, q)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_noiseless_contradiction_is_guarded():
    with pytest.raises(ValueError):
        ancestral_bp(np.array([[0], [1]]), 2, 1.0, 1.0, 2)


@pytest.mark.parametrize(
    "leaves,d", [(np.zeros((3, 2), int), 2), (np.zeros((5, 2), int), 2), (np.full((2, 2), 4), 2)]
)
def test_rejects_bad_windows(leaves, d):
    with pytest.raises(ValueError):
        ancestral_bp(leaves, d, 1.0, 0.5, 4)


def test_predicted_accuracy_is_mean_map_mass():
    rng = np.random.default_rng(3)
    leaves = rng.integers(0, 3, (4, 50))
    est, acc, post = ancestral_bp(leaves, 2, 0.8, 0.6, 3, posterior=True)
    assert acc == pytest.approx(post[np.arange(50), est].mean())


@pytest.mark.parametrize("acc,q,want", [(1.0, 4, 1.0), (0.25, 4, 0.0), (0.625, 4, 0.5), (0.1, 4, 0.0)])
def test_quality_from_accuracy(acc, q, want):
    assert quality_from_accuracy(acc, q) == pytest.approx(want)
