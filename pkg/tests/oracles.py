"""Independent brute-force references used by the tests.

Each routine enumerates every hidden configuration explicitly; none of them
shares code with the package.
"""
import collections
import itertools

import numpy as np


def channel_matrix(lam, q):
    return lam * np.eye(q) + (1 - lam) / q


def bp_posterior_bruteforce(patterns, d, depth, mu, lam, q):
    """Root posterior ``(P, q)`` for each row of leaf observations ``patterns``.

    The window is the complete ``d``-ary tree of the given depth; every
    observed leaf is its true letter passed through one more symmetric channel
    with copy probability ``mu[i]``. Hidden variables are the root and the
    internal nodes; each true leaf is summed out through the composed channel.
    """
    patterns = np.atleast_2d(patterns)
    m = d**depth
    mu = np.broadcast_to(np.asarray(mu, float), (m,))
    if depth == 0:
        like = channel_matrix(mu[0], q)[:, patterns[:, 0]].T
        return like / like.sum(axis=1, keepdims=True)
    # level-order hidden nodes: root, then internal levels 1..depth-1
    n_hidden = sum(d**j for j in range(depth))
    first_of_level = [sum(d**i for i in range(j)) for j in range(depth + 1)]
    edge = channel_matrix(lam, q)
    post = np.zeros((patterns.shape[0], q))
    for config in itertools.product(range(q), repeat=n_hidden):
        w = np.full(patterns.shape[0], 1.0 / q)
        for j in range(1, depth):
            for i in range(d**j):
                node = first_of_level[j] + i
                parent = first_of_level[j - 1] + i // d
                w = w * edge[config[parent], config[node]]
        for leaf in range(m):
            parent = first_of_level[depth - 1] + leaf // d
            obs = channel_matrix(lam * mu[leaf], q)[config[parent]]
            w = w * obs[patterns[:, leaf]]
        post[:, config[0]] += w
    return post / post.sum(axis=1, keepdims=True)


def census_distribution(d, h, q, lam, root):
    """Exact law of the sorted leaf census below a fixed root letter (one coordinate)."""
    edge = channel_matrix(lam, q)
    levels = [{(root,): 1.0}]
    for _ in range(h):
        nxt = collections.defaultdict(float)
        for letters, p in levels[-1].items():
            for kids in itertools.product(range(q), repeat=d * len(letters)):
                pk = p
                for i, c in enumerate(kids):
                    pk *= edge[letters[i // d], c]
                nxt[kids] += pk
        levels.append(nxt)
    census = collections.defaultdict(float)
    for letters, p in levels[-1].items():
        census[tuple(np.bincount(letters, minlength=q))] += p
    return dict(census)


def exact_census_tv(d, h, q, lam, root_a, root_b):
    pa = census_distribution(d, h, q, lam, root_a)
    pb = census_distribution(d, h, q, lam, root_b)
    keys = set(pa) | set(pb)
    return 0.5 * sum(abs(pa.get(x, 0.0) - pb.get(x, 0.0)) for x in keys)


def all_patterns(q, m):
    return np.array(list(itertools.product(range(q), repeat=m)), dtype=np.int64).reshape(-1, m)
