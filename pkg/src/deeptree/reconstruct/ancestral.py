"""Exact per-coordinate belief propagation from window leaves to the window root.

Messages only vary over letters that actually occur among the window's
leaves at a coordinate; every other letter shares one value. The kernel
keeps one slot per occurring letter plus a single slot for "any other
letter", which is exact and cheap when ``q`` exceeds the window size.
"""
from __future__ import annotations

import numba
import numpy as np

TIE_RTOL = 1e-12


@numba.njit(cache=True, nogil=True)
def _bp_kernel(leaves, d, mu, lam, q, want_posterior):
    m, k = leaves.shape
    depth = 0
    size = 1
    while size < m:
        size *= d
        depth += 1
    width = min(m, q) + 1
    slot_of = np.full(q, -1, np.int64)
    letters = np.empty(width, np.int64)
    msg = np.empty((m, width))
    nxt = np.empty((m, width))
    est = np.empty(k, np.int64)
    conf = np.empty(k)
    post = np.zeros((k if want_posterior else 1, q))
    stay = (1.0 - lam) / q
    for c in range(k):
        u = 0
        for i in range(m):
            a = leaves[i, c]
            if slot_of[a] < 0:
                slot_of[a] = u
                letters[u] = a
                u += 1
        other = q - u
        for i in range(m):
            base = (1.0 - mu[i]) / q
            for s in range(u + 1):
                msg[i, s] = base
            msg[i, slot_of[leaves[i, c]]] += mu[i]
        n = m
        for _ in range(depth):
            # push every node's message through its parent edge
            for i in range(n):
                tot = 0.0
                for s in range(u):
                    tot += msg[i, s]
                tot += other * msg[i, u]
                for s in range(u + 1):
                    msg[i, s] = lam * msg[i, s] + stay * tot
            n //= d
            for p in range(n):
                top = 0.0
                for s in range(u + 1):
                    v = 1.0
                    for j in range(d):
                        v *= msg[p * d + j, s]
                    nxt[p, s] = v
                    if v > top:
                        top = v
                if top <= 0.0:
                    raise ValueError("non-normalizable message: leaves contradict a noiseless channel")
                for s in range(u + 1):
                    nxt[p, s] /= top
            for p in range(n):
                for s in range(u + 1):
                    msg[p, s] = nxt[p, s]
        z = 0.0
        for s in range(u):
            z += msg[0, s]
        z += other * msg[0, u]
        best = -1.0
        for s in range(u + 1):
            if (s < u or other > 0) and msg[0, s] > best:
                best = msg[0, s]
        cut = best * (1.0 - TIE_RTOL)
        pick = q
        for s in range(u):
            if msg[0, s] >= cut and letters[s] < pick:
                pick = letters[s]
        if other > 0 and msg[0, u] >= cut:
            for a in range(q):
                if slot_of[a] < 0:
                    if a < pick:
                        pick = a
                    break
        est[c] = pick
        conf[c] = best / z
        if want_posterior:
            for a in range(q):
                post[c, a] = msg[0, u] / z
            for s in range(u):
                post[c, letters[s]] = msg[0, s] / z
        for s in range(u):
            slot_of[letters[s]] = -1
    return est, conf, post


def ancestral_bp(
    leaves: np.ndarray,
    d: int,
    mu,
    lam: float,
    q: int,
    posterior: bool = False,
):
    """Maximum a posteriori root letters of a complete ``d``-ary window.

    ``leaves`` has shape ``(d**depth, k)`` in tree order. Each leaf estimate
    is modeled as the true letter with probability ``mu`` and a uniform
    letter otherwise; this extra noise is an additional edge below the leaf.
    The root prior is uniform and ties go to the smallest letter.

    Returns ``(estimate, predicted_accuracy, posterior_or_None)`` where the
    predicted accuracy is the mean posterior mass of the chosen letter.
    """
    leaves = np.ascontiguousarray(leaves)
    m = leaves.shape[0]
    depth = 0
    while d**depth < m:
        depth += 1
    if d**depth != m:
        raise ValueError(f"{m} leaves do not form a complete {d}-ary window")
    if not 0.0 <= lam < 1.0 + 1e-15:
        raise ValueError("channel parameter must lie in [0, 1]")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (m,)).copy()
    if np.any(mu < 0) or np.any(mu > 1):
        raise ValueError("leaf qualities must lie in [0, 1]")
    if leaves.size and (leaves.min() < 0 or leaves.max() >= q):
        raise ValueError(f"leaf letters must lie in [0, {q})")
    est, conf, post = _bp_kernel(leaves.astype(np.int64), d, mu, float(lam), int(q), posterior)
    return est, float(conf.mean()) if conf.size else 1.0, (post if posterior else None)


def quality_from_accuracy(acc: float, q: int) -> float:
    """Convert a per-letter accuracy into the equivalent copy probability."""
    return float(np.clip((acc - 1.0 / q) / (1.0 - 1.0 / q), 0.0, 1.0))
