"""Hamming distances, relabeling-invariant distances and tree-distance estimates."""
from __future__ import annotations

import dataclasses
import functools
import itertools
import math

import numba
import numpy as np
from scipy.optimize import linear_sum_assignment

# Exhaustive search over relabelings up to this alphabet size; matching above it.
ENUMERATE_MAX_Q = 6
BLOCK = 64


@numba.njit(cache=True, nogil=True)
def _agreement_matrix(X, block):
    n, k = X.shape
    out = np.zeros((n, n), np.int32)
    for i0 in range(0, n, block):
        for j0 in range(i0, n, block):
            for i in range(i0, min(i0 + block, n)):
                xi = X[i]
                for j in range(max(j0, i + 1), min(j0 + block, n)):
                    xj = X[j]
                    s = 0
                    for c in range(k):
                        s += xi[c] == xj[c]
                    out[i, j] = s
                    out[j, i] = s
        for i in range(i0, min(i0 + block, n)):
            out[i, i] = k
    return out


@numba.njit(cache=True, nogil=True)
def _cross_agreement(X, Y, block):
    n, k = X.shape
    m = Y.shape[0]
    out = np.zeros((n, m), np.int64)
    for i0 in range(0, n, block):
        for j0 in range(0, m, block):
            for i in range(i0, min(i0 + block, n)):
                xi = X[i]
                for j in range(j0, min(j0 + block, m)):
                    yj = Y[j]
                    s = 0
                    for c in range(k):
                        s += xi[c] == yj[c]
                    out[i, j] = s
    return out


@numba.njit(cache=True, nogil=True)
def _pair_confusions(X, I, J, q):
    k = X.shape[1]
    out = np.zeros((I.shape[0], q, q), np.int64)
    for p in range(I.shape[0]):
        a = X[I[p]]
        b = X[J[p]]
        for c in range(k):
            out[p, a[c], b[c]] += 1
    return out


def agreement_matrix(X: np.ndarray) -> np.ndarray:
    """Number of equal coordinates for every pair of rows (int32, so ``k < 2**31``)."""
    X = np.ascontiguousarray(X)
    return _agreement_matrix(X, BLOCK)


def cross_agreement(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    X, Y = np.ascontiguousarray(X), np.ascontiguousarray(Y, dtype=X.dtype)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("row lengths differ")
    return _cross_agreement(X, Y, BLOCK)


def normalized_hamming(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.count_nonzero(a != b)) / a.size


def confusion(a, b, q: int) -> np.ndarray:
    """``C[x, y]`` = number of coordinates with ``a = x`` and ``b = y``."""
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.bincount(a * q + b, minlength=q * q).reshape(q, q)


@functools.lru_cache(maxsize=None)
def all_permutations(q: int) -> np.ndarray:
    """Every permutation of ``range(q)`` in lexicographic order, one per row."""
    return np.array(list(itertools.permutations(range(q))), dtype=np.int64).reshape(-1, q)


def best_relabelings(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximise ``sum_x C[x, sigma[x]]`` for a stack of confusion matrices.

    Returns (best agreement, sigma) per matrix. Up to ``ENUMERATE_MAX_Q``
    the search is exhaustive and ties go to the lexicographically smallest
    sigma; beyond it an assignment solver returns one optimum.
    """
    C = np.asarray(C)
    squeeze = C.ndim == 2
    C = C.reshape(-1, C.shape[-2], C.shape[-1])
    q = C.shape[-1]
    if q <= ENUMERATE_MAX_Q:
        perms = all_permutations(q)
        best = np.empty(C.shape[0], dtype=np.int64)
        sig = np.empty((C.shape[0], q), dtype=np.int64)
        for s in range(0, C.shape[0], 4096):
            chunk = C[s : s + 4096]
            scores = chunk[:, np.arange(q), perms].sum(axis=-1)
            j = scores.argmax(axis=1)
            best[s : s + 4096] = scores[np.arange(len(j)), j]
            sig[s : s + 4096] = perms[j]
    else:
        best = np.empty(C.shape[0], dtype=np.int64)
        sig = np.empty((C.shape[0], q), dtype=np.int64)
        for p in range(C.shape[0]):
            rows, cols = linear_sum_assignment(C[p], maximize=True)
            sig[p, rows] = cols
            best[p] = C[p, rows, cols].sum()
    if squeeze:
        return best[0], sig[0]
    return best, sig


def relative_hamming(a, b, q: int) -> tuple[float, np.ndarray]:
    """Smallest normalised Hamming distance between ``sigma(a)`` and ``b`` over relabelings."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0, np.arange(q)
    agree, sigma = best_relabelings(confusion(a, b, q))
    return 1.0 - float(agree) / a.size, sigma


def relative_agreement_matrix(X: np.ndarray, q: int) -> np.ndarray:
    """Best agreement over relabelings for every pair of rows."""
    n = X.shape[0]
    out = np.zeros((n, n), dtype=np.int64)
    np.fill_diagonal(out, X.shape[1])
    I, J = np.triu_indices(n, 1)
    X = np.ascontiguousarray(X)
    for s in range(0, I.size, 8192):
        i, j = I[s : s + 8192], J[s : s + 8192]
        best, _ = best_relabelings(_pair_confusions(X, i, j, q))
        out[i, j] = best
        out[j, i] = best
    return out


def relabelings(X: np.ndarray, I, J, q: int) -> np.ndarray:
    """Optimal relabeling sigma(I[p] -> J[p]) for each requested pair."""
    I, J = np.asarray(I, dtype=np.int64), np.asarray(J, dtype=np.int64)
    if I.size == 0:
        return np.zeros((0, q), dtype=np.int64)
    _, sig = best_relabelings(_pair_confusions(np.ascontiguousarray(X), I, J, q))
    return sig


def similarity(raw, q: int):
    """Map a normalised Hamming value to ``1 - raw q/(q-1)``, whose mean is a product of qualities."""
    return 1.0 - np.asarray(raw, dtype=float) * q / (q - 1)


def similarity_from_agreement(agree: np.ndarray, k: int, q: int) -> np.ndarray:
    """``similarity(1 - agree / k, q)`` computed in place on one float buffer."""
    S = np.divide(agree, k, dtype=float)
    np.subtract(1.0, S, out=S)
    S *= q
    S /= q - 1
    np.subtract(1.0, S, out=S)
    return S


@dataclasses.dataclass(frozen=True)
class DistanceEstimate:
    """Integer tree distance, capped at ``2r + 2`` where ``far`` is set."""

    dist: int
    far: bool
    raw: float
    sigma: np.ndarray | None = None


def far_threshold(lam: float, r: int) -> float:
    return lam ** (2 * r + 1.5)


def estimate_distance(
    raw: float,
    lam: float,
    lam_a: float,
    lam_b: float,
    q: int,
    r: int,
    sigma: np.ndarray | None = None,
    tol: float = 1e-9,
) -> DistanceEstimate:
    """Invert the expected Hamming distance of two nodes into a tree distance.

    Boundaries between consecutive distances sit at the geometric mean of
    the adjacent powers of ``lam``; anything below ``lam**(2r + 1.5)`` is far.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("channel parameter must lie in (0, 1)")
    if not (0.0 < lam_a <= 1.0 and 0.0 < lam_b <= 1.0):
        raise ValueError("endpoint qualities must lie in (0, 1]")
    if raw < -tol or raw > (q - 1) / q + tol:
        raise ValueError(f"normalised Hamming value {raw} is impossible for q={q}")
    power = float(similarity(raw, q)) / (lam_a * lam_b)
    cap = 2 * r + 2
    if power < far_threshold(lam, r):
        return DistanceEstimate(cap, True, float(raw), sigma)
    if power >= 1.0:
        return DistanceEstimate(0, False, float(raw), sigma)
    dist = int(math.floor(math.log(power) / math.log(lam) + 0.5))
    return DistanceEstimate(min(dist, cap), False, float(raw), sigma)


def estimate_distances(S: np.ndarray, lam: float, mu: np.ndarray, r: int) -> np.ndarray:
    """Vectorised :func:`estimate_distance` from a similarity matrix; far pairs get ``2r + 2``."""
    power = S / np.outer(mu, mu)
    cap = 2 * r + 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.floor(np.log(np.clip(power, 1e-300, 1.0)) / math.log(lam) + 0.5)
    dist = np.where(power >= 1.0, 0, dist)
    return np.where(power < far_threshold(lam, r), cap, np.minimum(dist, cap)).astype(np.int64)
