"""Local and shallow classifiers used as comparison points for the deep pipeline.

Local classifiers see one unlabeled representation plus the labeled set;
shallow classifiers see only the per-label histograms of a compression.
All of them are deterministic; ties go to the smallest label.
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .compression import CompressedData, CompressionScheme, compress, encode_tuples
from .core import Dataset
from .reconstruct.distances import cross_agreement
from .reconstruct.labels import UNLABELED

TIE_RTOL = 1e-12


class BaselineKind(str, enum.Enum):
    LOCAL_NN = "LOCAL_NN"
    LOCAL_ML = "LOCAL_ML"
    SHALLOW_NB = "SHALLOW_NB"
    SHALLOW_S = "SHALLOW_S"
    TRIVIAL = "TRIVIAL"

    @property
    def is_local(self) -> bool:
        return self in (BaselineKind.LOCAL_NN, BaselineKind.LOCAL_ML)

    @property
    def is_shallow(self) -> bool:
        return self in (BaselineKind.SHALLOW_NB, BaselineKind.SHALLOW_S)


def _argmax_smallest(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per row, the smallest label among the (numerically) maximal scores."""
    top = scores.max(axis=1, keepdims=True)
    tol = TIE_RTOL * np.maximum(np.abs(top), 1.0)
    winners = scores >= top - tol
    big = np.iinfo(np.int64).max
    return np.where(winners, labels[None, :], big).min(axis=1)


def path_match_probability(lam: float, q: int, depth: int) -> float:
    """Probability that two letters ``depth`` channel steps apart are equal."""
    eta = lam**depth
    return eta + (1.0 - eta) / q


def local_scores(
    reps: np.ndarray,
    labeled_reps: np.ndarray,
    labeled_labels: np.ndarray,
    kind: BaselineKind,
    lam: float,
    q: int,
    depth: int,
    agree: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Score matrix ``(n, n_labels)`` and the label values, sorted ascending.

    ``agree`` may pass a precomputed ``cross_agreement(reps, labeled_reps)``.
    """
    kind = BaselineKind(kind)
    labeled_labels = np.asarray(labeled_labels, dtype=np.int64)
    values, index = np.unique(labeled_labels, return_inverse=True)
    if agree is None:
        agree = cross_agreement(np.atleast_2d(reps), np.atleast_2d(labeled_reps))
    agree = np.asarray(agree, dtype=float)
    if kind is BaselineKind.LOCAL_NN:
        # best agreement with any example of the label
        scores = np.full((agree.shape[0], len(values)), -np.inf)
        for j in range(len(values)):
            scores[:, j] = agree[:, index == j].max(axis=1)
        return scores, values
    if kind is not BaselineKind.LOCAL_ML:
        raise ValueError(f"{kind.value} is not a local classifier")
    k = np.atleast_2d(reps).shape[1]
    p_same = path_match_probability(lam, q, depth)
    p_diff = (1.0 - p_same) / (q - 1)
    totals = np.zeros((agree.shape[0], len(values)))
    counts = np.bincount(index, minlength=len(values)).astype(float)
    for j in range(len(values)):
        totals[:, j] = agree[:, index == j].sum(axis=1)
    if p_diff <= 0.0:
        # noiseless path: any mismatch rules a label out
        scores = np.where(totals == counts * k, 0.0, -np.inf)
        return scores, values
    scores = counts * k * math.log(p_diff) + totals * (math.log(p_same) - math.log(p_diff))
    return scores, values


def local_classify_batch(
    reps, labeled_reps, labeled_labels, kind, lam: float, q: int, depth: int, agree=None
) -> np.ndarray:
    if len(labeled_labels) == 0:
        return np.full(np.atleast_2d(reps).shape[0], UNLABELED, dtype=np.int64)
    scores, values = local_scores(reps, labeled_reps, labeled_labels, kind, lam, q, depth, agree)
    return _argmax_smallest(scores, values)


def local_classify(rep, labeled, kind, lam: float, q: int, depth: int) -> int:
    """Label one representation from ``labeled = [(rep, label), ...]`` only."""
    if not labeled:
        raise ValueError("local classification needs labeled examples")
    lreps = np.stack([np.asarray(r) for r, _ in labeled])
    labs = np.array([lab for _, lab in labeled], dtype=np.int64)
    rep = np.asarray(rep, dtype=lreps.dtype)[None, :]
    return int(local_classify_batch(rep, lreps, labs, kind, lam, q, depth)[0])


def shallow_scores(compressed: CompressedData, reps: np.ndarray | None = None, alpha: float = 1.0, chunk: int = 256):
    """Add-``alpha`` naive-Bayes log scores ``(n, n_labels)`` over the scheme's subsets."""
    reps = compressed.unlabeled_reps if reps is None else np.atleast_2d(reps)
    L, q = compressed.n_labels, compressed.q
    scores = np.zeros((reps.shape[0], L))
    denom_counts = compressed.label_counts.astype(float)
    if compressed.scheme.is_canonical(compressed.k):
        table = compressed.canonical_table().astype(float)
        logp = np.log(table + alpha) - np.log(denom_counts + alpha * q)
        cols = np.arange(compressed.k)
        for s in range(0, reps.shape[0], chunk):
            block = reps[s : s + chunk].astype(np.int64)
            scores[s : s + chunk] = logp[cols[None, :], block].sum(axis=1)
        return scores
    for i, a in enumerate(compressed.scheme.subsets):
        codes = encode_tuples(reps, a, q)
        counts = compressed.lookup(i, codes).astype(float)
        scores += np.log(counts + alpha) - np.log(denom_counts + alpha * q ** len(a))
    return scores


def shallow_classify(
    compressed: CompressedData, kind=BaselineKind.SHALLOW_NB, alpha: float = 1.0
) -> np.ndarray:
    """Label every unlabeled representation of ``compressed``."""
    kind = BaselineKind(kind)
    if not kind.is_shallow:
        raise ValueError(f"{kind.value} is not a shallow classifier")
    if kind is BaselineKind.SHALLOW_NB and not compressed.scheme.is_canonical(compressed.k):
        raise ValueError("SHALLOW_NB works on the canonical per-position compression")
    n = compressed.unlabeled_reps.shape[0]
    if compressed.n_labels == 0:
        return np.full(n, UNLABELED, dtype=np.int64)
    return _argmax_smallest(shallow_scores(compressed, alpha=alpha), compressed.label_values)


def trivial_classify(compressed: CompressedData) -> int:
    """The most frequent label (smallest on ties); ``UNLABELED`` with no labeled data."""
    if compressed.n_labels == 0:
        return UNLABELED
    return int(compressed.label_values[np.argmax(compressed.label_counts)])


def default_scheme(kind: BaselineKind, k: int, s: int = 2) -> CompressionScheme:
    if BaselineKind(kind) is BaselineKind.SHALLOW_S:
        return CompressionScheme.consecutive(k, s)
    return CompressionScheme.canonical(k)


def classify(
    data: Dataset,
    kind,
    lam: float | None = None,
    depth: int | None = None,
    scheme: CompressionScheme | None = None,
    alpha: float = 1.0,
    agree: np.ndarray | None = None,
) -> np.ndarray:
    """Predicted label for each unlabeled leaf of ``data`` (in dataset order).

    ``agree`` lets several local classifiers share one unlabeled-by-labeled
    agreement matrix.
    """
    kind = BaselineKind(kind)
    if kind.is_local:
        if kind is BaselineKind.LOCAL_ML and (lam is None or depth is None):
            raise ValueError("LOCAL_ML needs the channel parameter and the path depth")
        return local_classify_batch(
            data.unlabeled_reps, data.labeled_reps, data.labels, kind,
            lam if lam is not None else 0.0, data.q, depth or 0, agree,
        )
    compressed = compress(data, scheme or default_scheme(kind, data.k))
    if kind is BaselineKind.TRIVIAL:
        return np.full(len(data.unlabeled_nodes), trivial_classify(compressed), dtype=np.int64)
    return shallow_classify(compressed, kind, alpha)
