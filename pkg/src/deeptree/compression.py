"""Per-label histograms over position subsets of the labeled representations."""
from __future__ import annotations

import csv
import dataclasses
import os
from typing import TextIO

import numpy as np

from .core import Dataset

# Above this many cells per subset lookups go through the sparse keys.
DENSE_LIMIT = 1 << 22


@dataclasses.dataclass(frozen=True)
class CompressionScheme:
    """Subsets ``A_1..A_j`` of positions; each is stored sorted ascending."""

    subsets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cleaned = tuple(tuple(sorted(set(int(p) for p in a))) for a in self.subsets)
        if not cleaned:
            raise ValueError("a scheme needs at least one subset")
        for a in cleaned:
            if not a:
                raise ValueError("subsets must be non-empty")
            if a[0] < 0:
                raise ValueError("positions must be non-negative")
        object.__setattr__(self, "subsets", cleaned)

    @property
    def s(self) -> int:
        return max(len(a) for a in self.subsets)

    def __len__(self) -> int:
        return len(self.subsets)

    def check(self, k: int) -> None:
        worst = max(a[-1] for a in self.subsets)
        if worst >= k:
            raise ValueError(f"scheme references position {worst} but k={k}")

    def is_canonical(self, k: int) -> bool:
        return self.subsets == tuple((i,) for i in range(k))

    @classmethod
    def canonical(cls, k: int) -> "CompressionScheme":
        return cls(tuple((i,) for i in range(k)))

    @classmethod
    def full(cls, k: int) -> "CompressionScheme":
        return cls((tuple(range(k)),))

    @classmethod
    def consecutive(cls, k: int, s: int) -> "CompressionScheme":
        """Disjoint blocks of ``s`` consecutive positions (the last may be shorter)."""
        return cls(tuple(tuple(range(i, min(i + s, k))) for i in range(0, k, s)))


def encode_tuples(reps: np.ndarray, positions: tuple[int, ...], q: int) -> np.ndarray:
    """Base-``q`` codes of ``reps[:, positions]``, first position most significant."""
    if q ** len(positions) > np.iinfo(np.int64).max:
        raise ValueError(f"q**{len(positions)} does not fit in 64-bit codes")
    codes = np.zeros(reps.shape[0], dtype=np.int64)
    for p in positions:
        codes = codes * q + reps[:, p]
    return codes


def decode_tuple(code: int, length: int, q: int) -> tuple[int, ...]:
    digits = []
    for _ in range(length):
        code, digit = divmod(code, q)
        digits.append(digit)
    return tuple(reversed(digits))


@dataclasses.dataclass(frozen=True, eq=False)
class CompressedData:
    """Histograms ``n[(i, x, label)]`` plus the raw unlabeled representations.

    For subset ``i`` the non-zero cells are ``keys[i]`` (sorted, equal to
    ``code * n_labels + label_index``) with multiplicities ``counts[i]``.
    """

    scheme: CompressionScheme
    q: int
    k: int
    label_values: np.ndarray
    label_counts: np.ndarray
    keys: tuple[np.ndarray, ...]
    counts: tuple[np.ndarray, ...]
    unlabeled_reps: np.ndarray

    @property
    def n_labels(self) -> int:
        return len(self.label_values)

    def count(self, i: int, x, label: int) -> int:
        a = self.scheme.subsets[i]
        x = tuple(x)
        if len(x) != len(a):
            raise ValueError(f"subset {i} has {len(a)} positions")
        where = np.flatnonzero(self.label_values == label)
        if where.size == 0:
            return 0
        code = 0
        for letter in x:
            code = code * self.q + int(letter)
        key = code * self.n_labels + int(where[0])
        j = np.searchsorted(self.keys[i], key)
        if j < len(self.keys[i]) and self.keys[i][j] == key:
            return int(self.counts[i][j])
        return 0

    def lookup(self, i: int, codes: np.ndarray) -> np.ndarray:
        """Counts for every label at the given tuple codes of subset ``i``; shape (n, L)."""
        L = self.n_labels
        cells = self.q ** len(self.scheme.subsets[i])
        if cells * L <= DENSE_LIMIT:
            table = np.zeros(cells * L, dtype=np.int64)
            table[self.keys[i]] = self.counts[i]
            return table.reshape(cells, L)[codes]
        wanted = codes[:, None] * L + np.arange(L)
        keys = self.keys[i]
        if keys.size == 0:
            return np.zeros(wanted.shape, dtype=np.int64)
        j = np.minimum(np.searchsorted(keys, wanted), keys.size - 1)
        return np.where(keys[j] == wanted, self.counts[i][j], 0)

    def canonical_table(self) -> np.ndarray:
        """Dense ``(k, q, L)`` letter counts; only for the canonical scheme."""
        if not self.scheme.is_canonical(self.k):
            raise ValueError("dense letter table needs the canonical scheme")
        L = self.n_labels
        out = np.zeros((self.k, self.q * L), dtype=np.int64)
        for i in range(self.k):
            out[i, self.keys[i]] = self.counts[i]
        return out.reshape(self.k, self.q, L)

    def entries(self):
        """Yield ``(subset_index, tuple, label, count)`` for every non-zero cell."""
        L = self.n_labels
        for i, a in enumerate(self.scheme.subsets):
            for key, c in zip(self.keys[i].tolist(), self.counts[i].tolist()):
                code, lab = divmod(key, L)
                yield i, decode_tuple(code, len(a), self.q), int(self.label_values[lab]), c

    def write_csv(self, out: TextIO | str | os.PathLike) -> None:
        if isinstance(out, (str, os.PathLike)):
            with open(out, "w", encoding="utf-8", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["subset_index", "tuple", "label", "count"])
        for i, x, lab, c in self.entries():
            writer.writerow([i, ".".join(map(str, x)), lab, c])


def compress(data: Dataset, scheme: CompressionScheme) -> CompressedData:
    scheme.check(data.k)
    label_values, label_index, label_counts = np.unique(
        data.labels, return_inverse=True, return_counts=True
    )
    L = len(label_values)
    keys, counts = [], []
    for a in scheme.subsets:
        codes = encode_tuples(data.labeled_reps, a, data.q)
        flat = codes * L + label_index
        if data.q ** len(a) * L <= DENSE_LIMIT:
            hist = np.bincount(flat, minlength=data.q ** len(a) * L)
            nz = np.flatnonzero(hist)
            keys.append(nz.astype(np.int64))
            counts.append(hist[nz].astype(np.int64))
        else:
            u, c = np.unique(flat, return_counts=True)
            keys.append(u.astype(np.int64))
            counts.append(c.astype(np.int64))
    return CompressedData(
        scheme=scheme,
        q=data.q,
        k=data.k,
        label_values=label_values.astype(np.int64),
        label_counts=label_counts.astype(np.int64),
        keys=tuple(keys),
        counts=tuple(counts),
        unlabeled_reps=data.unlabeled_reps,
    )
