"""Pair-bijection recovery for the feature-interaction model.

Children encode each pair of parent letters through an unknown bijection
``tau`` of ``[q]^2``. Within a sibling group, ``tau`` of one child is recovered
up to a relabeling of each coordinate and a swap of the two coordinates
(the "flip"): its image splits into ``q`` rows (parent pairs sharing the
first letter) and ``q`` columns (sharing the second letter), but which family
is which cannot be told from one group.
"""
from __future__ import annotations

import dataclasses
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .distances import all_permutations
from .structure import ReconstructionFailure


def pair_codes(letters: np.ndarray, q: int) -> np.ndarray:
    letters = np.asarray(letters, dtype=np.int64)
    return letters[0::2] * q + letters[1::2]


def best_matching(C: np.ndarray) -> tuple[int, np.ndarray]:
    """Bijection ``rho`` maximising ``sum_x C[x, rho[x]]``, and that maximum."""
    rows, cols = linear_sum_assignment(C, maximize=True)
    rho = np.empty(C.shape[0], dtype=np.int64)
    rho[rows] = cols
    return int(C[rows, cols].sum()), rho


def grouped_agreement(ca, ga, cb, gb, m: int) -> int:
    """Best agreement when every (group of a, group of b) class gets its own bijection."""
    key = (np.asarray(ga) * 4 + np.asarray(gb)) * (m * m) + np.asarray(ca) * m + np.asarray(cb)
    C = np.bincount(key, minlength=16 * m * m).reshape(16, m, m)
    total = 0
    for g in range(16):
        if C[g].any():
            total += best_matching(C[g])[0]
    return total


@dataclasses.dataclass(frozen=True, eq=False)
class FimNode:
    """A reconstructed (or observed) node.

    ``cls`` marks which of two letter frames each position is in; ``swap``
    is the involution that exchanges positions within each rewired pair,
    applied when the node's pending flip is resolved as "flipped".
    """

    letters: np.ndarray
    cls: np.ndarray
    swap: np.ndarray | None = None

    @classmethod
    def observed(cls, letters: np.ndarray) -> "FimNode":
        letters = np.asarray(letters, dtype=np.int64)
        return cls(letters, np.zeros(letters.size, dtype=np.int64), None)

    @property
    def can_flip(self) -> bool:
        return self.swap is not None

    def flipped(self) -> "FimNode":
        if self.swap is None:
            return self
        return FimNode(self.letters[self.swap], self.cls[self.swap], None)

    def settled(self, flip: bool) -> "FimNode":
        node = self.flipped() if flip else self
        return FimNode(node.letters, node.cls, None)

    def options(self) -> list["FimNode"]:
        return [self.settled(False), self.settled(True)] if self.can_flip else [self]

    def codes(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        return pair_codes(self.letters, q), self.cls[0::2] * 2 + self.cls[1::2]

    def with_frame(self, delta: np.ndarray) -> "FimNode":
        """Relabel the letters in the second frame by ``delta``."""
        letters = np.where(self.cls == 1, np.asarray(delta)[self.letters], self.letters)
        return FimNode(letters, np.zeros_like(self.cls), self.swap)


def node_agreement(a: FimNode, b: FimNode, q: int) -> float:
    """Fraction of pair positions that agree under the best per-class bijections,
    maximised over unresolved flips of both nodes."""
    best = 0
    for oa in a.options():
        ca, ga = oa.codes(q)
        for ob in b.options():
            cb, gb = ob.codes(q)
            best = max(best, grouped_agreement(ca, ga, cb, gb, q * q))
    return best / max(1, a.letters.size // 2)


def rewiring_swap(sigma: np.ndarray) -> np.ndarray:
    """Involution exchanging ``sigma[2i]`` and ``sigma[2i + 1]`` for every pair."""
    sigma = np.asarray(sigma, dtype=np.int64)
    swap = np.arange(sigma.size)
    swap[sigma[0::2]] = sigma[1::2]
    swap[sigma[1::2]] = sigma[0::2]
    return swap


@dataclasses.dataclass(frozen=True)
class FlipResolution:
    flips: tuple[bool, ...]
    score: float
    runner_up: float

    @property
    def margin(self) -> float:
        return self.score - self.runner_up


def fim_resolve_flip(nodes: list[FimNode], q: int, min_margin: float = 0.0) -> FlipResolution:
    """Choose each sibling's pending flip so the siblings agree best with one another.

    Scores every flip combination by the summed best agreement of all
    sibling pairs; ties keep the lexicographically smaller combination (no
    flip first). A winning margin at or below ``min_margin`` is a failure.
    """
    if len(nodes) < 2:
        raise ValueError("flip resolution needs at least two siblings")
    n_pairs = nodes[0].letters.size // 2
    opts = [node.options() for node in nodes]
    codes = [[o.codes(q) for o in opt] for opt in opts]
    pair_score = {}
    for i, j in itertools.combinations(range(len(nodes)), 2):
        for fi in range(len(opts[i])):
            for fj in range(len(opts[j])):
                (ca, ga), (cb, gb) = codes[i][fi], codes[j][fj]
                pair_score[i, j, fi, fj] = grouped_agreement(ca, ga, cb, gb, q * q) / n_pairs
    scored = []
    for combo in itertools.product(*[range(len(o)) for o in opts]):
        s = sum(pair_score[i, j, combo[i], combo[j]] for i, j in itertools.combinations(range(len(nodes)), 2))
        scored.append((s, combo))
    best_s, best_combo = scored[0]
    for s, combo in scored[1:]:
        if s > best_s:
            best_s, best_combo = s, combo
    rest = [s for s, combo in scored if combo != best_combo]
    runner = max(rest) if rest else -np.inf
    res = FlipResolution(tuple(bool(f) for f in best_combo), best_s, runner)
    if rest and res.margin <= min_margin:
        raise ReconstructionFailure("flip", f"flip choice ambiguous (margin {res.margin:.3g})")
    return res


def _pooled_agreement(a: FimNode, b: FimNode, q: int) -> int:
    ca, cb = pair_codes(a.letters, q), pair_codes(b.letters, q)
    m = q * q
    return best_matching(np.bincount(ca * m + cb, minlength=m * m).reshape(m, m))[0]


def resolve_frames(nodes: list[FimNode], q: int) -> tuple[list[FimNode], list[np.ndarray]]:
    """Bring the second letter frame of every (settled) sibling onto its first.

    The first two siblings are searched jointly; later ones one at a time
    against the first. Siblings with a single frame are left alone.
    """
    perms = all_permutations(q)
    ident = np.arange(q)
    mixed = [bool(np.any(n.cls != n.cls[0])) for n in nodes]
    deltas = [ident] * len(nodes)
    if not any(mixed):
        return list(nodes), deltas
    cands = [perms if mx else ident[None, :] for mx in mixed]
    best, pick = -1, (ident, ident)
    for d0 in cands[0]:
        a = nodes[0].with_frame(d0)
        for d1 in cands[1]:
            s = _pooled_agreement(a, nodes[1].with_frame(d1), q)
            if s > best:
                best, pick = s, (d0, d1)
    deltas[0], deltas[1] = pick
    out = [nodes[0].with_frame(pick[0]), nodes[1].with_frame(pick[1])]
    for j in range(2, len(nodes)):
        best, choice = -1, ident
        for dj in cands[j]:
            s = _pooled_agreement(out[0], nodes[j].with_frame(dj), q)
            if s > best:
                best, choice = s, dj
        deltas[j] = choice
        out.append(nodes[j].with_frame(choice))
    return out, deltas


# -- pair-bijection recovery ---------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class PairPermRecovery:
    """Recovered structure of one sibling's pair bijection.

    ``tau[a, b]`` is the code the sibling uses for the (relabeled) parent
    pair ``(a, b)``. ``A[y]``, ``B[y]``, ``C[y]`` are the neighbour set of
    code ``y`` and its split into the row part and the column part.
    ``rho[j]`` maps sibling ``j``'s codes onto this sibling's codes.
    """

    q: int
    tau: np.ndarray
    A: dict[int, frozenset]
    B: dict[int, frozenset]
    C: dict[int, frozenset]
    rho: dict[int, np.ndarray]
    min_gap: int
    min_count: int

    @property
    def inverse(self) -> np.ndarray:
        """``(q*q, 2)`` table sending a code back to its pair ``(a, b)``."""
        q = self.q
        inv = np.empty((q * q, 2), dtype=np.int64)
        a, b = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
        inv[self.tau.ravel(), 0] = a.ravel()
        inv[self.tau.ravel(), 1] = b.ravel()
        return inv

    def cover_ok(self, x: int) -> bool:
        """``{x}``, ``B(x)``, ``C(x)`` and the ``B`` sets of ``C(x)`` cover every code."""
        seen = {x} | set(self.B[x]) | set(self.C[x])
        for y in self.C[x]:
            seen |= set(self.B[y])
        return seen == set(range(self.q * self.q))


def relative_pair_map(src: np.ndarray, dst: np.ndarray, q: int) -> np.ndarray:
    """Bijection of pair codes best matching ``src`` onto ``dst``."""
    m = q * q
    C = np.bincount(np.asarray(src) * m + np.asarray(dst), minlength=m * m).reshape(m, m)
    return best_matching(C)[1]


def _split_cliques(members: list[int], adj: np.ndarray) -> list[list[int]]:
    left = set(members)
    comps = []
    while left:
        start = min(left)
        comp, stack = {start}, [start]
        while stack:
            u = stack.pop()
            for v in list(left):
                if v not in comp and adj[u, v]:
                    comp.add(v)
                    stack.append(v)
        left -= comp
        comps.append(sorted(comp))
    return comps


def fim_recover_pairperm(
    codes: np.ndarray, q: int, index: int = 0, min_count: int = 30
) -> PairPermRecovery:
    """Recover sibling ``index``'s pair bijection from three or more siblings.

    ``codes[j]`` are sibling ``j``'s pair codes in a single letter frame.
    Positions where two other siblings (mapped onto this sibling's codes)
    agree on a code ``y`` mostly carry the same parent pair; there the
    ``2(q - 1)`` most frequent other codes are the pairs differing from
    ``y``'s parent pair in one letter. Those split into two cliques, the
    row and the column through ``y``.
    """
    codes = np.asarray(codes, dtype=np.int64)
    d = codes.shape[0]
    if d < 3:
        raise ReconstructionFailure("pair-recovery", "needs at least three siblings")
    m = q * q
    own = codes[index]
    helpers = [(index + 1) % d, (index + 2) % d]
    rho = {j: relative_pair_map(codes[j], own, q) for j in range(d) if j != index}
    t1, t2 = rho[helpers[0]][codes[helpers[0]]], rho[helpers[1]][codes[helpers[1]]]
    mask = t1 == t2
    cooc = np.bincount(t1[mask] * m + own[mask], minlength=m * m).reshape(m, m)
    totals = cooc.sum(axis=1)
    if totals.min() < min_count:
        raise ReconstructionFailure(
            "pair-recovery", f"code {int(totals.argmin())} seen {int(totals.min())} < {min_count} times"
        )
    size = 2 * (q - 1)
    A, gaps = {}, []
    for y in range(m):
        row = cooc[y].copy()
        if row.argmax() != y:
            raise ReconstructionFailure("pair-recovery", f"code {y} is not its own most frequent match")
        row[y] = -1
        order = np.argsort(-row, kind="stable")
        A[y] = frozenset(int(z) for z in order[:size])
        nxt = row[order[size]] if size < m - 1 else 0
        gaps.append(int(row[order[size - 1]] - nxt))
    if min(gaps) <= 0:
        raise ReconstructionFailure("pair-recovery", "neighbour sets tied at the cut")
    adj = np.zeros((m, m), dtype=bool)
    for y, nb in A.items():
        adj[y, list(nb)] = True
    adj &= adj.T
    halves = {}
    for y in range(m):
        comps = _split_cliques(sorted(A[y]), adj)
        if len(comps) != 2 or any(len(c) != q - 1 for c in comps):
            raise ReconstructionFailure("pair-recovery", f"neighbours of code {y} do not split into two lines")
        halves[y] = [frozenset(c) | {y} for c in comps]
    # The first line through code 0 is called a row; lines meeting it in one code are columns.
    row0 = min(halves[0], key=lambda s: sorted(s - {0}))
    rows, cols = set(), set()
    B, C = {}, {}
    for y in range(m):
        kinds = [s == row0 or not (s & row0) for s in halves[y]]
        if kinds.count(True) != 1:
            raise ReconstructionFailure("pair-recovery", f"lines through code {y} cannot be told apart")
        r = halves[y][kinds.index(True)]
        c = halves[y][kinds.index(False)]
        rows.add(r)
        cols.add(c)
        B[y], C[y] = r - {y}, c - {y}
    rows_sorted = sorted(rows, key=min)
    cols_sorted = sorted(cols, key=min)
    if len(rows_sorted) != q or len(cols_sorted) != q:
        raise ReconstructionFailure("pair-recovery", "lines do not partition the pair codes")
    tau = np.empty((q, q), dtype=np.int64)
    for a, r in enumerate(rows_sorted):
        for b, c in enumerate(cols_sorted):
            hit = r & c
            if len(hit) != 1:
                raise ReconstructionFailure("pair-recovery", "a row and a column do not meet once")
            tau[a, b] = next(iter(hit))
    if len(set(tau.ravel().tolist())) != m:
        raise ReconstructionFailure("pair-recovery", "recovered map is not a bijection")
    return PairPermRecovery(q, tau, A, B, C, rho, min(gaps), int(totals.min()))


def pair_residual(true_tau: np.ndarray, tau_hat: np.ndarray, q: int, frame_search: bool = False):
    """Express ``tau_hat`` through ``true_tau`` up to the allowed ambiguity.

    Looks for relabelings ``alpha``, ``beta`` (and, when ``swap``, exchanged
    coordinates) with ``tau_hat(a, b) = (g x g) true_tau(alpha(a), beta(b))``
    where ``g`` is a letter relabeling of the codes (identity unless
    ``frame_search``). Returns ``(alpha, beta, swap, g)`` or ``None``.
    """
    true_tau = np.asarray(true_tau, dtype=np.int64).reshape(-1)
    inv_true = np.empty_like(true_tau)
    inv_true[true_tau] = np.arange(true_tau.size)
    frames = all_permutations(q) if frame_search else np.arange(q)[None, :]
    for g in frames:
        g_inv = np.empty(q, dtype=np.int64)
        g_inv[g] = np.arange(q)
        code = np.asarray(tau_hat, dtype=np.int64)
        undone = g_inv[code // q] * q + g_inv[code % q]
        pre = inv_true[undone]
        x1, x2 = pre // q, pre % q
        for swap in (False, True):
            first, second = (x2, x1) if swap else (x1, x2)
            # first coordinate must depend on a only, second on b only
            if (first == first[:, :1]).all() and (second == second[:1, :]).all():
                alpha, beta = first[:, 0], second[0, :]
                if len(set(alpha.tolist())) == q and len(set(beta.tolist())) == q:
                    return alpha, beta, swap, g
    return None


# -- decoding a sibling group into the parent ---------------------------------------------


def decode_group(
    nodes: list[FimNode],
    recovery: PairPermRecovery,
    sigma: np.ndarray,
    q: int,
) -> np.ndarray:
    """Each sibling's view of the parent letters, ``(d, k)``, in the anchor's frame.

    Sibling ``j``'s codes are mapped onto the anchor's (sibling 0) codes,
    decoded to pairs ``(a, b)`` and placed at the parent positions the
    rewiring ``sigma`` drew them from.
    """
    inv = recovery.inverse
    sigma = np.asarray(sigma, dtype=np.int64)
    k = nodes[0].letters.size
    out = np.empty((len(nodes), k), dtype=np.int64)
    for j, node in enumerate(nodes):
        c = pair_codes(node.letters, q)
        if j:
            c = recovery.rho[j][c]
        ab = inv[c]
        out[j, sigma[0::2]] = ab[:, 0]
        out[j, sigma[1::2]] = ab[:, 1]
    return out
