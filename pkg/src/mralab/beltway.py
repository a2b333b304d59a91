"""Cyclic turnpike: recover a support set from its pairwise-difference multiset.

Given the multiset of nonzero differences of an unknown subset S of Z/LZ with
all multiplicities equal to 1, exhaustive backtracking reconstructs every
0-pinned candidate set (translation gauge).  Difference data is blind to the
reflection i -> -i, so reflected candidates always appear; and cyclic
difference multisets can admit genuinely inequivalent ("homometric")
solutions even for |S| >= 7 — e.g. {0,1,3,15,20,38,42} and {0,1,4,6,13,23,34}
in Z/48 share their multiset.  The integer-set uniqueness theorem for sets of
7 or more elements does not transfer to the cyclic problem near the counting
boundary, so uniqueness is reported per instance via ``canonical`` rather
than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .signals import DifferenceMultiset

__all__ = ["SupportSolution", "InconsistentDifferenceSet", "recover_support", "supports_equivalent"]

_MAX_SOLUTIONS = 200_000


class InconsistentDifferenceSet(ValueError):
    """No support set reproduces the given difference multiset."""


@dataclass(frozen=True)
class SupportSolution:
    """All 0-pinned supports reproducing the input differences.

    canonical is True when every candidate is shift/reflection equivalent to
    every other, i.e. the reconstruction is unique up to symmetry.
    """

    candidates: tuple[frozenset[int], ...]
    canonical: bool


def supports_equivalent(a, b, L: int) -> bool:
    """True iff some cyclic shift, possibly with reflection, maps a onto b."""
    sa = frozenset(int(x) % L for x in a)
    sb = frozenset(int(x) % L for x in b)
    if len(sa) != len(sb):
        raise ValueError(f"size mismatch: {len(sa)} vs {len(sb)}")
    for t in range(L):
        if frozenset((x + t) % L for x in sa) == sb:
            return True
        if frozenset((t - x) % L for x in sa) == sb:
            return True
    return False


@njit(cache=True)
def _enumerate_ascending(n, k, base_lo, base_hi, pair_lo, pair_hi, pair_ok, out, cap):
    """Iterative DFS over ascending index k-tuples with compatible difference masks.

    Masks are 128-bit (two uint64 lanes) over residue indices; a candidate is
    admissible when its own base pair and all pairwise difference pairs with
    already-chosen candidates are distinct and unused.
    """
    cur = np.empty(k, np.int64)
    mlo = np.zeros(k + 1, np.uint64)
    mhi = np.zeros(k + 1, np.uint64)
    count = 0
    depth = 0
    i = 0
    while True:
        if i >= n or (n - i) < (k - depth):
            if depth == 0:
                break
            depth -= 1
            i = cur[depth] + 1
            continue
        alo = base_lo[i]
        ahi = base_hi[i]
        ok = (alo & mlo[depth]) == 0 and (ahi & mhi[depth]) == 0 and not (alo == 0 and ahi == 0)
        if ok:
            for d in range(depth):
                j = cur[d]
                if not pair_ok[i, j]:
                    ok = False
                    break
                plo = pair_lo[i, j]
                phi = pair_hi[i, j]
                if (plo & mlo[depth]) != 0 or (phi & mhi[depth]) != 0 or (plo & alo) != 0 or (phi & ahi) != 0:
                    ok = False
                    break
                alo |= plo
                ahi |= phi
        if ok:
            cur[depth] = i
            if depth + 1 == k:
                if count < cap:
                    for d in range(k):
                        out[count, d] = cur[d]
                count += 1
                i += 1
            else:
                mlo[depth + 1] = mlo[depth] | alo
                mhi[depth + 1] = mhi[depth] | ahi
                depth += 1
                i += 1
        else:
            i += 1
    return count


def recover_support(d: DifferenceMultiset, L: int, s: int) -> SupportSolution:
    """Exhaustively solve the cyclic turnpike instance given by ``d``.

    Preconditions: every multiplicity equals 1 and the total count is s(s-1).
    Returns every size-s support containing 0 whose difference multiset equals
    ``d`` exactly, in sorted order.  Raises InconsistentDifferenceSet when no
    support exists.  The search is exact and deterministic: no sampling,
    identical output across runs.
    """
    if not d.is_simple():
        bad = [r for r, c in d.counts.items() if c != 1]
        raise ValueError(f"multiplicities above 1 at residues {bad}: not a collision-free instance")
    if d.total() != s * (s - 1):
        raise ValueError(f"difference count {d.total()} does not match s(s-1)={s * (s - 1)}")
    residues = d.residues()
    if any((L - r) % L not in residues or r % L == 0 for r in residues):
        raise InconsistentDifferenceSet("difference set is not symmetric under negation")
    if s == 1:
        return SupportSolution((frozenset({0}),), True)
    if len(residues) > 128:
        raise ValueError(f"{len(residues)} residues exceed the 128-bit search mask")

    cand = sorted(residues)
    n = len(cand)
    pos = {c: i for i, c in enumerate(cand)}

    def mask_of(rs):
        lo = 0
        hi = 0
        for r in rs:
            b = pos[r]
            if b < 64:
                lo |= 1 << b
            else:
                hi |= 1 << (b - 64)
        return np.uint64(lo), np.uint64(hi)

    base_lo = np.zeros(n, np.uint64)
    base_hi = np.zeros(n, np.uint64)
    pair_lo = np.zeros((n, n), np.uint64)
    pair_hi = np.zeros((n, n), np.uint64)
    pair_ok = np.zeros((n, n), np.bool_)
    for i, x in enumerate(cand):
        xn = (L - x) % L
        if xn in pos and xn != x:
            base_lo[i], base_hi[i] = mask_of((x, xn))
    for i, x in enumerate(cand):
        for j, y in enumerate(cand):
            if i == j:
                continue
            d1, d2 = (x - y) % L, (y - x) % L
            if d1 == d2 or d1 not in pos or d2 not in pos:
                continue
            pair_lo[i, j], pair_hi[i, j] = mask_of((d1, d2))
            pair_ok[i, j] = True

    out = np.empty((_MAX_SOLUTIONS, s - 1), np.int64)
    count = _enumerate_ascending(n, s - 1, base_lo, base_hi, pair_lo, pair_hi, pair_ok, out, _MAX_SOLUTIONS)
    if count > _MAX_SOLUTIONS:
        raise RuntimeError(f"solution cap {_MAX_SOLUTIONS} exceeded ({count} found)")
    solutions = sorted(
        (frozenset([0] + [cand[i] for i in row]) for row in out[:count]),
        key=lambda f: tuple(sorted(f)),
    )
    if not solutions:
        raise InconsistentDifferenceSet(
            f"no size-{s} subset of Z/{L} reproduces the given {d.total()} differences"
        )
    canonical = all(supports_equivalent(solutions[0], c, L) for c in solutions[1:])
    return SupportSolution(tuple(solutions), canonical)
