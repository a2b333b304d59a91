"""Signals on the cyclic group Z/LZ: shifts, orbit distance, collision-free supports.

A signal is a real vector indexed by Z/LZ.  The estimation problem is invariant
under the cyclic shift action, so everything downstream (distances, moments,
estimators) works at the level of shift orbits.  This module also defines the
constrained signal class used by the estimators: sparse signals whose support
has all pairwise differences distinct ("collision-free", a Sidon-set condition)
and whose nonzero magnitudes lie in a fixed band.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import ceil

import numpy as np

__all__ = [
    "Signal",
    "SignalClassSpec",
    "DifferenceMultiset",
    "CollisionError",
    "SupportSamplingError",
    "DEFAULT_SPEC",
    "cyclic_shift",
    "rho_distance",
    "difference_multiset",
    "is_collision_free",
    "is_collision_free_support",
    "sample_collision_free_support",
    "sample_class_signal",
    "project_to_class",
    "membership_check",
    "signal_to_text",
    "signal_from_text",
]


class CollisionError(ValueError):
    """A support has a repeated pairwise difference.

    ``offending_difference`` is one residue with multiplicity > 1.
    """

    def __init__(self, message: str, offending_difference: int | None = None):
        super().__init__(message)
        self.offending_difference = offending_difference


class SupportSamplingError(RuntimeError):
    """Rejection sampling of a collision-free support exhausted its budget."""


@dataclass(frozen=True)
class Signal:
    """A real vector on Z/LZ.  Immutable; the values array is read-only."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"signal values must be a nonempty 1-d sequence, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return self.values.shape[0]

    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class SignalClassSpec:
    """Parameters of the constrained signal class.

    L            ambient dimension
    s            support size
    m_lo, M_hi   magnitude band for nonzero entries
    eps          slack in the support-size condition s >= (2+eps) * M_hi^2 / m_lo^2
    """

    L: int
    s: int
    m_lo: float
    M_hi: float
    eps: float

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if not (0 < self.m_lo <= self.M_hi):
            raise ValueError(f"need 0 < m_lo <= M_hi, got m_lo={self.m_lo}, M_hi={self.M_hi}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        s_min = max(7, ceil((2 + self.eps) * self.M_hi**2 / self.m_lo**2))
        if self.s < s_min:
            raise ValueError(f"support size s={self.s} below class minimum {s_min}")
        # necessary (not sufficient) for a collision-free support of size s
        if self.s * (self.s - 1) > self.L - 1:
            raise ValueError(
                f"s(s-1)={self.s*(self.s-1)} exceeds L-1={self.L-1}: "
                "no collision-free support of this size can exist"
            )

    def max_norm(self) -> float:
        """Largest Euclidean norm of a class member."""
        return float(np.sqrt(self.s) * self.M_hi)


# Smallest L admitting a size-7 collision-free support is 48: at L=43 the
# necessary count bound s(s-1) <= L-1 holds with equality, which would require
# a perfect difference set of order 6, ruled out by Bruck-Ryser-Chowla.
DEFAULT_SPEC = SignalClassSpec(L=48, s=7, m_lo=0.75, M_hi=1.0, eps=0.1)


@dataclass(frozen=True)
class DifferenceMultiset:
    """Multiset of nonzero pairwise support differences, as residue -> count."""

    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(self.counts))

    def total(self) -> int:
        return sum(self.counts.values())

    def residues(self) -> frozenset[int]:
        return frozenset(self.counts)

    def is_simple(self) -> bool:
        """True iff every residue present has multiplicity exactly 1."""
        return all(c == 1 for c in self.counts.values())


def _check_shift(ell: int, L: int) -> int:
    if not (0 <= ell < L):
        raise ValueError(f"shift {ell} out of range [0, {L})")
    return int(ell)


def cyclic_shift(theta: Signal, ell: int) -> Signal:
    """Shift a signal: result[i] = theta[(i + ell) mod L]."""
    ell = _check_shift(ell, theta.L)
    return Signal(np.roll(theta.values, -ell))


def _all_shifts(values: np.ndarray) -> np.ndarray:
    """Matrix whose row ell is the shifted vector i -> values[(i + ell) mod L]."""
    L = values.shape[0]
    idx = (np.arange(L)[:, None] + np.arange(L)[None, :]) % L
    return values[idx]


def rho_distance(theta: Signal, phi: Signal, method: str = "direct") -> tuple[float, int]:
    """Orbit distance min over shifts ell of ||theta - shift(phi, ell)||.

    Returns (value, argmin_shift) with the smallest attaining shift.
    ``method`` is "direct" (O(L^2) scan, default) or "fft" (circular
    correlation); both agree to 1e-12 relative.
    """
    if theta.L != phi.L:
        raise ValueError(f"length mismatch: {theta.L} vs {phi.L}")
    t, p = theta.values, phi.values
    if method == "direct":
        shifted = _all_shifts(p)
        d2 = np.sum((t[None, :] - shifted) ** 2, axis=1)
    elif method == "fft":
        # ||t - R^l p||^2 = ||t||^2 + ||p||^2 - 2 sum_i t(i) p(i+l)
        cross = np.fft.irfft(np.conj(np.fft.rfft(t)) * np.fft.rfft(p), n=theta.L)
        d2 = np.dot(t, t) + np.dot(p, p) - 2.0 * cross
        d2 = np.maximum(d2, 0.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    ell = int(np.argmin(d2))
    return float(np.sqrt(d2[ell])), ell


def difference_multiset(theta: Signal | set | frozenset | tuple | list, L: int | None = None) -> DifferenceMultiset:
    """Multiset {i - j mod L : i, j in support, i != j} with multiplicities."""
    if isinstance(theta, Signal):
        supp = theta.support()
        L = theta.L
    else:
        if L is None:
            raise ValueError("L required when passing a raw support set")
        supp = tuple(int(i) % L for i in theta)
    counts = Counter((i - j) % L for i in supp for j in supp if i != j)
    return DifferenceMultiset(dict(sorted(counts.items())))


def is_collision_free(theta: Signal) -> bool:
    """True iff every pairwise support difference occurs exactly once."""
    return difference_multiset(theta).is_simple()


def is_collision_free_support(support, L: int) -> bool:
    return difference_multiset(support, L).is_simple()


def _random_collision_free_support(L: int, s: int, rng: np.random.Generator, max_nodes: int) -> list[int]:
    """Randomized depth-first search for a collision-free size-s subset.

    Plain rejection sampling is hopeless here: near the count boundary
    s(s-1) ~ L-1 the acceptance probability drops below 1e-5 (and the
    boundary cases reduce to rare perfect difference sets), so we search
    with backtracking plus forward checking instead.  Candidate order is a
    seeded random permutation, which randomizes the support found.  A fully
    exhausted search tree proves the class empty.
    """
    budget = [max_nodes]

    def attempt(order: list[int]) -> list[int] | None:
        used = np.zeros(L, dtype=bool)
        chosen: list[int] = []

        def new_diffs(x: int) -> set[int] | None:
            ds: set[int] = set()
            for y in chosen:
                d1 = (x - y) % L
                d2 = (y - x) % L
                if used[d1] or used[d2] or d1 == d2 or d1 in ds or d2 in ds:
                    return None
                ds.add(d1)
                ds.add(d2)
            return ds

        def dfs(cands: list[int]) -> bool:
            if len(chosen) == s:
                return True
            if len(cands) < s - len(chosen):
                return False
            for idx, x in enumerate(cands):
                budget[0] -= 1
                if budget[0] < 0:
                    raise SupportSamplingError(
                        f"search budget of {max_nodes} nodes exhausted looking for a "
                        f"collision-free support of size {s} in Z/{L}"
                    )
                ds = new_diffs(x)
                if ds is None:
                    continue
                for d in ds:
                    used[d] = True
                chosen.append(x)
                remaining = [y for y in cands[idx + 1 :] if new_diffs(y) is not None]
                if dfs(remaining):
                    return True
                chosen.pop()
                for d in ds:
                    used[d] = False
            return False

        return list(chosen) if dfs(order) else None

    for _ in range(64):
        result = attempt([int(v) for v in rng.permutation(L)])
        if result is not None:
            return result
        # the tree was exhausted without interruption: no support exists
        raise SupportSamplingError(
            f"no collision-free support of size {s} exists in Z/{L} "
            "(search tree exhausted)"
        )
    raise SupportSamplingError("unreachable")  # pragma: no cover


def sample_collision_free_support(
    spec: SignalClassSpec, seed: int, max_attempts: int = 1_000_000
) -> frozenset[int]:
    """Draw a random collision-free size-s subset of Z/LZ.

    Deterministic given ``seed``; ``max_attempts`` bounds the number of
    search nodes visited.  Raises SupportSamplingError when the budget is
    exhausted or when no such support exists (the count bound
    s(s-1) <= L-1 alone does not guarantee existence).
    """
    rng = np.random.default_rng(seed)
    support = _random_collision_free_support(spec.L, spec.s, rng, max_attempts)
    return frozenset(support)


def sample_class_signal(spec: SignalClassSpec, seed: int, max_attempts: int = 1_000_000) -> Signal:
    """Draw a random class member: collision-free support, uniform magnitudes
    in [m_lo, M_hi], independent random signs.  Deterministic given seed."""
    rng = np.random.default_rng(seed)
    support = _random_collision_free_support(spec.L, spec.s, rng, max_attempts)
    mags = rng.uniform(spec.m_lo, spec.M_hi, size=spec.s)
    signs = rng.choice([-1.0, 1.0], size=spec.s)
    values = np.zeros(spec.L)
    values[np.asarray(support)] = mags * signs
    return Signal(values)


def membership_check(theta: Signal, spec: SignalClassSpec) -> bool:
    """True iff theta is a member of the class given by spec."""
    if theta.L != spec.L:
        return False
    supp = theta.support()
    if len(supp) != spec.s:
        return False
    mags = np.abs(theta.values[list(supp)])
    if np.any(mags < spec.m_lo) or np.any(mags > spec.M_hi):
        return False
    return is_collision_free(theta)


def project_to_class(phi: Signal, spec: SignalClassSpec) -> Signal:
    """Project onto the class: keep the s largest-magnitude coordinates, zero
    the rest, clip kept magnitudes into [m_lo, M_hi] preserving signs.

    Raises CollisionError (carrying one offending difference) when the kept
    support is not collision-free, and ValueError when phi has fewer than s
    nonzero coordinates.
    """
    if phi.L != spec.L:
        raise ValueError(f"length mismatch: {phi.L} vs spec L={spec.L}")
    v = phi.values
    if np.count_nonzero(v) < spec.s:
        raise ValueError(f"need at least s={spec.s} nonzero coordinates, got {np.count_nonzero(v)}")
    # stable tie-break: among equal magnitudes keep the smaller index
    order = np.lexsort((np.arange(phi.L), -np.abs(v)))
    keep = np.sort(order[: spec.s])
    d = difference_multiset(frozenset(int(i) for i in keep), spec.L)
    if not d.is_simple():
        bad = next(r for r, c in sorted(d.counts.items()) if c > 1)
        raise CollisionError(
            f"projected support {sorted(int(i) for i in keep)} has difference "
            f"{bad} with multiplicity {d.counts[bad]}",
            offending_difference=bad,
        )
    out = np.zeros_like(v)
    kept = v[keep]
    clipped = np.clip(np.abs(kept), spec.m_lo, spec.M_hi)
    signs = np.where(kept >= 0, 1.0, -1.0)
    out[keep] = signs * clipped
    return Signal(out)


def signal_to_text(theta: Signal) -> str:
    """Two-line text record: "L=<int>" then comma-separated values (17 sig digits)."""
    vals = ",".join(f"{x:.17g}" for x in theta.values)
    return f"L={theta.L}\n{vals}\n"


def signal_from_text(text: str) -> Signal:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2 or not lines[0].startswith("L="):
        raise ValueError("expected two lines: 'L=<int>' then comma-separated values")
    L = int(lines[0][2:])
    values = np.array([float(x) for x in lines[1].split(",")])
    if values.size != L:
        raise ValueError(f"declared L={L} but found {values.size} values")
    return Signal(values)
