import itertools

import numpy as np
import pytest

from mralab.beltway import (
    InconsistentDifferenceSet,
    recover_support,
    supports_equivalent,
)
from mralab.signals import (
    DifferenceMultiset,
    SignalClassSpec,
    difference_multiset,
    sample_collision_free_support,
)


class TestSupportsEquivalent:
    def test_shift(self):
        S = {0, 1, 3}
        assert supports_equivalent(S, {(x + 5) % 7 for x in S}, 7)

    def test_reflection(self):
        S = {0, 1, 3}
        assert supports_equivalent(S, {(-x) % 7 for x in S}, 7)

    def test_nonequivalent_enumerated(self):
        # oracle: enumerate all 14 images of {0,1,3} under shift/reflection
        images = set()
        for t in range(7):
            images.add(frozenset((x + t) % 7 for x in (0, 1, 3)))
            images.add(frozenset((t - x) % 7 for x in (0, 1, 3)))
        assert frozenset({0, 1, 2}) not in images
        assert not supports_equivalent({0, 1, 3}, {0, 1, 2}, 7)

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            supports_equivalent({0, 1}, {0, 1, 2}, 7)


class TestRecoverSupport:
    def test_small_instance_exhaustive_oracle(self):
        L, s = 7, 3
        truth = frozenset({0, 1, 3})
        d = difference_multiset(truth, L)
        sol = recover_support(d, L, s)
        # oracle: exhaustive search over all 3-subsets of Z/7
        expected = [
            frozenset(c)
            for c in itertools.combinations(range(L), s)
            if difference_multiset(frozenset(c), L).counts == d.counts and 0 in c
        ]
        assert sorted(map(sorted, sol.candidates)) == sorted(map(sorted, expected))
        assert any(supports_equivalent(c, truth, L) for c in sol.candidates)

    def test_round_trip_random_supports(self):
        combos = [(7, 48), (8, 57), (9, 73)]
        seed = 0
        for s, L in combos:
            spec = SignalClassSpec(L=L, s=s, m_lo=0.75, M_hi=1.0, eps=0.1)
            for _ in range(3):
                truth = sample_collision_free_support(spec, seed)
                seed += 1
                sol = recover_support(difference_multiset(truth, L), L, s)
                assert all(0 in c for c in sol.candidates)
                # the truth is recovered: some candidate is equivalent to it
                assert any(supports_equivalent(c, truth, L) for c in sol.candidates)
                # every candidate reproduces the input multiset exactly
                for c in sol.candidates:
                    assert difference_multiset(c, L).counts == difference_multiset(truth, L).counts

    def test_homometric_pair_at_s7(self):
        # cyclic counterexample to uniqueness at s=7: same multiset, not
        # shift/reflection equivalent, so canonical must be False
        L = 48
        A = frozenset({0, 1, 3, 15, 20, 38, 42})
        B = frozenset({0, 1, 4, 6, 13, 23, 34})
        dA = difference_multiset(A, L)
        assert dA.counts == difference_multiset(B, L).counts
        assert not supports_equivalent(A, B, L)
        sol = recover_support(dA, L, 7)
        assert not sol.canonical
        assert A in sol.candidates and B in sol.candidates

    def test_multiplicity_two_rejected(self):
        d = difference_multiset(frozenset({0, 1, 2}), 7)  # has multiplicity 2
        with pytest.raises(ValueError):
            recover_support(d, 7, 3)

    def test_wrong_total_rejected(self):
        d = difference_multiset(frozenset({0, 1, 3}), 7)
        with pytest.raises(ValueError):
            recover_support(d, 7, 4)

    def test_inconsistent_multiset_fails(self):
        # residues +-{1,2,4} mod 12: any triple {0,a,b} realizes +-{a, b, b-a}
        # and no assignment from {1,2,4} closes up (1+2, 1+4, 2+4 all escape)
        counts = {1: 1, 11: 1, 2: 1, 10: 1, 4: 1, 8: 1}
        with pytest.raises(InconsistentDifferenceSet):
            recover_support(DifferenceMultiset(counts), 12, 3)

    def test_asymmetric_multiset_fails(self):
        counts = {1: 1, 2: 1, 3: 1, 4: 1, 5: 1, 7: 1}
        with pytest.raises(InconsistentDifferenceSet):
            recover_support(DifferenceMultiset(counts), 12, 3)

    def test_bloom_regime_ambiguity(self):
        # classic homometric pair: equal difference multisets, inequivalent sets
        L = 40
        A = frozenset({0, 1, 4, 10, 12, 17})
        B = frozenset({0, 1, 8, 11, 13, 17})
        dA = difference_multiset(A, L)
        assert dA.counts == difference_multiset(B, L).counts
        assert not supports_equivalent(A, B, L)
        sol = recover_support(dA, L, 6)
        assert not sol.canonical
        assert any(supports_equivalent(c, A, L) for c in sol.candidates)
        assert any(supports_equivalent(c, B, L) for c in sol.candidates)

    def test_deterministic(self):
        L, s = 48, 7
        spec = SignalClassSpec(L=L, s=s, m_lo=0.75, M_hi=1.0, eps=0.1)
        truth = sample_collision_free_support(spec, 123)
        d = difference_multiset(truth, L)
        s1 = recover_support(d, L, s)
        s2 = recover_support(d, L, s)
        assert s1.candidates == s2.candidates
        assert s1.canonical == s2.canonical
