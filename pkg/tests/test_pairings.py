import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdlab.graphs.pairings import (
    PermutationPairing,
    count_by_degree,
    degree,
    degree_count_bound,
    sample_permutations,
)


def brute_force_degree(sigma):
    # independent oracle: literal index classification
    count = 0
    for i in range(len(sigma) - 1):
        diff = sigma[i + 1] - sigma[i]
        if diff != 1 and diff != -1:
            count += 1
    return count


def test_identity_and_reversal_are_degree_zero():
    for n in range(1, 9):
        assert PermutationPairing.identity(n).degree == 0
        assert PermutationPairing.reversal(n).degree == 0


def test_s4_histogram_from_brute_force():
    histogram = {}
    for perm in itertools.permutations(range(4)):
        histogram[brute_force_degree(perm)] = histogram.get(brute_force_degree(perm), 0) + 1
    counts, exact = count_by_degree(4)
    assert exact
    assert counts == histogram
    assert sum(counts.values()) == 24


@given(st.permutations(list(range(6))))
@settings(max_examples=200, deadline=None)
def test_degree_matches_oracle_and_range(perm):
    sigma = tuple(perm)
    d = degree(sigma)
    assert d == brute_force_degree(sigma)
    assert 0 <= d <= len(sigma) - 1


@given(st.permutations(list(range(6))))
@settings(max_examples=200, deadline=None)
def test_degree_invariances(perm):
    sigma = PermutationPairing(tuple(perm))
    n = sigma.n
    assert sigma.inverse().degree == sigma.degree
    reversal = tuple(range(n - 1, -1, -1))
    conjugated = tuple(n - 1 - sigma.sigma[n - 1 - i] for i in range(n))
    assert degree(conjugated) == sigma.degree
    composed = tuple(sigma.sigma[n - 1 - i] for i in range(n))  # sigma o reversal
    assert degree(composed) == sigma.degree


def test_count_by_degree_totals():
    for n in range(1, 9):
        counts, exact = count_by_degree(n)
        assert exact
        assert sum(counts.values()) == math.factorial(n)
        if n >= 2:
            assert counts[0] >= 2


def test_counting_bound_boundary_convention():
    # the 2(2n)^D bound holds bin by bin under the boundary-inclusive degree
    for n in range(2, 9):
        counts, exact = count_by_degree(n, convention="boundary")
        assert exact
        assert sum(counts.values()) == math.factorial(n)
        for D, cnt in counts.items():
            assert cnt <= degree_count_bound(n, D)


def test_counting_bound_interior_sensitivity():
    # documented convention sensitivity: the interior definition exceeds the
    # bound in exactly one bin at n = 8 (34 > 32), nowhere below
    for n in range(2, 8):
        counts, _ = count_by_degree(n)
        assert all(cnt <= degree_count_bound(n, D) for D, cnt in counts.items())
    counts8, _ = count_by_degree(8)
    assert counts8[1] == 34
    assert degree_count_bound(8, 1) == 32


def test_boundary_degree_identity_reversal():
    from qdlab.graphs.pairings import boundary_degree

    for n in range(2, 8):
        assert boundary_degree(PermutationPairing.identity(n)) == 0
        assert boundary_degree(PermutationPairing.reversal(n)) == 0
    assert boundary_degree((1, 2, 0)) >= degree((1, 2, 0))


def test_count_by_degree_sampled_estimate():
    counts, exact = count_by_degree(12, sample_size=20_000)
    assert not exact
    assert sum(counts.values()) == pytest.approx(math.factorial(12), rel=1e-9)


def test_sample_permutations_deterministic_and_distinct():
    a = sample_permutations(5, 10, seed=3)
    b = sample_permutations(5, 10, seed=3)
    assert [p.sigma for p in a] == [p.sigma for p in b]
    assert len({p.sigma for p in a}) == 10
    assert a[0].sigma == (0, 1, 2, 3, 4)


def test_invalid_permutation_rejected():
    with pytest.raises(ValueError):
        PermutationPairing((0, 0, 2))
