"""Pairing permutations and their degree combinatorics.

A pairing of the ``n`` collision events of a state line with the ``n``
events of its conjugate line is a permutation ``sigma`` of ``{0, .., n-1}``.
Adjacent index ``i`` (``0 <= i < n-1``) is classified as

* ``ladder`` when ``sigma(i+1) = sigma(i) + 1``,
* ``antiladder`` when ``sigma(i+1) = sigma(i) - 1``,
* ``other`` otherwise,

and the degree ``d(sigma)`` counts the ``other`` indices.  The identity and
the full reversal have degree zero.  The number of permutations of degree D
is bounded by ``2 (2n)^D``, which :func:`count_by_degree` verifies
exhaustively for small ``n``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PermutationPairing:
    """A permutation with cached adjacent-index classification."""

    sigma: tuple

    def __post_init__(self):
        if sorted(self.sigma) != list(range(len(self.sigma))):
            raise ValueError(f"not a permutation of 0..{len(self.sigma)-1}: {self.sigma}")

    @property
    def n(self) -> int:
        return len(self.sigma)

    @cached_property
    def index_classes(self) -> tuple:
        out = []
        s = self.sigma
        for i in range(self.n - 1):
            step = s[i + 1] - s[i]
            out.append("ladder" if step == 1 else "antiladder" if step == -1 else "other")
        return tuple(out)

    @cached_property
    def degree(self) -> int:
        return sum(1 for c in self.index_classes if c == "other")

    @classmethod
    def identity(cls, n: int) -> "PermutationPairing":
        return cls(tuple(range(n)))

    @classmethod
    def reversal(cls, n: int) -> "PermutationPairing":
        return cls(tuple(range(n - 1, -1, -1)))

    def inverse(self) -> "PermutationPairing":
        inv = [0] * self.n
        for i, v in enumerate(self.sigma):
            inv[v] = i
        return PermutationPairing(tuple(inv))

    def one_line(self) -> str:
        return "".join(str(v) for v in self.sigma) if self.n <= 10 else ",".join(map(str, self.sigma))


def degree(sigma) -> int:
    """Degree of a permutation given as a sequence (interior convention)."""
    if isinstance(sigma, PermutationPairing):
        return sigma.degree
    s = np.asarray(sigma, dtype=int)
    if s.size <= 1:
        return 0
    steps = np.abs(np.diff(s))
    return int(np.sum(steps != 1))


def boundary_degree(sigma) -> int:
    """Degree with the two boundary junctions included.

    The pairing lines attach to fixed external vertices, so the junctions
    before the first and after the last collision also carry a
    ladder/antiladder classification: the entry junction is good when the
    permutation starts at either extreme value (ladder start ``sigma(1)=1``
    or antiladder start ``sigma(1)=n``), the exit junction when it ends at
    an extreme.  Identity and reversal still have degree zero; generic
    permutations gain up to two units relative to the interior convention.
    Under this convention the counting bound ``2(2n)^D`` holds bin by bin
    (the interior convention violates it in the ``D=1`` bin from ``n=8``).
    """
    if isinstance(sigma, PermutationPairing):
        sigma = sigma.sigma
    s = np.asarray(sigma, dtype=int)
    n = s.size
    if n == 0:
        return 0
    d = degree(s)
    if s[0] not in (0, n - 1):
        d += 1
    if s[-1] not in (0, n - 1):
        d += 1
    return int(d)


def degree_count_bound(n: int, D: int) -> float:
    """Counting bound ``2 (2n)^D`` on permutations of degree D."""
    return 2.0 * (2.0 * n) ** D


def count_by_degree(
    n: int, rng_seed: int = 0, sample_size: int = 200_000, convention: str = "interior"
):
    """Histogram ``{D: count}`` of degrees over the symmetric group.

    Exhaustive for ``n <= 10``; beyond that a sampled estimate scaled to
    ``n!`` is returned together with ``exact=False``.  ``convention``
    selects the interior definition (default) or the boundary-inclusive one
    of :func:`boundary_degree`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if convention not in ("interior", "boundary"):
        raise ValueError("convention must be 'interior' or 'boundary'")
    histogram = np.zeros(n + 2, dtype=float)
    if n <= 10:
        chunk = []
        for perm in itertools.permutations(range(n)):
            chunk.append(perm)
            if len(chunk) == 100_000:
                _accumulate(np.asarray(chunk, dtype=np.int8), histogram, convention)
                chunk = []
        if chunk:
            _accumulate(np.asarray(chunk, dtype=np.int8), histogram, convention)
        return {D: int(histogram[D]) for D in range(histogram.size) if histogram[D]}, True
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    total = float(math.factorial(n))
    batch = np.stack([rng.permutation(n) for _ in range(sample_size)])
    _accumulate(batch.astype(np.int16), histogram, convention)
    scale = total / sample_size
    return {D: histogram[D] * scale for D in range(histogram.size) if histogram[D]}, False


def _accumulate(batch: np.ndarray, histogram: np.ndarray, convention: str) -> None:
    batch32 = batch.astype(np.int32)
    steps = np.abs(np.diff(batch32, axis=1))
    degrees = np.sum(steps != 1, axis=1)
    if convention == "boundary":
        n = batch.shape[1]
        degrees = degrees + ((batch32[:, 0] != 0) & (batch32[:, 0] != n - 1))
        degrees = degrees + ((batch32[:, -1] != 0) & (batch32[:, -1] != n - 1))
    histogram += np.bincount(degrees, minlength=histogram.size)


def sample_permutations(n: int, count: int, seed: int = 0) -> list:
    """Deterministic sample of distinct permutations (identity included)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    seen = {tuple(range(n))}
    out = [PermutationPairing(tuple(range(n)))]
    guard = 0
    while len(out) < count and guard < 100 * count:
        guard += 1
        perm = tuple(int(x) for x in rng.permutation(n))
        if perm not in seen:
            seen.add(perm)
            out.append(PermutationPairing(perm))
    return out
