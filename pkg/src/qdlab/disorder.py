"""Random on-site potentials with normalized moments.

Both supported laws have vanishing odd moments and unit variance:

* ``gaussian`` -- standard normal amplitudes;
* ``bernoulli`` -- symmetric signs, ``v in {-1, +1}``.

Realizations are reproducible functions of ``(master_seed, index)`` via a
64-bit hash feeding a counter-based generator (Philox), so ensembles are
independent of iteration order and of how work is distributed.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import MomentumGrid

RNG_ALGORITHM = "philox4x64"

_KINDS = ("gaussian", "bernoulli")


def derive_seed(master_seed: int, index: int) -> int:
    """Strong 64-bit hash of ``(master_seed, index)``."""
    payload = f"qdlab:{master_seed}:{index}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class DisorderEnsembleSpec:
    """Disorder law, coupling strength and reproducibility seed."""

    kind: str = "gaussian"
    coupling: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown disorder kind {self.kind!r}; use one of {_KINDS}")
        if self.coupling < 0:
            raise ValueError("coupling must be nonnegative")


@dataclass(frozen=True)
class DisorderRealization:
    """One sampled potential field (unit variance; coupling applied later)."""

    values: np.ndarray
    realization_index: int
    derived_seed: int
    kind: str

    @cached_property
    def content_hash64(self) -> int:
        """64-bit content hash recorded in result files for audit."""
        digest = hashlib.blake2b(self.values.tobytes(), digest_size=8).digest()
        return int.from_bytes(digest, "little")


def sample_potential(
    spec: DisorderEnsembleSpec, grid: MomentumGrid, index: int
) -> DisorderRealization:
    """Draw realization ``index`` of the ensemble on the given lattice."""
    seed = derive_seed(spec.master_seed, index)
    rng = np.random.Generator(np.random.Philox(key=seed))
    if spec.kind == "gaussian":
        values = rng.standard_normal(grid.shape)
    else:
        values = rng.integers(0, 2, size=grid.shape) * 2.0 - 1.0
    values.setflags(write=False)
    return DisorderRealization(
        values=values, realization_index=index, derived_seed=seed, kind=spec.kind
    )


@dataclass(frozen=True)
class MomentReport:
    """Empirical moments ``m_1 .. m_6`` with standard errors."""

    means: np.ndarray  # shape (6,)
    stderrs: np.ndarray  # shape (6,)
    count: int

    def moment(self, order: int) -> tuple[float, float]:
        return float(self.means[order - 1]), float(self.stderrs[order - 1])


def moment_report(
    spec: DisorderEnsembleSpec, grid: MomentumGrid, count: int
) -> MomentReport:
    """Estimate the first six moments from ``count`` realizations.

    Statistics are accumulated per realization (then averaged), so the report
    does not depend on how realizations are scheduled.
    """
    if count < 2:
        raise ValueError("need at least two realizations for standard errors")
    per_real = np.empty((count, 6))
    for index in range(count):
        v = sample_potential(spec, grid, index).values.ravel()
        for p in range(1, 7):
            per_real[index, p - 1] = np.mean(v**p)
    means = per_real.mean(axis=0)
    stderrs = per_real.std(axis=0, ddof=1) / np.sqrt(count)
    return MomentReport(means=means, stderrs=stderrs, count=count)
