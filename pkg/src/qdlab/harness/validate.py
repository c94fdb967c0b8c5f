"""Fast invariant battery behind ``qdlab validate``.

Each check is cheap (the whole battery runs in well under a minute) and
covers one structural invariant; the CLI exits nonzero if any fails.
"""
from __future__ import annotations

import numpy as np

from .. import evolution, kinetics, wigner
from ..disorder import DisorderEnsembleSpec, moment_report, sample_potential
from ..graphs.pairings import PermutationPairing, count_by_degree, degree_count_bound
from ..lattice import MomentumGrid, shell_table
from ..states import GaussianPacket
from .._kernels import available_backends


def _check_lattice():
    grid = MomentumGrid(16)
    e = grid.dispersion_field
    assert abs(e.min()) < 1e-14 and abs(e.max() - 6.0) < 1e-14
    # dispersion(-k) = dispersion(k): negation is an index permutation
    flipped = e[tuple(np.meshgrid(*[(-np.arange(16)) % 16] * 3, indexing="ij"))]
    assert np.allclose(flipped, e)
    table = shell_table(grid, 0.05)
    dE = table.energies[1] - table.energies[0]
    assert abs(np.sum(table.dos_values) * dE - 1.0) < 1e-3
    D = table.diffusion_matrix(3.0)
    assert np.allclose(D, D.T) and abs(D[0, 1]) < 1e-12


def _check_disorder():
    grid = MomentumGrid(12)
    spec = DisorderEnsembleSpec("bernoulli", 0.5, 7)
    a = sample_potential(spec, grid, 3)
    b = sample_potential(spec, grid, 3)
    assert np.array_equal(a.values, b.values)
    assert set(np.unique(a.values)) <= {-1.0, 1.0}
    rep = moment_report(spec, grid, 4)
    for order in (2, 4, 6):
        assert abs(rep.moment(order)[0] - 1.0) < 1e-12


def _check_evolution():
    grid = MomentumGrid(8)
    packet = GaussianPacket(sigma_x=1.0, x0=(3.5, 3.5, 3.5))
    psi0 = evolution.WaveFunction(packet.position_amplitudes(grid), "position", grid)
    spec = DisorderEnsembleSpec("gaussian", 0.5, 1)
    realization = sample_potential(spec, grid, 0)
    out = evolution.evolve(psi0, realization, 0.5, 1.0, evolution.PropagatorConfig(dt=0.02))
    assert abs(out.norm() - 1.0) < 1e-10
    roundtrip = psi0.to_momentum().to_position()
    assert np.max(np.abs(roundtrip.data - psi0.data)) < 1e-12


def _check_wigner():
    rng = np.random.default_rng(0)
    grid = MomentumGrid(8)
    psi = evolution.WaveFunction(
        rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape),
        "position",
        grid,
    )
    field = wigner.wigner_fourier(psi, 1.0, wigner.full_mode_set(8))
    assert np.max(np.abs(field.velocity_marginal() - psi.momentum_distribution())) < 1e-10
    pm = field.position_marginal()
    assert np.max(np.abs(pm[::2, ::2, ::2] - np.abs(psi.data) ** 2)) < 1e-10


def _check_collision_kernel():
    kernel = kinetics.CollisionKernel(MomentumGrid(8), 0.1)
    M = kernel.dense_generator()
    assert np.max(np.abs(M - M.T)) < 1e-12
    assert np.max(np.abs(M.sum(axis=1))) < 1e-9
    uniform = np.ones(kernel.grid.size)
    assert np.max(np.abs(kernel.step(uniform, 1.5) - uniform)) < 1e-12


def _check_pairings():
    import math

    for n in range(2, 7):
        counts, exact = count_by_degree(n)
        assert exact
        assert sum(counts.values()) == math.factorial(n)
        for D, cnt in counts.items():
            assert cnt <= degree_count_bound(n, D)
        assert PermutationPairing.identity(n).degree == 0
        assert PermutationPairing.reversal(n).degree == 0


def _check_kernels():
    impls = available_backends()
    rng = np.random.default_rng(5)
    omega = rng.standard_normal((64, 4)) + 3.0 - 0.05j * rng.random((64, 4))
    alpha = np.linspace(-2, 8, 128)
    weights = np.exp(-1j * alpha * 3.0) + 0j
    results = [fn(omega, alpha, 0.05, weights) for fn in impls.values()]
    for other in results[1:]:
        assert np.allclose(results[0], other, atol=1e-10)


CHECKS = [
    ("lattice geometry and shell table", _check_lattice),
    ("disorder determinism and moments", _check_disorder),
    ("evolution norm and representation roundtrip", _check_evolution),
    ("wigner identities", _check_wigner),
    ("collision kernel structure", _check_collision_kernel),
    ("pairing combinatorics", _check_pairings),
    ("kernel backends agree", _check_kernels),
]


def run_validation(verbose: bool = True) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            check()
            status = "PASS"
        except Exception as exc:  # noqa: BLE001 - report and continue
            status = f"FAIL ({exc})"
            ok = False
        if verbose:
            print(f"[{status.split()[0]:4s}] {name}" + ("" if status == "PASS" else f" -- {status}"))
    return ok
