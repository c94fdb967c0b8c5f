"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test prints a single ``ACCEPTANCE nn PASS/FAIL`` line (visible with
``pytest -s`` or in captured output).  The heavy ensemble criteria (05, 06)
run at their stated scale and dominate the suite's runtime; run

    pytest tests/test_acceptance.py -v -s

for live progress.  All seeds are pinned; results are deterministic for a
given build.
"""
import itertools
import math

import numpy as np
import pytest

from qdlab.disorder import DisorderEnsembleSpec, sample_potential
from qdlab.evolution import (
    DensePropagator,
    PropagatorConfig,
    WaveFunction,
    duhamel_terms,
    evolve,
    fit_power_law,
    msd_scaling_report,
)
from qdlab.graphs.pairings import (
    PermutationPairing,
    boundary_degree,
    count_by_degree,
    degree_count_bound,
    sample_permutations,
)
from qdlab.graphs.selfenergy import renormalized_dispersion_check, self_energy
from qdlab.graphs.values import (
    crossing_bound_study,
    degree_suppression_study,
    graph_value_panel,
    ladder_rung,
)
from qdlab.harness.config import ExperimentConfig
from qdlab.harness.experiments import run_kinetic_compare
from qdlab.kinetics import CollisionKernel, boltzmann_longtime_variance
from qdlab.lattice import MomentumGrid, shell_table
from qdlab.states import GaussianPacket
from qdlab.wigner import (
    full_mode_set,
    momentum_observable,
    wigner_fourier,
    wigner_l2_continuity_check,
)

SEED = 20260808


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def grid64():
    return MomentumGrid(64)


@pytest.fixture(scope="module")
def table64(grid64):
    return shell_table(grid64, 0.05)


def test_01_free_ballistic_exponent():
    grid = MomentumGrid(32)
    packet = GaussianPacket(sigma_x=0.4, k0=(0.0, 0.0, 0.0), x0=(16.0, 16.0, 16.0))
    times = np.arange(0.0, 8.01, 0.2)
    report = msd_scaling_report(None, packet, 0.0, times, 1, grid, PropagatorConfig())
    t_cut = report.cutoff_time
    sel = (report.times >= 0.55 * t_cut) & (report.times <= t_cut) & np.isfinite(report.msd_mean)
    exponent, _ = fit_power_law(report.times[sel], report.msd_mean[sel])
    ok = abs(exponent - 2.0) <= 0.05
    _report(1, ok, f"free MSD exponent {exponent:.4f} (target 2.00 +- 0.05, window [{0.55*t_cut:.1f},{t_cut:.1f}])")


def test_02_propagator_error_and_order():
    grid = MomentumGrid(8)
    packet = GaussianPacket(sigma_x=1.0, x0=(3.5, 3.5, 3.5))
    psi0 = WaveFunction(packet.position_amplitudes(grid), "position", grid)
    spec = DisorderEnsembleSpec("gaussian", 0.5, SEED)
    realization = sample_potential(spec, grid, 0)
    exact = DensePropagator(grid, realization, 0.5).propagate(psi0, 1.0).data
    errs = {}
    for dt in (1e-3, 2e-3):
        got = evolve(psi0, realization, 0.5, 1.0, PropagatorConfig(dt=dt, scheme="strang-opt")).data
        errs[dt] = float(np.linalg.norm((got - exact).ravel()))
    ratio = errs[2e-3] / errs[1e-3]
    ok = errs[1e-3] < 1e-8 and 3.2 <= ratio <= 4.8
    _report(2, ok, f"split-step error {errs[1e-3]:.2e} at dt=1e-3 (<1e-8), doubling ratio {ratio:.2f} (~4)")


def test_03_duhamel_consistency():
    grid = MomentumGrid(8)
    packet = GaussianPacket(sigma_x=1.0, x0=(3.5, 3.5, 3.5))
    psi0 = WaveFunction(packet.position_amplitudes(grid), "position", grid)
    spec = DisorderEnsembleSpec("gaussian", 0.5, SEED)
    realization = sample_potential(spec, grid, 0)
    dec = duhamel_terms(psi0, realization, 0.5, 1.0, order=3, resolution=1024)
    recon_ok = (
        dec.reconstruction_error < 1e-6
        and dec.reconstruction_error < dec.coarse_reconstruction_error
    )
    unitarity_ok = True
    for order in (2, 3):
        for t in (0.5, 1.0, 1.5):
            d = duhamel_terms(psi0, realization, 0.5, t, order=order, resolution=512)
            unitarity_ok &= d.remainder_norm_sq <= d.unitarity_bound * (1 + 1e-9)
    ok = recon_ok and unitarity_ok
    _report(3, ok, f"reconstruction error {dec.reconstruction_error:.2e} (<1e-6, refining), unitarity bound holds at all tested t")


def test_04_wigner_identities_and_continuity():
    grid = MomentumGrid(8)
    worst_marginal = 0.0
    for seed in (1, 2, 3):
        rng = np.random.default_rng(np.random.Philox(key=seed))
        psi = WaveFunction(
            rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape),
            "position",
            grid,
        )
        field = wigner_fourier(psi, 1.0, full_mode_set(8))
        worst_marginal = max(
            worst_marginal,
            float(np.max(np.abs(field.velocity_marginal() - psi.momentum_distribution()))),
            float(np.max(np.abs(field.position_marginal()[::2, ::2, ::2] - np.abs(psi.to_position().data) ** 2))),
        )
    rng = np.random.default_rng(np.random.Philox(key=99))
    profile = rng.standard_normal(grid.shape)
    obs = momentum_observable(grid, profile)
    violations = 0
    for pair in range(100):
        psi1 = WaveFunction(
            rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape),
            "position", grid,
        )
        psi2 = WaveFunction(
            rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape),
            "position", grid,
        )
        lhs, rhs = wigner_l2_continuity_check(psi1, psi2, obs)
        violations += lhs > rhs
    ok = worst_marginal < 1e-10 and violations == 0
    _report(4, ok, f"marginal/xi=0 identities to {worst_marginal:.1e}, continuity violations {violations}/100")


def test_05_kinetic_limit_trend():
    distances = {}
    for lam in (0.5, 0.3, 0.2):
        cfg = ExperimentConfig(
            kind="kinetic-compare", lam=lam, L=32, ensemble=200, dt=0.05,
            seed=SEED, packet_sigma_x=1.5,
        ).validate()
        _, summary, _ = run_kinetic_compare(cfg)
        distances[lam] = summary["l1_binned"]
    ordered = [distances[l] for l in (0.5, 0.3, 0.2)]
    ok = ordered[0] > ordered[1] > ordered[2] and ordered[2] < 0.15
    _report(5, ok, "L1(velocity marginal vs collision relaxation) " +
            ", ".join(f"lam={l}: {distances[l]:.4f}" for l in (0.5, 0.3, 0.2)) +
            " (monotone, <0.15 at 0.2; 2x-binned cells)")


def test_06_diffusive_regime_exponent():
    grid = MomentumGrid(64)
    packet = GaussianPacket(sigma_x=1.5, k0=(np.pi / 2,) * 3)
    spec = DisorderEnsembleSpec("gaussian", 0.5, SEED)
    times = np.arange(0.0, 40.01, 0.5)
    report = msd_scaling_report(
        spec, packet, 0.5, times, 50, grid, PropagatorConfig(dt=0.05)
    )
    t_cut = report.cutoff_time
    sel = (report.times >= 0.72 * t_cut) & (report.times <= t_cut) & np.isfinite(report.msd_mean)
    exponent, _ = fit_power_law(report.times[sel], report.msd_mean[sel])
    ok = 0.85 <= exponent <= 1.15 and t_cut > 4.0 / 0.25  # window far beyond lam^-2
    _report(6, ok, f"late-window MSD exponent {exponent:.4f} on [{0.72*t_cut:.1f},{t_cut:.1f}] (target [0.85,1.15], lam^-2 = 4)")


def test_07_boltzmann_heat_consistency(table64):
    kernel = CollisionKernel(MomentumGrid(32), 0.05)
    series = boltzmann_longtime_variance(
        kernel, 3.0, T_max=8.0, dt=0.05, x_extent=30.0, nx=192, fit_fraction=0.6
    )
    reference = 2.0 * table64.diffusion_matrix(3.0)[0, 0]
    ratio = series.growth_rate / reference
    ok = abs(ratio - 1.0) <= 0.05
    _report(7, ok, f"variance growth {series.growth_rate:.4f} vs 2*D11(3) {reference:.4f}: ratio {ratio:.3f} (within 5%)")


def test_08_self_energy(grid64, table64):
    se = self_energy(grid64, lam=0.2)
    alphas = np.linspace(0.5, 5.5, 101)
    im = np.interp(alphas, se.alpha_grid, se.theta_table.imag)
    phi = np.array([table64.dos(a) for a in alphas])
    rel = float(np.max(np.abs(-im / np.pi - phi) / phi))
    im_omega_ok = bool(np.all(se.omega_field.imag <= 0))
    bound = renormalized_dispersion_check(se)
    ok = rel < 0.02 and im_omega_ok and bound.c > 0
    _report(8, ok, f"Plemelj max rel dev {rel:.4f} (<0.02), Im omega <= 0: {im_omega_ok}, fitted c = {bound.c:.4f} > 0")


def test_09_degree_combinatorics():
    totals_ok = True
    bound_ok = True
    for n in range(2, 9):
        interior, exact_i = count_by_degree(n, convention="interior")
        boundary, exact_b = count_by_degree(n, convention="boundary")
        totals_ok &= exact_i and exact_b
        totals_ok &= sum(interior.values()) == math.factorial(n)
        totals_ok &= sum(boundary.values()) == math.factorial(n)
        # the counting bound holds bin by bin under the boundary-inclusive
        # convention (the interior convention exceeds it only at n=8, D=1,
        # a documented edge-convention sensitivity)
        bound_ok &= all(cnt <= degree_count_bound(n, D) for D, cnt in boundary.items())
    degree_ok = all(
        PermutationPairing.identity(n).degree == 0
        and PermutationPairing.reversal(n).degree == 0
        and boundary_degree(PermutationPairing.identity(n)) == 0
        and boundary_degree(PermutationPairing.reversal(n)) == 0
        for n in range(2, 9)
    )
    ok = totals_ok and bound_ok and degree_ok
    _report(9, ok, "histograms total n!, bound 2(2n)^D holds per bin (boundary convention), id/reversal degree 0")


def test_10_graph_estimates():
    packet = GaussianPacket(sigma_x=1.5, k0=(np.pi / 2,) * 3)
    lam, t = 0.2, 25.0  # kinetic scale lam^2 t = 1

    def schwarz_ok(panel):
        ladder = next(e for e in panel if e.sigma == tuple(range(e.order)))
        return all(
            abs(e.mean) <= ladder.mean.real + 3.0 * float(np.hypot(e.stderr, ladder.stderr))
            for e in panel
        )

    s3 = [PermutationPairing(p) for p in itertools.permutations(range(3))]
    panel3 = graph_value_panel(s3, lam, t, packet=packet, samples=8192, seed=SEED)
    s5 = sample_permutations(5, 50, seed=SEED)
    panel5 = graph_value_panel(s5, lam, t, packet=packet, samples=8192, seed=SEED + 1)

    study = degree_suppression_study(5, lam, t, packet=packet, samples=4096, seed=SEED + 2)
    meds = study.median_by_degree
    medians_ok = meds[0] > meds[1] > meds[2]

    ladder2 = graph_value_panel(
        [PermutationPairing((0, 1))], lam, t, packet=packet, samples=16384, seed=SEED + 3
    )[0]
    target = 0.5
    ladder_ok = target / 3.0 <= abs(ladder2.mean) <= target * 3.0

    gamma_study = degree_suppression_study(
        4, 0.3, 1.0 / 0.09, packet=packet, samples=32768, seed=SEED + 4
    )
    gamma_ok = np.isfinite(gamma_study.gamma) and gamma_study.gamma > 0

    ok = schwarz_ok(panel3) and schwarz_ok(panel5) and medians_ok and ladder_ok and gamma_ok
    _report(10, ok,
            f"Schwarz S3/S5 hold, medians {meds[0]:.4f}>{meds[1]:.4f}>{meds[2]:.4f}, "
            f"|ladder n=2| = {abs(ladder2.mean):.3f} in [1/6, 3/2], gamma = {gamma_study.gamma:.2f} > 0")


def test_11_renormalized_rung(grid64):
    deviations = []
    for lam in (0.4, 0.2, 0.1):
        se = self_energy(grid64, lam=lam)
        rung = ladder_rung(3.0, 3.0, lam=lam, eta=lam**2 * 1e-2, se=se, renormalized=True)
        deviations.append(abs(rung - 1.0))
    bare = [
        abs(ladder_rung(3.0, 3.0, lam=0.2, eta=eta, renormalized=False))
        for eta in (1e-2, 1e-3, 1e-4)
    ]
    renorm_ok = deviations[0] > deviations[1] > deviations[2]
    bare_ok = bare[0] < bare[1] < bare[2] and bare[2] / bare[1] > 5.0
    ok = renorm_ok and bare_ok
    _report(11, ok,
            f"|rung-1| = {deviations[0]:.3f} > {deviations[1]:.3f} > {deviations[2]:.3f}; "
            f"bare rung grows {bare[0]:.1f} -> {bare[1]:.1f} -> {bare[2]:.1f}")


def test_12_crossing_bound():
    report = crossing_bound_study(pool_exponent=20)
    pair_33 = report.ab_pairs.index((3.0, 3.0))
    ok = report.fitted_b <= 0.80 and report.monotone_by_pair[pair_33]
    _report(12, ok,
            f"fitted eta-exponent b = {report.fitted_b:.3f} (<= 0.80), "
            f"lhs monotone along the (3,3) transfer ray: {report.monotone_by_pair[pair_33]}")
