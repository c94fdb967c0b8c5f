import numpy as np
import pytest

from qdlab.disorder import DisorderEnsembleSpec
from qdlab.errors import ResourceExceeded, ToleranceExceeded
from qdlab.evolution import (
    DensePropagator,
    PropagatorConfig,
    WaveFunction,
    dense_hamiltonian,
    duhamel_terms,
    energy,
    evolve,
    msd,
    msd_scaling_report,
    observe_trajectory,
)
from qdlab.lattice import MomentumGrid
from qdlab.states import GaussianPacket


def test_representation_roundtrip(random_state8):
    back = random_state8.to_momentum().to_position()
    assert np.max(np.abs(back.data - random_state8.data)) < 1e-12
    assert random_state8.to_momentum().norm() == pytest.approx(random_state8.norm())


def test_free_evolution_exact_phases(grid8, packet8):
    t = 1.7
    out = evolve(packet8, None, 0.0, t).to_momentum()
    expected = packet8.to_momentum().data * np.exp(-1j * t * grid8.dispersion_field)
    assert np.max(np.abs(out.data - expected)) < 1e-12


def test_zero_time_identity(packet8, realization8):
    out = evolve(packet8, realization8, 0.5, 0.0)
    assert np.array_equal(out.data, packet8.data)


def test_strang_second_order_and_accuracy(grid8, packet8, realization8):
    dense = DensePropagator(grid8, realization8, 0.5)
    exact = dense.propagate(packet8, 1.0).to_position().data
    errs = {}
    for dt in (4e-3, 2e-3):
        cfg = PropagatorConfig(dt=dt, scheme="strang")
        got = evolve(packet8, realization8, 0.5, 1.0, cfg).to_position().data
        errs[dt] = np.linalg.norm((got - exact).ravel())
    assert errs[4e-3] / errs[2e-3] == pytest.approx(4.0, rel=0.15)


def test_optimized_split_reaches_tight_error(grid8, packet8, realization8):
    dense = DensePropagator(grid8, realization8, 0.5)
    exact = dense.propagate(packet8, 1.0).to_position().data
    got = evolve(
        packet8, realization8, 0.5, 1.0, PropagatorConfig(dt=2e-3, scheme="strang-opt")
    ).to_position().data
    assert np.linalg.norm((got - exact).ravel()) < 4e-8


def test_chebyshev_machine_precision(grid8, packet8, realization8):
    dense = DensePropagator(grid8, realization8, 0.5)
    exact = dense.propagate(packet8, 2.3).to_position().data
    got = evolve(
        packet8, realization8, 0.5, 2.3, PropagatorConfig(scheme="chebyshev", tolerance=1e-13)
    ).to_position().data
    assert np.linalg.norm((got - exact).ravel()) < 1e-11


def test_norm_and_energy_conservation(grid8, packet8, realization8):
    cfg = PropagatorConfig(dt=0.02, scheme="strang")
    e0 = energy(packet8, realization8, 0.5)
    out = evolve(packet8, realization8, 0.5, 2.0, cfg)
    assert abs(out.norm() - 1.0) < 1e-10
    assert energy(out, realization8, 0.5) == pytest.approx(e0, abs=2e-4)
    exact = evolve(
        packet8, realization8, 0.5, 2.0, PropagatorConfig(scheme="chebyshev", tolerance=1e-12)
    )
    assert energy(exact, realization8, 0.5) == pytest.approx(e0, abs=1e-9)


def test_msd_point_mass(grid8):
    data = np.zeros(grid8.shape, dtype=complex)
    data[2, 5, 1] = 1.0
    assert msd(WaveFunction(data, "position", grid8)) == pytest.approx(0.0, abs=1e-12)


def test_msd_translation_covariance(grid16):
    pk = GaussianPacket(sigma_x=1.2, x0=(8.0, 8.0, 8.0))
    psi = WaveFunction(pk.position_amplitudes(grid16), "position", grid16)
    value = msd(psi)
    shifted = WaveFunction(np.roll(psi.data, (5, 11, 3), axis=(0, 1, 2)), "position", grid16)
    assert msd(shifted) == pytest.approx(value, rel=1e-10)


def test_free_ballistic_slope(grid16):
    pk = GaussianPacket(sigma_x=0.4, x0=(8.0, 8.0, 8.0))
    psi0 = WaveFunction(pk.position_amplitudes(grid16), "position", grid16)
    times = np.linspace(1.5, 3.2, 8)
    rows = observe_trajectory(psi0, None, 0.0, times, PropagatorConfig(), {"msd": msd})
    slope = np.polyfit(np.log(rows["t"]), np.log(rows["msd"]), 1)[0]
    assert 1.85 <= slope <= 2.05


def test_localization_saturation():
    grid = MomentumGrid(12)
    pk = GaussianPacket(sigma_x=1.0, x0=(6.0, 6.0, 6.0), k0=(np.pi / 2,) * 3)
    spec = DisorderEnsembleSpec("gaussian", 8.0, 21)
    report = msd_scaling_report(
        spec, pk, 8.0, np.arange(0.0, 8.1, 0.4), 4, grid, PropagatorConfig(dt=0.02),
        windows=[(4.0, 8.0)],
    )
    assert report.fits, "no usable window"
    assert abs(report.fits[0].exponent) < 0.3


def test_dense_hamiltonian_guard():
    with pytest.raises(ResourceExceeded):
        dense_hamiltonian(MomentumGrid(32), None, 0.0)


def test_dense_hamiltonian_matches_operator(grid8, realization8, random_state8):
    H = dense_hamiltonian(grid8, realization8, 0.5)
    assert np.allclose(H, H.T)
    psi = random_state8.to_position().data
    via_fft = (
        np.fft.ifftn(grid8.dispersion_field * np.fft.fftn(psi))
        + 0.5 * realization8.values * psi
    )
    assert np.allclose((H @ psi.ravel()).reshape(grid8.shape), via_fft, atol=1e-10)


# ---------------------------------------------------------------------------
# truncated expansion


def test_duhamel_zero_coupling(grid8, packet8, realization8):
    dec = duhamel_terms(packet8, realization8, 0.0, 1.0, order=2, resolution=64)
    assert dec.terms[1].norm() < 1e-14
    assert dec.remainder.norm() < 1e-14
    free = evolve(packet8, None, 0.0, 1.0).to_position().data
    assert np.max(np.abs(dec.terms[0].to_position().data - free)) < 1e-12


def test_duhamel_zeroth_term_is_free(grid8, packet8, realization8):
    dec = duhamel_terms(packet8, realization8, 0.5, 0.8, order=2, resolution=128)
    free = evolve(packet8, None, 0.0, 0.8).to_position().data
    assert np.max(np.abs(dec.terms[0].to_position().data - free)) < 1e-12


def test_duhamel_reconstruction_refines(grid8, packet8, realization8):
    dec = duhamel_terms(packet8, realization8, 0.5, 1.0, order=3, resolution=256)
    assert dec.reconstruction_error < dec.coarse_reconstruction_error
    assert dec.coarse_reconstruction_error / dec.reconstruction_error == pytest.approx(
        4.0, rel=0.4
    )
    assert dec.reconstruction_error < 1e-4


def test_duhamel_unitarity_bound(grid8, packet8, realization8):
    for order in (2, 3):
        for t in (0.5, 1.0):
            dec = duhamel_terms(packet8, realization8, 0.5, t, order=order, resolution=128)
            assert dec.remainder_norm_sq <= dec.unitarity_bound * (1 + 1e-9)


def test_chebyshev_loose_tolerance_raises(grid8, packet8, realization8):
    with pytest.raises(ToleranceExceeded):
        evolve(
            packet8, realization8, 0.5, 3.0,
            PropagatorConfig(scheme="chebyshev", tolerance=0.9, norm_tolerance=1e-10),
        )
