import numpy as np
import pytest

from qdlab.errors import EmptyShell
from qdlab.lattice import (
    MomentumGrid,
    band_density_exact,
    dispersion,
    dos,
    gaussian_delta,
    shell_table,
    triple_norm,
)


def test_dispersion_band_points():
    assert dispersion(np.array([0.0, 0.0, 0.0])) == 0.0
    assert dispersion(np.array([np.pi, np.pi, np.pi])) == pytest.approx(6.0)
    assert dispersion(np.array([np.pi / 2, 0.0, 0.0])) == pytest.approx(1.0)


def test_dispersion_symmetry_and_range(grid16):
    e = grid16.dispersion_field
    assert e.min() == pytest.approx(0.0, abs=1e-14)
    assert e.max() == pytest.approx(6.0, abs=1e-14)
    neg = (-np.arange(16)) % 16
    assert np.allclose(e[np.ix_(neg, neg, neg)], e)


def test_triple_norm_examples():
    assert triple_norm(np.array([0.0, 0.0, 0.0])) == 0.0
    assert triple_norm(np.array([np.pi, np.pi, np.pi])) == pytest.approx(0.0, abs=1e-12)
    assert triple_norm(np.array([np.pi / 2, 0.0, 0.0])) == pytest.approx(np.pi / 2)


def test_dos_below_band_and_symmetry(grid64):
    table = shell_table(grid64, 0.05)
    assert table.dos(-1.0) < 1e-12
    for u in (0.3, 1.1, 2.4):
        assert table.dos(3.0 + u) == pytest.approx(table.dos(3.0 - u), rel=1e-12)


def test_dos_against_dense_grid_oracle(grid64):
    # oracle: brute-force sum over every grid point, no class reduction
    h = 0.05
    e = (
        (1 - np.cos(2 * np.pi * np.fft.fftfreq(64)))[:, None, None]
        + (1 - np.cos(2 * np.pi * np.fft.fftfreq(64)))[None, :, None]
        + (1 - np.cos(2 * np.pi * np.fft.fftfreq(64)))[None, None, :]
    )
    oracle = float(np.mean(gaussian_delta(1.0 - e, h)))
    assert dos(1.0, h, grid64) == pytest.approx(oracle, rel=1e-12)


def test_dos_normalization(grid16):
    table = shell_table(grid16, 0.05)
    dE = table.energies[1] - table.energies[0]
    assert np.sum(table.dos_values) * dE == pytest.approx(1.0, abs=1e-4)
    assert np.all(table.dos_values >= 0)


def test_shell_average_normalization_and_parity(grid64):
    table = shell_table(grid64, 0.05)
    ones = np.ones(grid64.shape)
    assert table.shell_average(ones, 2.0) == pytest.approx(1.0)
    odd = grid64.velocity_fields[0]
    assert abs(table.shell_average(odd, 3.0)) < 1e-12


def test_shell_average_dense_oracle(grid64):
    h = 0.05
    table = shell_table(grid64, h)
    v1sq = grid64.velocity_fields[0] ** 2
    kernel = gaussian_delta(3.0 - grid64.dispersion_field, h)
    oracle = float(np.sum(kernel * v1sq) / kernel.sum())
    assert table.shell_average(v1sq, 3.0) == pytest.approx(oracle, rel=1e-12)


def test_empty_shell_raises(grid16):
    table = shell_table(grid16, 0.05)
    with pytest.raises(EmptyShell):
        table.shell_average(np.ones(grid16.shape), -2.5)
    with pytest.raises(EmptyShell):
        table.diffusion_matrix(-2.5)


def test_diffusion_matrix_structure(grid64):
    table = shell_table(grid64, 0.05)
    D = table.diffusion_matrix(3.0)
    assert np.allclose(D, D.T)
    assert abs(D[0, 1]) < 1e-12 and abs(D[0, 2]) < 1e-12
    assert D[0, 0] == pytest.approx(D[1, 1], rel=1e-10)
    assert D[0, 0] == pytest.approx(D[2, 2], rel=1e-10)
    assert np.all(np.linalg.eigvalsh(D) >= -1e-14)


def test_diffusion_matrix_dense_oracle(grid64):
    h = 0.05
    table = shell_table(grid64, h)
    kernel = gaussian_delta(3.0 - grid64.dispersion_field, h)
    v1 = grid64.velocity_fields[0]
    phi = float(np.mean(kernel))
    oracle = float(np.sum(kernel * v1 * v1) / kernel.sum()) / (2 * np.pi * phi)
    assert table.diffusion_matrix(3.0)[0, 0] == pytest.approx(oracle, rel=1e-12)


def test_diffusion_matrix_axis_relabeling(grid16):
    table = shell_table(grid16, 0.05)
    D = table.diffusion_matrix(2.5)
    for perm in ((1, 2, 0), (2, 0, 1), (1, 0, 2)):
        P = np.eye(3)[list(perm)]
        assert np.allclose(P @ D @ P.T, D, atol=1e-12)


def test_dos_refinement_toward_continuum():
    centers, density = band_density_exact(4096)
    exact = float(np.interp(1.0, centers, density))
    coarse = dos(1.0, 0.05, MomentumGrid(32))
    fine = dos(1.0, 0.05, MomentumGrid(64))
    # the fine grid must sit closer to the (broadened) continuum value
    smooth_exact = float(
        np.sum(density * gaussian_delta(1.0 - centers, 0.05)) * (centers[1] - centers[0])
    )
    assert abs(fine - smooth_exact) < abs(coarse - smooth_exact)
    assert fine == pytest.approx(smooth_exact, rel=2e-3)
    assert exact > 0


def test_shell_table_csv_export(tmp_path, grid16):
    table = shell_table(grid16, 0.05, energies=np.linspace(0.5, 5.5, 11))
    path = tmp_path / "table.csv"
    table.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "E,Phi,D11"
    assert len(lines) == 12
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == pytest.approx(0.5)
    assert first[1] > 0 and first[2] > 0


def test_joint_refinement_L_and_broadening():
    # doubling L while halving h moves the panel by little
    panel = [1.0, 2.0, 3.0, 4.0, 5.0]
    g64, g128 = MomentumGrid(64), MomentumGrid(128)
    for E in panel:
        assert abs(dos(E, 0.05, g64) - dos(E, 0.025, g128)) < 0.01
