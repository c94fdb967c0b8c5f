import numpy as np
import pytest

from qdlab.errors import ExtrapolationUnstable
from qdlab.graphs.selfenergy import (
    holder_half_fit,
    renormalized_dispersion_check,
    resolvent_trace,
    self_energy,
)
from qdlab.lattice import MomentumGrid, shell_table


@pytest.fixture(scope="module")
def se32():
    return self_energy(MomentumGrid(32), lam=0.3)


def test_below_band_real_negative(se32):
    theta = se32.theta_of(np.array([-1.0]))[0]
    assert theta.real < 0
    assert abs(theta.imag) < 1e-3


def test_regulated_trace_has_negative_imaginary_part(grid16):
    alphas = np.linspace(-0.5, 6.5, 41)
    for eps in (0.3, 0.1, 0.05):
        trace = resolvent_trace(grid16, alphas, eps)
        assert np.all(trace.imag < 0)


def test_plemelj_identity_moderate_grid(se32):
    table = shell_table(MomentumGrid(32), 0.05)
    alphas = np.linspace(1.0, 5.0, 33)
    im = np.interp(alphas, se32.alpha_grid, se32.theta_table.imag)
    phi = np.array([table.dos(a) for a in alphas])
    rel = np.abs(-im / np.pi - phi) / phi
    assert rel.max() < 0.05


def test_im_omega_nonpositive_and_bound_constant(se32):
    assert np.all(se32.omega_field.imag <= 0)
    bound = renormalized_dispersion_check(se32)
    assert bound.c > 0
    assert bound.points_checked > 0


def test_theta_field_consistency(se32):
    # theta(p) = Theta(e(p)) at the grid's own band energies
    values, _, index = se32.grid.energy_classes
    field = se32.theta_field
    assert field.shape == se32.grid.shape
    sample = field[2, 5, 7]
    assert sample == se32.theta_class_values[index[2, 5, 7]]


def test_holder_modulus_finite(se32):
    c = holder_half_fit(se32)
    assert 0 < c < 10


def test_extrapolation_stability_guard(grid8):
    with pytest.raises(ExtrapolationUnstable):
        self_energy(grid8, lam=0.2, eps_ladder=(0.2, 0.1, 0.05), stability_tol=1e-9)


def test_ladder_validation(grid8):
    with pytest.raises(ValueError):
        self_energy(grid8, lam=0.2, eps_ladder=(0.1,))
    with pytest.raises(ValueError):
        self_energy(grid8, lam=0.2, eps_ladder=(0.1, 0.2))


def test_bound_violated_on_positive_imaginary_part(se32):
    from dataclasses import replace

    from qdlab.errors import BoundViolated

    broken = replace(se32, theta_class_values=np.abs(se32.theta_class_values.imag) * 1j
                     + se32.theta_class_values.real)
    with pytest.raises(BoundViolated):
        renormalized_dispersion_check(broken)
