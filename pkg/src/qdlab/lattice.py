"""Momentum-space geometry of the periodic 3D lattice.

Conventions used throughout the package:

* the lattice has ``L`` sites per dimension (``L`` even) and the dual grid
  carries momenta ``k = 2*pi*fftfreq(L)`` per axis, identified with the
  torus ``[-pi, pi)^3``;
* the band function is ``e(k) = sum_i (1 - cos k_i)``, with range ``[0, 6]``;
* momentum integrals are normalized sums, ``int dk == L**-3 * sum_k``, so the
  density of states integrates to one (one state per site).

Energy deltas are realized as Gaussians of width ``h`` (area one), which is
the standard smooth broadening for density-of-states work.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import EmptyShell

BAND_MIN = 0.0
BAND_MAX = 6.0

#: Energy window in which the diffusive (heat-equation) limit is established.
#: ``diffusion_matrix`` is computed on all of (0, 6); outside this window the
#: values are the same formula without a supporting limit theorem.
DIFFUSION_ENERGY_WINDOW = (0.0, 3.0)

DEFAULT_BROADENING = 0.05
DEFAULT_ENERGY_GRID = (-0.5, 6.5, 512)


def dispersion(k: np.ndarray) -> np.ndarray:
    """Band energy ``e(k) = sum_i (1 - cos k_i)`` for momenta ``k[..., 3]``."""
    k = np.asarray(k, dtype=float)
    return np.sum(1.0 - np.cos(k), axis=-1)


def band_velocity(k: np.ndarray) -> np.ndarray:
    """Group velocity ``grad e(k) = sin k`` componentwise."""
    return np.sin(np.asarray(k, dtype=float))


def triple_norm(k: np.ndarray) -> np.ndarray:
    """Distance from ``k`` to the critical set of the band.

    The critical points of ``e`` are the momenta whose components all lie in
    ``{0, +pi, -pi}``; the norm is the Euclidean torus distance to the nearest
    one, i.e. ``sqrt(sum_i min(|k_i|, pi - |k_i|)**2)`` for ``k`` in
    ``[-pi, pi)^3``.
    """
    k = np.asarray(k, dtype=float)
    k = (k + np.pi) % (2.0 * np.pi) - np.pi
    comp = np.minimum(np.abs(k), np.pi - np.abs(k))
    return np.sqrt(np.sum(comp**2, axis=-1))


def gaussian_delta(u: np.ndarray, h: float) -> np.ndarray:
    """Unit-area Gaussian approximation of the energy delta function."""
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * (u / h) ** 2) / (np.sqrt(2.0 * np.pi) * h)


class MomentumGrid:
    """Dual grid of an ``L^3`` periodic lattice (``L`` even, dimension 3)."""

    d = 3

    def __init__(self, L: int):
        if L < 2 or L % 2 != 0:
            raise ValueError(f"lattice side must be even and >= 2, got {L}")
        self.L = int(L)
        self.shape = (self.L,) * 3
        self.size = self.L**3

    @cached_property
    def axis_momenta(self) -> np.ndarray:
        """1D momenta in FFT ordering, values in ``[-pi, pi)``."""
        return 2.0 * np.pi * np.fft.fftfreq(self.L)

    @cached_property
    def dispersion_field(self) -> np.ndarray:
        """``e(k)`` on the full grid, shape ``(L, L, L)``."""
        ax = 1.0 - np.cos(self.axis_momenta)
        return ax[:, None, None] + ax[None, :, None] + ax[None, None, :]

    @cached_property
    def velocity_fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Components of ``grad e = sin k`` on the full grid."""
        s = np.sin(self.axis_momenta)
        one = np.ones(self.L)
        return (
            np.einsum("i,j,k->ijk", s, one, one),
            np.einsum("i,j,k->ijk", one, s, one),
            np.einsum("i,j,k->ijk", one, one, s),
        )

    @cached_property
    def triple_norm_field(self) -> np.ndarray:
        """Distance to the critical set per grid point."""
        a = np.abs(self.axis_momenta)
        comp = np.minimum(a, np.pi - a) ** 2
        return np.sqrt(
            comp[:, None, None] + comp[None, :, None] + comp[None, None, :]
        )

    @cached_property
    def energy_classes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact spectral classes of the grid band energies.

        Returns ``(values, weights, index)`` where ``values`` are the distinct
        band energies in increasing order, ``weights`` their normalized
        multiplicities (summing to one), and ``index`` maps each grid point to
        its class.  Spectral sums ``L**-3 * sum_k f(e(k))`` reduce exactly to
        ``sum_c weights[c] * f(values[c])``.
        """
        rounded = np.round(self.dispersion_field.ravel(), 12)
        values, index = np.unique(rounded, return_inverse=True)
        weights = np.bincount(index).astype(float) / self.size
        return values, weights, index.reshape(self.shape)

    def reduce_by_class(self, field_values: np.ndarray) -> np.ndarray:
        """Class-wise normalized sums of a grid field.

        ``out[c] = L**-3 * sum_{k in class c} field_values[k]``.
        """
        _, _, index = self.energy_classes
        flat = np.asarray(field_values).ravel()
        nclass = self.energy_classes[0].size
        if np.iscomplexobj(flat):
            re = np.bincount(index.ravel(), weights=flat.real, minlength=nclass)
            im = np.bincount(index.ravel(), weights=flat.imag, minlength=nclass)
            return (re + 1j * im) / self.size
        return np.bincount(index.ravel(), weights=flat, minlength=nclass) / self.size

    def __repr__(self) -> str:
        return f"MomentumGrid(L={self.L})"


@dataclass(frozen=True)
class EnergyShellTable:
    """Precomputed density of states and shell data on an energy panel.

    ``dos_values[i]`` is the broadened density of states at ``energies[i]``;
    it is nonnegative, integrates to one over the band (within quadrature
    tolerance), and is supported in ``[-3h, 6 + 3h]`` up to Gaussian tails.
    """

    grid: MomentumGrid
    broadening: float
    energies: np.ndarray
    dos_values: np.ndarray
    phi_tolerance: float = 1e-8

    def dos(self, E: float) -> float:
        """Broadened density of states at an arbitrary energy."""
        return dos(E, self.broadening, self.grid)

    def shell_weights(self, E: float) -> np.ndarray:
        """Normalized shell weights ``w_k`` with ``sum_k w_k = 1``."""
        kernel = gaussian_delta(E - self.grid.dispersion_field, self.broadening)
        total = kernel.sum()
        if total / self.grid.size <= self.phi_tolerance:
            raise EmptyShell(f"no spectral weight at E={E}")
        return kernel / total

    def shell_average(self, field_values: np.ndarray, E: float) -> float:
        """Average of a momentum-grid field over the broadened shell at ``E``."""
        return float(np.sum(self.shell_weights(E) * field_values))

    def diffusion_matrix(self, E: float) -> np.ndarray:
        """Shell diffusion matrix ``D_ij(E) = <v_i v_j>_E / (2 pi Phi(E))``.

        Symmetric positive semidefinite; by cubic symmetry a multiple of the
        identity up to broadening/grid tolerance.  Defined wherever the shell
        carries weight (raises :class:`EmptyShell` otherwise); see
        :data:`DIFFUSION_ENERGY_WINDOW` for the window in which the diffusive
        limit itself is established.
        """
        w = self.shell_weights(E)
        phi = self.dos(E)
        v = self.grid.velocity_fields
        D = np.empty((3, 3))
        for i in range(3):
            for j in range(i, 3):
                D[i, j] = D[j, i] = np.sum(w * v[i] * v[j])
        return D / (2.0 * np.pi * phi)

    def to_csv(self, path) -> None:
        """Write the panel as CSV columns ``E, Phi, D11``."""
        rows = []
        for E, phi in zip(self.energies, self.dos_values):
            try:
                d11 = self.diffusion_matrix(float(E))[0, 0]
            except EmptyShell:
                d11 = float("nan")
            rows.append((float(E), float(phi), d11))
        with open(path, "w") as fh:
            fh.write("E,Phi,D11\n")
            for E, phi, d11 in rows:
                fh.write(f"{E:.10g},{phi:.10g},{d11:.10g}\n")


def dos(E: float, h: float, grid: MomentumGrid) -> float:
    """Broadened density of states ``Phi(E) = int dk delta_h(E - e(k))``."""
    if h <= 0:
        raise ValueError("broadening must be positive")
    values, weights, _ = grid.energy_classes
    return float(np.sum(weights * gaussian_delta(E - values, h)))


def shell_table(
    grid: MomentumGrid,
    broadening: float = DEFAULT_BROADENING,
    energies: np.ndarray | None = None,
) -> EnergyShellTable:
    """Build the DOS panel for a grid (default 512 points over [-0.5, 6.5])."""
    if energies is None:
        lo, hi, n = DEFAULT_ENERGY_GRID
        energies = np.linspace(lo, hi, n)
    energies = np.asarray(energies, dtype=float)
    values, weights, _ = grid.energy_classes
    dos_values = gaussian_delta(energies[:, None] - values[None, :], broadening)
    dos_values = dos_values @ weights
    return EnergyShellTable(
        grid=grid,
        broadening=float(broadening),
        energies=energies,
        dos_values=dos_values,
    )


def band_density_exact(nbins: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Continuum (infinite-lattice) density of states by exact convolution.

    Each band-energy component ``1 - cos k_i`` with ``k_i`` uniform has an
    arcsine law whose CDF is known in closed form, so exact bin masses of the
    three-fold sum follow from two discrete convolutions.  Returns
    ``(bin_centers, density)`` on ``[0, 6]``; the density integrates to one.
    """
    edges = np.linspace(-1.0, 1.0, nbins + 1)
    cdf = 1.0 - np.arccos(np.clip(edges, -1, 1)) / np.pi  # law of cos(theta)
    mass1 = np.diff(cdf)[::-1]  # law of -cos(theta), same by symmetry
    mass2 = np.convolve(mass1, mass1)
    mass3 = np.convolve(mass2, mass1)
    width = 2.0 / nbins
    centers = 3.0 + width * (np.arange(mass3.size) - (mass3.size - 1) / 2.0)
    return centers, mass3 / width
