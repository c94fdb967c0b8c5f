"""Initial states: smooth Gaussian wave packets on the periodic lattice.

A packet is defined by its envelope width ``sigma_x`` (in lattice units), a
carrier momentum ``k0`` and a center ``x0``.  The same object serves two
consumers: grid evolution (sampled onto the lattice, wrap-around images
included) and the momentum-space Monte Carlo engine (analytic torus density,
used both as an integrand weight and as an importance-sampling proposal).

Momentum densities are normalized against the torus measure
``d^3k / (2 pi)^3``, matching the convention that momentum integrals are
``L**-3``-normalized grid sums.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .lattice import MomentumGrid

_TWO_PI = 2.0 * np.pi


def wrap_momentum(k: np.ndarray) -> np.ndarray:
    """Map momenta to the fundamental torus cell ``[-pi, pi)``."""
    return (np.asarray(k, dtype=float) + np.pi) % _TWO_PI - np.pi


@dataclass(frozen=True)
class GaussianPacket:
    """Normalized Gaussian packet ``exp(-|x-x0|^2 / (4 sigma_x^2) + i k0.x)``."""

    sigma_x: float = 1.5
    k0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    x0: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def sigma_k(self) -> float:
        """Momentum-space standard deviation of ``|psi_hat|^2`` per axis."""
        return 1.0 / (2.0 * self.sigma_x)

    def position_amplitudes(self, grid: MomentumGrid) -> np.ndarray:
        """Lattice samples of the packet, periodic images summed, norm one."""
        L = grid.L
        x = np.arange(L, dtype=float)
        env_axes = []
        for c in self.x0:
            d = x - c
            env = np.zeros(L)
            for image in (-L, 0.0, L):  # one image layer; enough for sigma_x << L
                env += np.exp(-((d + image) ** 2) / (4.0 * self.sigma_x**2))
            env_axes.append(env)
        envelope = np.einsum("i,j,k->ijk", *env_axes)
        phase = (
            self.k0[0] * x[:, None, None]
            + self.k0[1] * x[None, :, None]
            + self.k0[2] * x[None, None, :]
        )
        psi = envelope * np.exp(1j * phase)
        psi /= np.linalg.norm(psi.ravel())
        return psi

    def momentum_density(self, k: np.ndarray) -> np.ndarray:
        """Analytic torus density of ``|psi_hat|^2`` at momenta ``k[..., 3]``.

        Wrapped Gaussian ``exp(-2 sigma_x^2 dk^2)`` per axis with one image
        layer, exact to relative ``exp(-2 (pi sigma_x)^2)``.
        """
        k = np.asarray(k, dtype=float)
        gauss_norm = np.sqrt(np.pi / (2.0 * self.sigma_x**2))
        out = np.ones(k.shape[:-1])
        for axis in range(3):
            d = wrap_momentum(k[..., axis] - self.k0[axis])
            ax_sum = np.zeros_like(d)
            for image in (-_TWO_PI, 0.0, _TWO_PI):
                ax_sum += np.exp(-2.0 * self.sigma_x**2 * (d + image) ** 2)
            out = out * ax_sum * (_TWO_PI / gauss_norm)
        return out

    def momentum_amplitude(self, k: np.ndarray) -> np.ndarray:
        """Analytic continuum amplitude with ``|amplitude|^2 = density``."""
        k = np.asarray(k, dtype=float)
        gauss_norm = np.sqrt(np.pi / (2.0 * self.sigma_x**2))
        amp = np.ones(k.shape[:-1], dtype=complex)
        for axis in range(3):
            d = wrap_momentum(k[..., axis] - self.k0[axis])
            amp = amp * (
                np.exp(-self.sigma_x**2 * d**2)
                * np.exp(-1j * d * self.x0[axis])
                * np.sqrt(_TWO_PI / gauss_norm)
            )
        return amp

    def wigner_amplitude(self, transfer: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Analytic initial transform ``conj(psi_hat(v - q/2)) psi_hat(v + q/2)``."""
        transfer = np.broadcast_to(np.asarray(transfer, dtype=float), v.shape)
        return np.conj(self.momentum_amplitude(v - transfer / 2.0)) * self.momentum_amplitude(
            v + transfer / 2.0
        )

    def sample_momenta(self, unit_cube: np.ndarray) -> np.ndarray:
        """Map uniform variates ``(n, 3)`` to packet-distributed momenta.

        Inverse-CDF transform of the unwrapped per-axis Gaussian, wrapped to
        the torus; together with :meth:`momentum_density` this is an exact
        density/weight pair up to the negligible image corrections.
        """
        u = np.clip(np.asarray(unit_cube, dtype=float), 1e-12, 1.0 - 1e-12)
        k = ndtri(u) * self.sigma_k + np.asarray(self.k0)[None, :]
        return wrap_momentum(k)
