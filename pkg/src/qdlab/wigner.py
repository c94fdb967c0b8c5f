"""Lattice Wigner transform in Fourier variables, and observable pairings.

The quadratic transform of a state on the ``L^3`` torus is

    W_hat(xi, v) = conj(psi_hat(v - xi/2)) * psi_hat(v + xi/2),

with ``v`` on the momentum grid and the transfer ``xi = (2 pi / L) m`` indexed
by integer modes ``m in {-L, .., L-1}^3`` (twice the momentum-grid range, so
that ``xi/2`` is always a half-step momentum).  Even modes need only the
``L``-grid amplitudes; odd modes evaluate ``psi_hat`` on the doubled grid via
zero padding, i.e. the state is regarded as compactly supported inside a
``(2L)^3`` box.  The position-space field then lives on the half-integer
lattice, and both marginal identities hold to machine precision:

* ``W_hat(0, v) = |psi_hat(v)|^2``;
* inverse transform over all modes of the ``v``-average recovers
  ``|psi(x)|^2`` on integer sites (zero on proper half-integer sites).

Pairings with observables are computed entirely in Fourier variables: an
observable ``O(X, v) = sum_xi c_xi(v) exp(i X xi)`` pairs as

    <O, W> = sum_xi L^-3 sum_v c_xi(v) * conj(W_hat(xi, v)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .disorder import DisorderEnsembleSpec, sample_potential
from .errors import GridMismatch
from .evolution import PropagatorConfig, WaveFunction, evolve
from .lattice import MomentumGrid


def normalize_modes(xi_modes, L: int) -> np.ndarray:
    """Canonicalize transfer modes to integers in ``[-L, L)``."""
    m = np.atleast_2d(np.asarray(xi_modes, dtype=int))
    if m.shape[-1] != 3:
        raise ValueError("xi modes must be integer triples")
    return ((m + L) % (2 * L)) - L


def full_mode_set(L: int) -> np.ndarray:
    """All ``(2L)^3`` transfer modes (use only at small L)."""
    r = np.arange(-L, L)
    mm = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
    return mm.reshape(-1, 3)


def doubled_momentum_amplitudes(psi: WaveFunction) -> np.ndarray:
    """Amplitudes on the doubled momentum grid (zero-padded box)."""
    L = psi.grid.L
    padded = np.zeros((2 * L,) * 3, dtype=complex)
    padded[:L, :L, :L] = psi.to_position().data
    return sfft.fftn(padded)


@dataclass
class WignerField:
    """Sampled rows ``W_hat(xi, v)`` of the transform, with optional errors."""

    grid: MomentumGrid
    epsilon: float
    xi_modes: np.ndarray  # (n_modes, 3) integers in [-L, L)
    values: np.ndarray  # (n_modes, L, L, L) complex
    stderr: np.ndarray | None = None  # same shape, per-point standard errors
    count: int = 1

    def mode_index(self, mode) -> int:
        mode = normalize_modes(mode, self.grid.L)[0]
        hits = np.nonzero((self.xi_modes == mode).all(axis=1))[0]
        if hits.size == 0:
            raise GridMismatch(f"mode {tuple(mode)} not present in field")
        return int(hits[0])

    def velocity_marginal(self) -> np.ndarray:
        """``|psi_hat(v)|^2`` row (transfer zero); real nonnegative."""
        return self.values[self.mode_index((0, 0, 0))].real.copy()

    def fixed_mode_csv(self, path, mode) -> None:
        """CSV slice at a fixed transfer mode: one row per velocity point."""
        row = self.mode_index(mode)
        values = self.values[row].ravel()
        stderr = self.stderr[row].ravel() if self.stderr is not None else np.zeros(values.size)
        L = self.grid.L
        with open(path, "w") as fh:
            fh.write("k1,k2,k3,re,im,stderr\n")
            for flat, (val, err) in enumerate(zip(values, stderr)):
                i, j, k = np.unravel_index(flat, self.grid.shape)
                fh.write(f"{i},{j},{k},{val.real:.10g},{val.imag:.10g},{err:.10g}\n")

    def fixed_velocity_csv(self, path, v_index) -> None:
        """CSV slice at a fixed velocity grid point: one row per mode."""
        i, j, k = v_index
        with open(path, "w") as fh:
            fh.write("m1,m2,m3,re,im,stderr\n")
            for row, mode in enumerate(self.xi_modes):
                val = self.values[row, i, j, k]
                err = self.stderr[row, i, j, k] if self.stderr is not None else 0.0
                fh.write(
                    f"{mode[0]},{mode[1]},{mode[2]},{val.real:.10g},{val.imag:.10g},{err:.10g}\n"
                )

    def position_marginal(self) -> np.ndarray:
        """Inverse transform over modes of the ``v``-average.

        Requires the full mode set; returns the real field on the
        ``(2L)^3`` half-integer lattice (site ``n`` is position ``n/2``).
        """
        L = self.grid.L
        if self.xi_modes.shape[0] != (2 * L) ** 3:
            raise GridMismatch("position marginal needs the full mode set")
        mxi = self.values.reshape(self.xi_modes.shape[0], -1).mean(axis=1)
        cube = np.zeros((2 * L,) * 3, dtype=complex)
        idx = tuple((self.xi_modes + 2 * L).T % (2 * L))
        cube[idx] = mxi
        return np.real(sfft.ifftn(cube))


def wigner_fourier(
    psi: WaveFunction, epsilon: float, xi_modes
) -> WignerField:
    """Evaluate the transform of ``psi`` on the requested transfer modes."""
    grid = psi.grid
    L = grid.L
    modes = normalize_modes(xi_modes, L)
    psi_hat = psi.to_momentum().data
    need_doubled = bool(np.any(modes % 2 != 0))
    psi_hat2 = doubled_momentum_amplitudes(psi) if need_doubled else None

    j = np.arange(L)
    values = np.empty((modes.shape[0], L, L, L), dtype=complex)
    for row, m in enumerate(modes):
        if np.all(m % 2 == 0):
            half = m // 2
            plus = [(j + half[a]) % L for a in range(3)]
            minus = [(j - half[a]) % L for a in range(3)]
            src = psi_hat
            values[row] = (
                np.conj(src[np.ix_(*minus)]) * src[np.ix_(*plus)]
            )
        else:
            plus = [(2 * j + m[a]) % (2 * L) for a in range(3)]
            minus = [(2 * j - m[a]) % (2 * L) for a in range(3)]
            values[row] = (
                np.conj(psi_hat2[np.ix_(*minus)]) * psi_hat2[np.ix_(*plus)]
            )
    return WignerField(grid=grid, epsilon=epsilon, xi_modes=modes, values=values)


@dataclass
class ObservableSymbol:
    """Phase-space observable in Fourier representation.

    ``O(X, v) = sum_modes c_xi(v) exp(i X . xi)`` with coefficient rows
    ``values[row]`` on the momentum grid.  ``smoothness_certificate`` is the
    pair ``(max_sup, sum_of_sups)`` where ``sum_of_sups = sum_xi sup_v |c|``,
    the discrete analogue of the integrated sup norm entering the continuity
    bound.
    """

    grid: MomentumGrid
    xi_modes: np.ndarray
    values: np.ndarray  # (n_modes, L, L, L) complex

    def __post_init__(self):
        self.xi_modes = normalize_modes(self.xi_modes, self.grid.L)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.xi_modes.shape[0], *self.grid.shape):
            raise GridMismatch("observable rows do not match grid")

    @property
    def smoothness_certificate(self) -> tuple[float, float]:
        sups = np.max(np.abs(self.values.reshape(self.xi_modes.shape[0], -1)), axis=1)
        return float(sups.max(initial=0.0)), float(sups.sum())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """True when coefficients satisfy ``c(-xi) = conj(c(xi))``."""
        for row, m in enumerate(self.xi_modes):
            try:
                other = self._row_of(-m)
            except GridMismatch:
                return False
            if not np.allclose(self.values[other], np.conj(self.values[row]), atol=tol):
                return False
        return True

    def _row_of(self, mode) -> int:
        mode = normalize_modes(mode, self.grid.L)[0]
        hits = np.nonzero((self.xi_modes == mode).all(axis=1))[0]
        if hits.size == 0:
            raise GridMismatch(f"mode {tuple(mode)} not present")
        return int(hits[0])


def momentum_observable(grid: MomentumGrid, profile: np.ndarray) -> ObservableSymbol:
    """Observable depending on velocity only (single zero mode)."""
    return ObservableSymbol(
        grid=grid,
        xi_modes=np.array([[0, 0, 0]]),
        values=np.asarray(profile, dtype=complex)[None, ...],
    )


def constant_observable(grid: MomentumGrid) -> ObservableSymbol:
    """Total-mass observable, ``O == 1``."""
    return momentum_observable(grid, np.ones(grid.shape))


def pair_observable(field: WignerField, obs: ObservableSymbol) -> complex:
    """Fourier-space pairing ``<O, W>``; real for hermitian observables."""
    if obs.grid.L != field.grid.L:
        raise GridMismatch("observable and field grids differ")
    total = 0.0 + 0.0j
    for row, m in enumerate(obs.xi_modes):
        frow = field.mode_index(m)
        total += np.sum(obs.values[row] * np.conj(field.values[frow]))
    return complex(total / field.grid.size)


def ensemble_wigner(
    spec: DisorderEnsembleSpec,
    psi0: WaveFunction,
    lam: float,
    t: float,
    epsilon: float,
    count: int,
    xi_modes,
    cfg: PropagatorConfig = PropagatorConfig(),
    realization_indices=None,
) -> WignerField:
    """Disorder-averaged transform with per-point standard errors.

    Realizations are indexed deterministically; the running (Welford)
    reduction is performed in index order, so results do not depend on how
    work would be scheduled.
    """
    if count < 2:
        raise ValueError("ensemble averaging needs count >= 2")
    grid = psi0.grid
    modes = normalize_modes(xi_modes, grid.L)
    indices = list(realization_indices) if realization_indices is not None else list(range(count))
    mean = np.zeros((modes.shape[0], *grid.shape), dtype=complex)
    m2 = np.zeros_like(mean, dtype=float)
    for n, index in enumerate(indices, start=1):
        realization = sample_potential(spec, grid, index)
        psi_t = evolve(psi0, realization, lam, t, cfg)
        sample = wigner_fourier(psi_t, epsilon, modes).values
        delta = sample - mean
        mean += delta / n
        m2 += (np.abs(delta) ** 2) * (n - 1) / n
    stderr = np.sqrt(m2 / (len(indices) * (len(indices) - 1)))
    return WignerField(
        grid=grid,
        epsilon=epsilon,
        xi_modes=modes,
        values=mean,
        stderr=stderr,
        count=len(indices),
    )


def wigner_l2_continuity_check(
    psi1: WaveFunction,
    psi2: WaveFunction,
    obs: ObservableSymbol,
    epsilon: float = 1.0,
) -> tuple[float, float]:
    """Both sides of the pairing continuity bound (unit-constant convention).

    Returns ``(lhs, rhs)`` with ``lhs = |<O, W1> - <O, W2>|`` and
    ``rhs = (sum_xi sup_v |c|) * sqrt(norm(psi1)^2 * norm(psi1 - psi2)^2)``.
    """
    w1 = wigner_fourier(psi1, epsilon, obs.xi_modes)
    w2 = wigner_fourier(psi2, epsilon, obs.xi_modes)
    lhs = abs(pair_observable(w1, obs) - pair_observable(w2, obs))
    diff = WaveFunction(
        psi1.to_position().data - psi2.to_position().data, "position", psi1.grid
    )
    _, sup_integral = obs.smoothness_certificate
    rhs = sup_integral * psi1.norm() * diff.norm()
    return float(lhs), float(rhs)
