"""Reference numpy implementations of the hot kernels."""
import numpy as np

_CHUNK_ELEMENTS = 1 << 22  # keep temporaries ~64 MB


def resolvent_line_integrals(
    omega: np.ndarray, alpha: np.ndarray, eta: float, weights: np.ndarray
) -> np.ndarray:
    """Weighted contour sums of resolvent products, one per sample row.

    ``out[s] = sum_a weights[a] * prod_j 1 / (alpha[a] - omega[s, j] + i eta)``

    ``omega`` has shape ``(samples, factors)`` (complex), ``alpha`` and
    ``weights`` share shape ``(nodes,)``.
    """
    omega = np.ascontiguousarray(omega, dtype=complex)
    alpha = np.asarray(alpha, dtype=float)
    weights = np.asarray(weights, dtype=complex)
    nsamples, nfactors = omega.shape
    shift = alpha + 1j * eta
    out = np.empty(nsamples, dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // max(alpha.size, 1))
    for start in range(0, nsamples, chunk):
        block = omega[start : start + chunk]
        prod = shift[None, :] - block[:, 0, None]
        for j in range(1, nfactors):
            prod *= shift[None, :] - block[:, j, None]
        out[start : start + chunk] = (1.0 / prod) @ weights
    return out
