# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused Cython implementations of the hot kernels."""
import numpy as np

cimport cython


def resolvent_line_integrals(omega, alpha, double eta, weights):
    """Weighted contour sums of resolvent products, one per sample row.

    Semantics identical to the numpy fallback:
    ``out[s] = sum_a weights[a] * prod_j 1 / (alpha[a] - omega[s, j] + i eta)``.
    """
    cdef double complex[:, ::1] om = np.ascontiguousarray(omega, dtype=np.complex128)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double complex[::1] w = np.ascontiguousarray(weights, dtype=np.complex128)
    cdef Py_ssize_t nsamples = om.shape[0]
    cdef Py_ssize_t nfactors = om.shape[1]
    cdef Py_ssize_t nnodes = al.shape[0]
    out_arr = np.empty(nsamples, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t s, a, j
    cdef double complex acc, prod, shift
    cdef double complex ieta = 1j * eta
    for s in range(nsamples):
        acc = 0
        for a in range(nnodes):
            shift = al[a] + ieta
            prod = shift - om[s, 0]
            for j in range(1, nfactors):
                prod = prod * (shift - om[s, j])
            acc = acc + w[a] / prod
        out[s] = acc
    return out_arr
