# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR-times-dense-block kernels for the convolution hot loop.

The accumulation order matches scipy.sparse exactly (row-major, nonzeros in
stored order), so results are bit-identical to the fallback path.
"""

import numpy as np

ctypedef fused real:
    float
    double


def csr_matmul(const int[::1] indptr, const int[::1] indices,
               const real[::1] data, const real[:, ::1] X, real[:, ::1] out):
    """out = A @ X for CSR A given by (indptr, indices, data)."""
    cdef Py_ssize_t n_rows = out.shape[0]
    cdef Py_ssize_t n_cols = X.shape[1]
    cdef Py_ssize_t i, jj, j, c
    cdef real a
    for i in range(n_rows):
        for c in range(n_cols):
            out[i, c] = 0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            a = data[jj]
            for c in range(n_cols):
                out[i, c] += a * X[j, c]
