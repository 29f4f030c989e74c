"""Sparse kernel dispatch: compiled extension when built, scipy fallback.

Both paths produce bit-identical results (same accumulation order, same
dtypes).  Set SCCNN_NO_EXT=1 to force the fallback, e.g. for benchmarking.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

__all__ = ["HAVE_COMPILED", "csr_matmul", "LinOp"]

_ext = None
if not os.environ.get("SCCNN_NO_EXT"):
    try:
        from . import _kernels as _ext  # type: ignore[attr-defined]
    except ImportError:
        _ext = None

HAVE_COMPILED = _ext is not None


def csr_matmul(a: sp.csr_matrix, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Return ``a @ x`` for CSR ``a`` and a C-contiguous 2-D array ``x``."""
    if out is None:
        out = np.empty((a.shape[0], x.shape[1]), dtype=x.dtype)
    if _ext is not None and a.data.dtype == x.dtype and x.dtype in (np.float32, np.float64):
        _ext.csr_matmul(a.indptr, a.indices, a.data, x, out)
    else:
        out[...] = a @ x
    return out


class LinOp:
    """A fixed sparse operator with a cached transpose, in a fixed dtype.

    Wraps the CSR matrix used in forward passes together with the CSR of its
    transpose for the reverse pass.  Construction is cheap enough to do once
    per training run per operator.
    """

    __slots__ = ("mat", "mat_t", "shape", "name")

    def __init__(self, mat: sp.spmatrix, dtype=np.float64, name: str = ""):
        csr = sp.csr_matrix(mat).astype(dtype, copy=False)
        csr.sort_indices()
        csr_t = sp.csr_matrix(csr.T)
        csr_t.sort_indices()
        self.mat = csr
        self.mat_t = csr_t
        self.shape = csr.shape
        self.name = name

    def dot(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        return csr_matmul(self.mat, x, out)

    def tdot(self, g: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        return csr_matmul(self.mat_t, g, out)
