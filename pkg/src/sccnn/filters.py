"""Simplicial convolutional filters.

A filter of order k is a matrix polynomial in the lower and upper Hodge
Laplacians, H = sum_t w_d[t] L_down^t + sum_t w_u[t] L_up^t, applied by
repeated sparse shifting (never materializing matrix powers).  The module
also provides the integral-Lipschitz constants used by the stability theory
and the frequency grids for the training-time regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .complexes import Operators, SimplicialComplex, normalized_operators
from .errors import ValidationError

__all__ = [
    "ScFilter",
    "apply",
    "integral_lipschitz_constants",
    "max_abs_response",
    "lambda_max",
    "frequency_grids",
]

VARIANTS = ("full", "lower_only", "upper_only")


@dataclass(frozen=True)
class ScFilter:
    """Scalar-coefficient simplicial convolutional filter of order k.

    w_d[t] and w_u[t] weight the t-th lower and upper shifts; index 0 is the
    identity tap of each series.  Variant "lower_only"/"upper_only" keeps a
    single series (the other coefficient array must be empty).
    """

    k: int
    w_d: np.ndarray = field(compare=False)
    w_u: np.ndarray = field(compare=False)
    variant: str = "full"

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_d", np.atleast_1d(np.asarray(self.w_d, dtype=np.float64)))
        object.__setattr__(self, "w_u", np.atleast_1d(np.asarray(self.w_u, dtype=np.float64)))
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown filter variant {self.variant!r}")
        if self.variant == "lower_only" and self.w_u.size:
            raise ValidationError("lower_only filter must have empty w_u")
        if self.variant == "upper_only" and self.w_d.size:
            raise ValidationError("upper_only filter must have empty w_d")
        if not (np.isfinite(self.w_d).all() and np.isfinite(self.w_u).all()):
            raise ValidationError("filter coefficients must be finite")


def _polynomial_apply(
    mat: sp.csr_matrix | None, coeffs: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """sum_t coeffs[t] mat^t x by repeated shifting."""
    if coeffs.size == 0:
        return np.zeros_like(x)
    acc = x
    out = coeffs[0] * x
    for t in range(1, coeffs.size):
        if mat is None:
            break
        acc = mat @ acc
        out = out + coeffs[t] * acc
    return out


def apply(
    filt: ScFilter,
    target: SimplicialComplex | Operators,
    x: np.ndarray,
    scheme: str = "raw",
) -> np.ndarray:
    """Apply the filter to a k-cochain (vector or feature matrix).

    `target` is either a complex (operators built under `scheme`) or a
    prebuilt Operators bundle of the filter's order.
    """
    if isinstance(target, SimplicialComplex):
        ops = normalized_operators(target, filt.k, scheme)
    else:
        ops = target
        if ops.k != filt.k:
            raise ValidationError(f"filter order {filt.k} != operator order {ops.k}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != ops.lap.shape[0]:
        raise ValidationError(
            f"cochain has {x.shape[0]} rows, expected {ops.lap.shape[0]}"
        )
    out = _polynomial_apply(ops.lap_down, filt.w_d, x)
    out = out + _polynomial_apply(ops.lap_up, filt.w_u, x)
    return out


def _check_grid(grid: np.ndarray, name: str) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    if grid.size == 0:
        raise ValidationError(f"{name} grid must be nonempty")
    if grid.min() < 0:
        raise ValidationError(f"{name} grid must be nonnegative")
    return grid


def integral_lipschitz_constants(
    filt: ScFilter, lambda_grid_g: np.ndarray, lambda_grid_c: np.ndarray
) -> tuple[float, float]:
    """(C_d, C_u): max |lambda * d h/d lambda| over each frequency grid.

    The lower response on gradient frequencies is sum_t w_d[t] lambda^t (plus
    a constant), so lambda times its derivative is sum_t t w_d[t] lambda^t;
    C_d is the grid maximum of its absolute value, C_u the upper analogue.
    """
    grid_g = _check_grid(lambda_grid_g, "gradient")
    grid_c = _check_grid(lambda_grid_c, "curl")
    c_d = 0.0
    if filt.w_d.size > 1:
        t = np.arange(filt.w_d.size)
        c_d = float(np.max(np.abs(np.power.outer(grid_g, t) @ (t * filt.w_d))))
    c_u = 0.0
    if filt.w_u.size > 1:
        t = np.arange(filt.w_u.size)
        c_u = float(np.max(np.abs(np.power.outer(grid_c, t) @ (t * filt.w_u))))
    return c_d, c_u


def max_abs_response(
    filt: ScFilter, lambda_grid_g: np.ndarray, lambda_grid_c: np.ndarray
) -> float:
    """Largest |frequency response| over harmonic/gradient/curl frequencies.

    Reported (not enforced) so callers can normalize filters when a theory
    result assumes responses bounded by one.
    """
    grid_g = _check_grid(lambda_grid_g, "gradient")
    grid_c = _check_grid(lambda_grid_c, "curl")
    w_d0 = filt.w_d[0] if filt.w_d.size else 0.0
    w_u0 = filt.w_u[0] if filt.w_u.size else 0.0
    best = abs(w_d0 + w_u0)  # harmonic response
    if filt.w_d.size:
        t = np.arange(filt.w_d.size)
        best = max(best, float(np.max(np.abs(np.power.outer(grid_g, t) @ filt.w_d + w_u0))))
    if filt.w_u.size:
        t = np.arange(filt.w_u.size)
        best = max(best, float(np.max(np.abs(np.power.outer(grid_c, t) @ filt.w_u + w_d0))))
    return best


def lambda_max(mat: sp.spmatrix | None, iters: int = 200, rtol: float = 1e-6) -> float:
    """Largest eigenvalue magnitude by deterministic power iteration."""
    if mat is None or mat.shape[0] == 0 or mat.nnz == 0:
        return 0.0
    n = mat.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    estimate = 0.0
    for _ in range(iters):
        w = mat @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= rtol * norm:
            return norm
        estimate = norm
    return estimate


def frequency_grids(ops: Operators, step: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Sampled gradient and curl frequency bands (0, lambda_max] at `step`.

    Band edges come from power iteration on the lower and upper Laplacians.
    A band whose operator is missing or null yields an empty grid.
    """
    if step <= 0:
        raise ValidationError("sampling step must be positive")

    def band(mat: sp.spmatrix | None) -> np.ndarray:
        top = lambda_max(mat)
        if top <= 0:
            return np.zeros(0)
        grid = np.arange(step, top + step * 0.5, step)
        grid = grid[grid <= top]
        if grid.size == 0:
            grid = np.array([top])
        return grid

    return band(ops.lap_down), band(ops.lap_up)
