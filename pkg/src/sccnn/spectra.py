"""Spectral analysis of Hodge Laplacians.

Provides the orthonormal eigenbasis with per-eigenpair frequency classes
(harmonic / gradient / curl), the simplicial Fourier transform, the Hodge
decomposition, filter frequency responses, and the nonlinearity spillage
diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import filters as _filters
from .complexes import SimplicialComplex, hodge_laplacians, normalized_operators
from .errors import NumericalError, ValidationError

__all__ = [
    "SpectralBasis",
    "HodgeParts",
    "eigenbasis",
    "sft",
    "isft",
    "hodge_decompose",
    "filter_frequency_response",
    "spillage_report",
]

DENSE_LIMIT = 2000
HARMONIC, GRADIENT, CURL = "harmonic", "gradient", "curl"

_SIGMA = {
    "identity": lambda x: x,
    "tanh": np.tanh,
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "leaky_relu": lambda x: np.maximum(x, 0.01 * x),
}


@dataclass(frozen=True)
class SpectralBasis:
    """Eigendecomposition of one Hodge Laplacian with frequency classes.

    Eigenvalues ascend; eigenvectors are orthonormal columns with the sign
    fixed so each vector's first nonzero entry is positive; classes[i] is one
    of "harmonic", "gradient", "curl".
    """

    k: int
    scheme: str
    values: np.ndarray = field(compare=False)
    vectors: np.ndarray = field(compare=False)
    classes: tuple[str, ...]
    tol_zero: float

    @property
    def n_harmonic(self) -> int:
        return self.classes.count(HARMONIC)

    @property
    def n_gradient(self) -> int:
        return self.classes.count(GRADIENT)

    @property
    def n_curl(self) -> int:
        return self.classes.count(CURL)

    def indices(self, label: str) -> np.ndarray:
        """Positions of the eigenpairs with the given class label."""
        return np.array([i for i, c in enumerate(self.classes) if c == label], dtype=int)


@dataclass(frozen=True)
class HodgeParts:
    """Orthogonal split of a k-cochain into gradient/harmonic/curl parts."""

    k: int
    x_g: np.ndarray = field(compare=False)
    x_h: np.ndarray = field(compare=False)
    x_c: np.ndarray = field(compare=False)


def eigenbasis(
    sc: SimplicialComplex,
    k: int,
    tol_zero: float | None = None,
    scheme: str = "raw",
) -> SpectralBasis:
    """Full symmetric eigendecomposition of L_k with per-pair classes.

    Classification is by residual norms against tol_zero (default
    1e-8 * lambda_max): gradient vectors satisfy ||L_up u|| <= tol, curl
    vectors ||L_down u|| <= tol, harmonic vectors both.  To keep every
    eigenpair pure-class even when the lower and upper spectra share an
    eigenvalue (where a naive joint diagonalization returns mixed vectors),
    the gradient and curl blocks are taken from the eigendecompositions of
    the lower and upper parts themselves and the harmonic block from the
    kernel of the full Laplacian; the three blocks are merged ascending.

    Raises
    ------
    ValidationError
        Empty order, N_k beyond the dense-solver limit, or a non-symmetric
        scheme.
    NumericalError
        Eigensolver failure; inconsistent class counts; an assembled vector
        whose residuals are ambiguous (both above tolerance).
    """
    n = sc.num(k)
    if n < 1:
        raise ValidationError(f"no order-{k} simplices to decompose")
    if n > DENSE_LIMIT:
        raise ValidationError(
            f"N_{k} = {n} exceeds the dense eigensolver limit {DENSE_LIMIT}"
        )
    if scheme == "raw":
        lap, lower, upper = hodge_laplacians(sc, k)
    elif scheme == "random_walk_symmetric":
        ops = normalized_operators(sc, k, scheme)
        lap, lower, upper = ops.lap, ops.lap_down, ops.lap_up
    else:
        raise ValidationError(
            f"eigenbasis needs a symmetric operator; scheme {scheme!r} unsupported"
        )
    try:
        values, vectors = scipy.linalg.eigh(lap.toarray())
        parts: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for label, mat in ((GRADIENT, lower), (CURL, upper)):
            if mat is not None and mat.shape[0]:
                parts[label] = scipy.linalg.eigh(mat.toarray())
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc

    top = float(values[-1]) if n else 0.0
    if tol_zero is None:
        tol_zero = 1e-8 * top if top > 0 else 1e-8

    entries: list[tuple[float, int, str, np.ndarray]] = []
    rank = {HARMONIC: 0, GRADIENT: 1, CURL: 2}
    counted = 0
    for label in (GRADIENT, CURL):
        if label not in parts:
            continue
        vals, vecs = parts[label]
        for j in np.nonzero(vals > tol_zero)[0]:
            entries.append((float(vals[j]), rank[label], label, vecs[:, j]))
            counted += 1
    n_harmonic = n - counted
    if n_harmonic < 0 or (n_harmonic > 0 and values[n_harmonic - 1] > tol_zero):
        raise NumericalError(
            f"inconsistent class counts for L_{k}: {counted} nonzero-frequency "
            f"pairs but kernel boundary eigenvalue exceeds tol {tol_zero:.3e}"
        )
    for j in range(n_harmonic):
        entries.append((float(values[j]), rank[HARMONIC], HARMONIC, vectors[:, j]))
    entries.sort(key=lambda item: (item[0], item[1]))

    out_values = np.array([item[0] for item in entries])
    out_vectors = np.empty((n, n))
    classes: list[str] = []
    for idx, (_, _, label, vec) in enumerate(entries):
        nonzero = np.nonzero(np.abs(vec) > 1e-12 * np.abs(vec).max())[0]
        if nonzero.size and vec[nonzero[0]] < 0:
            vec = -vec
        out_vectors[:, idx] = vec
        classes.append(label)

    res_d = (
        np.linalg.norm(lower @ out_vectors, axis=0) if lower is not None else np.zeros(n)
    )
    res_u = (
        np.linalg.norm(upper @ out_vectors, axis=0) if upper is not None else np.zeros(n)
    )
    for j, label in enumerate(classes):
        ok = {
            HARMONIC: res_d[j] <= tol_zero and res_u[j] <= tol_zero,
            GRADIENT: res_u[j] <= tol_zero,
            CURL: res_d[j] <= tol_zero,
        }[label]
        if not ok:
            raise NumericalError(
                f"eigenvector {j} of L_{k} is ambiguous: lower residual "
                f"{res_d[j]:.3e}, upper residual {res_u[j]:.3e}, tol {tol_zero:.3e}"
            )
    return SpectralBasis(
        k=k,
        scheme=scheme,
        values=out_values,
        vectors=out_vectors,
        classes=tuple(classes),
        tol_zero=float(tol_zero),
    )


def sft(basis: SpectralBasis, x: np.ndarray) -> np.ndarray:
    """Simplicial Fourier transform: coefficients U_kᵀ x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != basis.vectors.shape[0]:
        raise ValidationError(
            f"signal has {x.shape[0]} rows, basis has {basis.vectors.shape[0]}"
        )
    return basis.vectors.T @ x


def isft(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """Inverse SFT: U_k @ coeffs."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] != basis.vectors.shape[1]:
        raise ValidationError(
            f"coefficients have {coeffs.shape[0]} rows, basis has {basis.vectors.shape[1]}"
        )
    return basis.vectors @ coeffs


def hodge_decompose(
    sc: SimplicialComplex, k: int, x: np.ndarray, scheme: str = "raw"
) -> HodgeParts:
    """Split x into gradient, harmonic, and curl components via the basis."""
    basis = eigenbasis(sc, k, scheme=scheme)
    x = np.asarray(x, dtype=np.float64)
    coeffs = sft(basis, x)
    parts = {}
    for label in (GRADIENT, HARMONIC, CURL):
        masked = np.zeros_like(coeffs)
        idx = basis.indices(label)
        masked[idx] = coeffs[idx]
        parts[label] = isft(basis, masked)
    return HodgeParts(k=k, x_g=parts[GRADIENT], x_h=parts[HARMONIC], x_c=parts[CURL])


def filter_frequency_response(
    filt: "_filters.ScFilter", basis: SpectralBasis
) -> np.ndarray:
    """Frequency response of a filter at each of the basis' eigenvalues.

    Identity taps of both coefficient series act at every frequency; the
    polynomial part of the lower series acts only on gradient frequencies
    and the upper series only on curl frequencies.
    """
    if filt.k != basis.k:
        raise ValidationError(f"filter order {filt.k} != basis order {basis.k}")
    w_d0 = filt.w_d[0] if filt.w_d.size else 0.0
    w_u0 = filt.w_u[0] if filt.w_u.size else 0.0
    response = np.empty(basis.values.shape[0])
    for i, (lam, label) in enumerate(zip(basis.values, basis.classes)):
        if label == HARMONIC:
            response[i] = w_d0 + w_u0
        elif label == GRADIENT:
            powers = lam ** np.arange(filt.w_d.size)
            response[i] = float(powers @ filt.w_d) + w_u0
        else:
            powers = lam ** np.arange(filt.w_u.size)
            response[i] = float(powers @ filt.w_u) + w_d0
    return response


def spillage_report(
    sc: SimplicialComplex,
    k: int,
    x: np.ndarray,
    nonlinearity: str,
    scheme: str = "raw",
) -> dict[str, tuple[float, float]]:
    """Embedding energy per frequency class before/after an elementwise map.

    Returns {class: (energy before, energy after)} where energy is the
    squared norm of the class' SFT coefficients.  An odd nonlinearity on a
    pure gradient (or curl) flow spilling energy into the other classes is
    the effect this diagnostic exposes.
    """
    if nonlinearity not in _SIGMA:
        raise ValidationError(f"unknown nonlinearity {nonlinearity!r}")
    basis = eigenbasis(sc, k, scheme=scheme)
    x = np.asarray(x, dtype=np.float64)
    before = sft(basis, x)
    after = sft(basis, _SIGMA[nonlinearity](x))
    report = {}
    for label in (HARMONIC, GRADIENT, CURL):
        idx = basis.indices(label)
        report[label] = (
            float(np.sum(before[idx] ** 2)),
            float(np.sum(after[idx] ** 2)),
        )
    return report
