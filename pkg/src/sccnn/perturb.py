"""Relative domain perturbations and the first-order stability bound.

A misestimated simplicial weight enters every normalization matrix built
from it, so weight noise shows up as *relative* perturbations of the
Hodge Laplacians, L-hat = L + EL + LE, and of the projection operators,
R-hat = R + JR.  This module generates such perturbations (multiplicative
uniform noise on the per-order weights), recovers the realized E and J
matrices for measurement, evaluates how far a model's outputs move, and
computes the analytic per-order bound

    d = C_sigma^L * sum_{l=1..L} Zhat^{l-1} T Z^{L-l} beta

with tridiagonal T, Z, Zhat assembled from measured constants.

Everything here is desk-scale: E/J recovery and the measured constants use
dense eigendecompositions and SVDs, which is fine for the few-hundred-
simplex complexes these diagnostics are meant for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complexes import (
    Cochain,
    Operators,
    SimplicialComplex,
    _weight_diagonals,
    normalized_operators,
)
from .errors import NumericalError, ValidationError
from .filters import frequency_grids
from .models import ModelSpec, _order_plan, forward

__all__ = [
    "PerturbationSpec",
    "RealizedPerturbation",
    "StabilityConstants",
    "perturb_complex",
    "output_distance",
    "stability_bound",
    "measure_constants",
    "normalize_filters",
]

_LIPSCHITZ = {"identity": 1.0, "tanh": 1.0, "leaky_relu": 1.0, "sigmoid": 0.25}


@dataclass(frozen=True)
class PerturbationSpec:
    """Per-order weight-noise magnitudes for a weighted complex.

    ``epsilons[k]`` scales the weights of the k-simplices by (1 + delta)
    with delta drawn elementwise from the uniform interval
    [-epsilons[k]/2, epsilons[k]/2).  Magnitudes live in [0, 1]: one means
    weights may be off by up to fifty percent either way, which is the
    largest misestimation the relative model is meant to describe.
    """

    epsilons: dict[int, float]
    seed: int = 0

    def __post_init__(self):
        clean: dict[int, float] = {}
        for order, eps in dict(self.epsilons).items():
            eps = float(eps)
            if not 0.0 <= eps <= 1.0:
                raise ValidationError(
                    f"perturbation magnitude for order {order} must be in [0, 1], got {eps}"
                )
            clean[int(order)] = eps
        object.__setattr__(self, "epsilons", clean)


@dataclass(frozen=True)
class RealizedPerturbation:
    """The perturbation a sampled weight noise actually produced.

    E matrices are recovered per order and side by solving the relative
    model EL + LE = L-hat - L; J matrices solve J = (R-hat - R) R^+.
    Norm arrays are indexed by order with zeros where a side does not
    exist (no lower part at order 0, no upper part at the top order).
    ``residual_down/up`` report the relative misfit of the recovered E:
    the weight-noise mechanism is only first-order equal to the relative
    model, so the residual is small but not zero for finite noise.
    """

    scheme: str
    factors: dict[int, np.ndarray]
    e_down: dict[int, np.ndarray]
    e_up: dict[int, np.ndarray]
    j_down: dict[int, np.ndarray]
    j_up: dict[int, np.ndarray]
    eps_down: np.ndarray
    eps_up: np.ndarray
    epsbar_down: np.ndarray
    epsbar_up: np.ndarray
    residual_down: dict[int, float] = field(default_factory=dict)
    residual_up: dict[int, float] = field(default_factory=dict)


def _dense(mat) -> np.ndarray:
    return mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)


def _conjugation(sc: SimplicialComplex, k: int, scheme: str) -> np.ndarray | None:
    """Diagonal m with  m^-1/2 L m^1/2  symmetric, or None when L already is."""
    if scheme == "random_walk_symmetric":
        return None
    # Shares the weighted-scheme diagonals with the operator builder so the
    # conjugation matches the Laplacians exactly.
    return _weight_diagonals(sc)[(k, k)]


def _symmetrized(mat: np.ndarray, m: np.ndarray | None) -> np.ndarray:
    if m is None:
        return 0.5 * (mat + mat.T)
    root = np.sqrt(m)
    conj = (mat / root[:, None]) * root[None, :]
    return 0.5 * (conj + conj.T)


def _unconjugate(mat: np.ndarray, m: np.ndarray | None) -> np.ndarray:
    if m is None:
        return mat
    root = np.sqrt(m)
    return (mat * root[:, None]) / root[None, :]


def _solve_relative(
    base: np.ndarray, perturbed: np.ndarray, m: np.ndarray | None
) -> tuple[np.ndarray, float]:
    """Recover E with  EL + LE ~= L-hat - L  (minimal-norm, symmetrized).

    Solved in the eigenbasis of the symmetrized Laplacian: there the
    equation decouples into entrywise divisions by lambda_i + lambda_j,
    with zero-sum pairs (kernel against kernel) left at zero, which is the
    least-squares solution on the solvable part.  Returns E in the original
    coordinates together with the relative residual of the fit.
    """
    diff = perturbed - base
    scale = float(np.linalg.norm(diff))
    n = base.shape[0]
    if scale == 0.0:
        return np.zeros((n, n)), 0.0
    lap_s = _symmetrized(base, m)
    diff_s = _symmetrized(diff, m)
    try:
        lam, q = np.linalg.eigh(lap_s)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh on PSD
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    denom = lam[:, None] + lam[None, :]
    tol = 1e-12 * max(1.0, float(lam.max(initial=0.0)))
    coeffs = q.T @ diff_s @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        coeffs = np.where(denom > tol, coeffs / np.where(denom > tol, denom, 1.0), 0.0)
    e_s = q @ coeffs @ q.T
    e_mat = _unconjugate(e_s, m)
    fit = e_mat @ base + base @ e_mat
    residual = float(np.linalg.norm(fit - diff) / scale)
    return e_mat, residual


def _solve_projection(base, perturbed) -> np.ndarray:
    """Recover J with  R-hat = R + JR  via the pseudoinverse of R."""
    base = _dense(base)
    perturbed = _dense(perturbed)
    diff = perturbed - base
    if not diff.any():
        return np.zeros((base.shape[0], base.shape[0]))
    return diff @ np.linalg.pinv(base, rcond=1e-12)


def perturb_complex(
    sc: SimplicialComplex,
    spec: PerturbationSpec,
    scheme: str = "random_walk",
) -> tuple[dict[int, Operators], RealizedPerturbation]:
    """Sample weight noise and rebuild every order's operators with it.

    Returns the perturbed operators per order plus the realized relative-
    perturbation matrices and their spectral norms.  Zero magnitudes leave
    the operators bit-identical.  Raw (unweighted) operators have no
    weights to misestimate, so the scheme must be a weighted one.
    """
    if scheme == "raw":
        raise ValidationError(
            "weight perturbations require a weighted scheme (weights enter "
            "through the normalization matrices)"
        )
    rng = np.random.default_rng(spec.seed)
    factors: dict[int, np.ndarray] = {}
    for order in sorted(spec.epsilons):
        eps = spec.epsilons[order]
        if order < 0 or order > sc.dim:
            raise ValidationError(f"perturbed order {order} outside 0..{sc.dim}")
        noise = rng.uniform(-eps / 2.0, eps / 2.0, size=sc.num(order))
        factors[order] = 1.0 + noise
    scale = {k: f for k, f in factors.items() if not np.all(f == 1.0)} or None

    orders = range(sc.dim + 1)
    base_ops = {k: normalized_operators(sc, k, scheme) for k in orders}
    pert_ops = {k: normalized_operators(sc, k, scheme, weight_scale=scale) for k in orders}

    n_orders = sc.dim + 1
    eps_down = np.zeros(n_orders)
    eps_up = np.zeros(n_orders)
    epsbar_down = np.zeros(n_orders)
    epsbar_up = np.zeros(n_orders)
    e_down: dict[int, np.ndarray] = {}
    e_up: dict[int, np.ndarray] = {}
    j_down: dict[int, np.ndarray] = {}
    j_up: dict[int, np.ndarray] = {}
    res_down: dict[int, float] = {}
    res_up: dict[int, float] = {}
    for k in orders:
        m = _conjugation(sc, k, scheme)
        if base_ops[k].lap_down is not None:
            e_mat, res = _solve_relative(
                _dense(base_ops[k].lap_down), _dense(pert_ops[k].lap_down), m
            )
            e_down[k] = e_mat
            res_down[k] = res
            eps_down[k] = float(np.linalg.norm(e_mat, 2)) if e_mat.any() else 0.0
            j_down[k] = _solve_projection(base_ops[k].proj_down, pert_ops[k].proj_down)
            epsbar_down[k] = (
                float(np.linalg.norm(j_down[k], 2)) if j_down[k].any() else 0.0
            )
        if base_ops[k].lap_up is not None:
            e_mat, res = _solve_relative(
                _dense(base_ops[k].lap_up), _dense(pert_ops[k].lap_up), m
            )
            e_up[k] = e_mat
            res_up[k] = res
            eps_up[k] = float(np.linalg.norm(e_mat, 2)) if e_mat.any() else 0.0
            j_up[k] = _solve_projection(base_ops[k].proj_up, pert_ops[k].proj_up)
            epsbar_up[k] = float(np.linalg.norm(j_up[k], 2)) if j_up[k].any() else 0.0

    realized = RealizedPerturbation(
        scheme=scheme,
        factors=factors,
        e_down=e_down,
        e_up=e_up,
        j_down=j_down,
        j_up=j_up,
        eps_down=eps_down,
        eps_up=eps_up,
        epsbar_down=epsbar_down,
        epsbar_up=epsbar_up,
        residual_down=res_down,
        residual_up=res_up,
    )
    return pert_ops, realized


def output_distance(
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    perturbed: dict[int, Operators],
    inputs: dict[int, Cochain],
) -> dict[int, float]:
    """Relative output deviation per order under the same parameters.

    Runs the model once on the complex's own operators and once on the
    perturbed set, returning ||x-hat - x|| / ||x|| per processed order.
    """
    base = forward(spec, params, sc, inputs)
    moved = forward(spec, params, sc, inputs, operators=perturbed)
    distances: dict[int, float] = {}
    for k in spec.orders:
        ref = float(np.linalg.norm(base[k].values))
        if ref == 0.0:
            raise ValidationError(
                f"order-{k} reference output has zero norm; relative distance undefined"
            )
        distances[k] = float(np.linalg.norm(moved[k].values - base[k].values)) / ref
    return distances


# ---------------------------------------------------------------------------
# the analytic bound


@dataclass(frozen=True)
class StabilityConstants:
    """Everything the per-order bound needs, one entry per order 0..K.

    Orders missing a side (no lower part at 0, no upper at K) carry zeros
    there.  ``c_down``/``c_up`` are the integral-Lipschitz constants of the
    self filters, ``c_proj_down``/``c_proj_up`` those of the projection
    filters, which is what the subdiagonal/superdiagonal entries of T use.
    """

    n_simplices: np.ndarray
    eps_down: np.ndarray
    eps_up: np.ndarray
    epsbar_down: np.ndarray
    epsbar_up: np.ndarray
    c_down: np.ndarray
    c_up: np.ndarray
    c_proj_down: np.ndarray
    c_proj_up: np.ndarray
    delta_down: np.ndarray
    delta_up: np.ndarray
    r_down: np.ndarray
    r_up: np.ndarray
    beta: np.ndarray
    c_sigma: float = 1.0

    def __post_init__(self):
        size = None
        for name in self.__dataclass_fields__:
            if name == "c_sigma":
                if not np.isfinite(self.c_sigma) or self.c_sigma < 0:
                    raise ValidationError("c_sigma must be finite and nonnegative")
                continue
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            if size is None:
                size = arr.size
            if arr.size != size:
                raise ValidationError(
                    f"constant arrays must share one length; {name} has {arr.size}, "
                    f"expected {size}"
                )
            if not np.isfinite(arr).all() or (arr < 0).any():
                raise ValidationError(f"constants must be finite and nonnegative ({name})")
            object.__setattr__(self, name, arr)

    @property
    def orders(self) -> int:
        return self.n_simplices.size

    def misalignment_down(self) -> np.ndarray:
        """Per-order factor 2(1 + delta sqrt(N_k)) for the lower side."""
        return 2.0 * (1.0 + self.delta_down * np.sqrt(self.n_simplices))

    def misalignment_up(self) -> np.ndarray:
        return 2.0 * (1.0 + self.delta_up * np.sqrt(self.n_simplices))

    def t_matrix(self) -> np.ndarray:
        big_d = self.misalignment_down()
        big_u = self.misalignment_up()
        t_diag = self.c_down * big_d * self.eps_down + self.c_up * big_u * self.eps_up
        mat = np.diag(t_diag)
        for k in range(1, self.orders):
            mat[k, k - 1] = (
                self.r_down[k] * self.epsbar_down[k]
                + self.c_proj_down[k] * big_d[k] * self.eps_down[k] * self.r_down[k]
            )
        for k in range(self.orders - 1):
            mat[k, k + 1] = (
                self.r_up[k] * self.epsbar_up[k]
                + self.c_proj_up[k] * big_u[k] * self.eps_up[k] * self.r_up[k]
            )
        return mat

    def z_matrix(self) -> np.ndarray:
        mat = np.eye(self.orders)
        for k in range(1, self.orders):
            mat[k, k - 1] = self.r_down[k]
        for k in range(self.orders - 1):
            mat[k, k + 1] = self.r_up[k]
        return mat

    def zhat_matrix(self) -> np.ndarray:
        mat = np.eye(self.orders)
        for k in range(1, self.orders):
            mat[k, k - 1] = self.r_down[k] * (1.0 + self.epsbar_down[k])
        for k in range(self.orders - 1):
            mat[k, k + 1] = self.r_up[k] * (1.0 + self.epsbar_up[k])
        return mat


def stability_bound(constants: StabilityConstants, layers: int) -> np.ndarray:
    """Per-order bound d on ||x-hat^L - x^L|| for an L-layer network.

    d = C_sigma^L sum_{l=1..L} Zhat^{l-1} T Z^{L-l} beta.  The bound is
    entrywise nonnegative and zero wherever no perturbation can reach the
    order within L layers.
    """
    if layers < 1:
        raise ValidationError(f"layer count must be >= 1, got {layers}")
    t_mat = constants.t_matrix()
    z_mat = constants.z_matrix()
    zhat = constants.zhat_matrix()
    total = np.zeros(constants.orders)
    left = np.eye(constants.orders)
    for ell in range(1, layers + 1):
        right = np.linalg.matrix_power(z_mat, layers - ell)
        total = total + left @ t_mat @ (right @ constants.beta)
        left = left @ zhat
    return (constants.c_sigma**layers) * total


# ---------------------------------------------------------------------------
# measuring the constants


def _branch_taps(
    spec: ModelSpec, params: dict[str, np.ndarray], layer: int, k: int
) -> dict[str, dict[int, np.ndarray]]:
    """Tap weights of one layer-order cell, keyed branch name then tap."""
    out: dict[str, dict[int, np.ndarray]] = {}
    for br in _order_plan(spec, k):
        out[br.name] = {
            t: params[f"l{layer}.k{k}.{br.name}.t{t}"] for t in br.taps
        }
    return out


def _bank_norms(taps: dict[int, np.ndarray], lam: np.ndarray, derivative: bool) -> np.ndarray:
    """||sum_t c_t W_t lam^t||_2 per grid point; c_t = t for the IL form."""
    if not taps or lam.size == 0:
        return np.zeros(0)
    t_arr = np.array(sorted(taps))
    stack = np.stack([np.atleast_2d(taps[t]) for t in t_arr])
    coeff = t_arr.astype(float) if derivative else np.ones(t_arr.size)
    powers = np.power.outer(lam, t_arr) * coeff
    resp = np.tensordot(powers, stack, axes=(1, 0))
    return np.linalg.norm(resp, ord=2, axis=(1, 2))


def _grid_with_zero(grid: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], grid]) if grid.size else np.zeros(1)


def _merge(*tap_sets: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    merged: dict[int, np.ndarray] = {}
    for taps in tap_sets:
        for t, w in taps.items():
            merged[t] = merged[t] + w if t in merged else w
    return merged


def _self_taps(banks: dict[str, dict[int, np.ndarray]]) -> tuple[dict, dict]:
    """(down taps, up taps) of the self filter, with joint taps on both."""
    down = dict(banks.get("self_down", {}))
    up = dict(banks.get("self_up", {}))
    joint = banks.get("joint", {})
    if joint:
        down = _merge(down, joint)
        up = _merge(up, joint)
    if "dense" in banks:
        down = _merge(down, {0: banks["dense"][0]})
    return down, up


def _self_response_max(
    banks: dict[str, dict[int, np.ndarray]], grid_d: np.ndarray, grid_c: np.ndarray
) -> float:
    """max ||h(lambda)||_2 of the self filter over its realized bands.

    Separate lower/upper tap series are one filter: on the gradient band
    the upper series contributes only its identity tap and vice versa, and
    the harmonic point (lambda = 0, appended to both grids) sees both
    identity taps.  A full-Laplacian series responds with the same
    polynomial on every band, and a dense (operator-free) tap is constant.
    """
    down = banks.get("self_down", {})
    up = banks.get("self_up", {})
    joint = banks.get("joint", {})
    best = 0.0
    if down or up or joint:
        grad_taps = _merge(down, joint)
        if 0 in up:
            grad_taps = _merge(grad_taps, {0: up[0]})
        curl_taps = _merge(up, joint)
        if 0 in down:
            curl_taps = _merge(curl_taps, {0: down[0]})
        for taps, grid in ((grad_taps, grid_d), (curl_taps, grid_c)):
            if taps:
                norms = _bank_norms(taps, _grid_with_zero(grid), False)
                best = max(best, float(np.max(norms)))
    if banks.get("dense"):
        best = max(best, float(np.linalg.norm(banks["dense"][0], 2)))
    return best


def _eigvec_misalignment(lap_s: np.ndarray, e_s: np.ndarray) -> float:
    """delta = (||V - U|| + 1)^2 - 1 between perturbation and Laplacian bases.

    Both spectra are sorted ascending and each perturbation eigenvector is
    sign-aligned with its Laplacian partner (eigenvector signs are free, so
    the aligned choice is the tightest valid measurement).
    """
    if not e_s.any():
        return 0.0
    _, u_vecs = np.linalg.eigh(lap_s)
    _, v_vecs = np.linalg.eigh(e_s)
    signs = np.sign(np.sum(v_vecs * u_vecs, axis=0))
    signs[signs == 0] = 1.0
    diff = v_vecs * signs - u_vecs
    gap = float(np.linalg.norm(diff, 2))
    return (gap + 1.0) ** 2 - 1.0


def measure_constants(
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    perturbed: RealizedPerturbation,
    inputs: dict[int, Cochain],
    step: float = 0.01,
) -> StabilityConstants:
    """Fill every bound constant from the model, the complex, and a
    realized perturbation.

    Filter constants are grid maxima of the integral-Lipschitz quantity
    ||sum_t t W_t lambda^t||_2 over the sampled frequency bands, taken over
    layers; projection norms and perturbation norms are dense spectral
    norms; input energies are Euclidean norms of the initial cochains.
    """
    n_orders = sc.dim + 1
    arrays = {
        name: np.zeros(n_orders)
        for name in (
            "c_down",
            "c_up",
            "c_proj_down",
            "c_proj_up",
            "delta_down",
            "delta_up",
            "r_down",
            "r_up",
            "beta",
        )
    }
    n_simplices = np.array([sc.num(k) for k in range(n_orders)], dtype=float)

    for k in range(n_orders):
        ops = normalized_operators(sc, k, spec.scheme)
        grid_d, grid_c = frequency_grids(ops, step)
        if k in spec.orders:
            for layer in range(1, spec.layers + 1):
                banks = _branch_taps(spec, params, layer, k)
                down, up = _self_taps(banks)
                if grid_d.size and down:
                    arrays["c_down"][k] = max(
                        arrays["c_down"][k], float(np.max(_bank_norms(down, grid_d, True)))
                    )
                if grid_c.size and up:
                    arrays["c_up"][k] = max(
                        arrays["c_up"][k], float(np.max(_bank_norms(up, grid_c, True)))
                    )
                if grid_d.size and banks.get("proj_down"):
                    arrays["c_proj_down"][k] = max(
                        arrays["c_proj_down"][k],
                        float(np.max(_bank_norms(banks["proj_down"], grid_d, True))),
                    )
                if grid_c.size and banks.get("proj_up"):
                    arrays["c_proj_up"][k] = max(
                        arrays["c_proj_up"][k],
                        float(np.max(_bank_norms(banks["proj_up"], grid_c, True))),
                    )
        if ops.proj_down is not None:
            arrays["r_down"][k] = float(np.linalg.norm(_dense(ops.proj_down), 2))
        if ops.proj_up is not None:
            arrays["r_up"][k] = float(np.linalg.norm(_dense(ops.proj_up), 2))
        m = _conjugation(sc, k, spec.scheme)
        if ops.lap_down is not None and k in perturbed.e_down:
            lap_s = _symmetrized(_dense(ops.lap_down), m)
            e_s = _symmetrized(perturbed.e_down[k], m)
            arrays["delta_down"][k] = _eigvec_misalignment(lap_s, e_s)
        if ops.lap_up is not None and k in perturbed.e_up:
            lap_s = _symmetrized(_dense(ops.lap_up), m)
            e_s = _symmetrized(perturbed.e_up[k], m)
            arrays["delta_up"][k] = _eigvec_misalignment(lap_s, e_s)
        if k in inputs:
            arrays["beta"][k] = float(np.linalg.norm(inputs[k].values))

    return StabilityConstants(
        n_simplices=n_simplices,
        eps_down=perturbed.eps_down,
        eps_up=perturbed.eps_up,
        epsbar_down=perturbed.epsbar_down,
        epsbar_up=perturbed.epsbar_up,
        c_down=arrays["c_down"],
        c_up=arrays["c_up"],
        c_proj_down=arrays["c_proj_down"],
        c_proj_up=arrays["c_proj_up"],
        delta_down=arrays["delta_down"],
        delta_up=arrays["delta_up"],
        r_down=arrays["r_down"],
        r_up=arrays["r_up"],
        beta=arrays["beta"],
        c_sigma=_LIPSCHITZ[spec.nonlinearity],
    )


def normalize_filters(
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    step: float = 0.01,
) -> dict[str, np.ndarray]:
    """Rescale filters so every frequency response stays within one.

    The bound assumes ||h(lambda)|| <= 1 for the self and projection
    filters alike.  Each filter whose realized maximum exceeds one is
    divided by that maximum (per layer and order); filters already inside
    the unit band are left untouched.  Readout parameters pass through.
    """
    out = dict(params)
    grids = {}
    for k in spec.orders:
        ops = normalized_operators(sc, k, spec.scheme)
        grids[k] = frequency_grids(ops, step)
    for layer in range(1, spec.layers + 1):
        for k in spec.orders:
            grid_d, grid_c = grids[k]
            banks = _branch_taps(spec, params, layer, k)
            self_names = [n for n in ("self_down", "self_up", "joint", "dense") if n in banks]
            if self_names:
                peak = _self_response_max(banks, grid_d, grid_c)
                if peak > 1.0:
                    for name in self_names:
                        for t in banks[name]:
                            key = f"l{layer}.k{k}.{name}.t{t}"
                            out[key] = out[key] / peak
            for name, grid in (("proj_down", grid_d), ("proj_up", grid_c)):
                if name in banks:
                    peak = float(np.max(_bank_norms(banks[name], _grid_with_zero(grid), False)))
                    if peak > 1.0:
                        for t in banks[name]:
                            key = f"l{layer}.k{k}.{name}.t{t}"
                            out[key] = out[key] / peak
    return out
