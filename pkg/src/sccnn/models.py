"""Convolutional architectures on simplicial complexes, training, readouts.

The central layer updates a feature matrix on every order of the complex
from its own order and both neighboring orders:

    X_k <- sigma(  sum_t L_{k,d}^t R_{k,d} X_{k-1} W'_{d,t}
                 + sum_t L_{k,d}^t X_k W_{d,t}
                 + sum_t L_{k,u}^t X_k W_{u,t}
                 + sum_t L_{k,u}^t R_{k,u} X_{k+1} W'_{u,t} )

The lower projection is filtered only by lower-Laplacian powers and the
upper projection only by upper powers; the branches from below at k=0 and
from above at the top order do not exist and carry no parameters.  Every
baseline variant here is a constrained instance of that layer (checked to
1e-10 by the test suite), which is what makes the comparison experiments
meaningful.

Internally all signals are carried as (N_k, batch, F) arrays so a whole
batch shares each sparse shift and each dense weight product.
"""

from __future__ import annotations

import base64
import dataclasses
import itertools
import json
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Sequence

import numpy as np

from .autodiff import ELEMENTWISE_KINDS, Node, Tape, adam_step
from .complexes import (
    Cochain,
    Operators,
    SimplicialComplex,
    incidence,
    normalized_operators,
)
from .errors import NumericalError, ValidationError
from .filters import frequency_grids
from .kernels import LinOp

__all__ = [
    "VARIANTS",
    "ModelSpec",
    "TrainOptions",
    "TrajectorySample",
    "TrajectorySplits",
    "init_params",
    "forward",
    "readout_simplex",
    "readout_trajectory",
    "train",
    "trajectory_accuracy",
    "simplex_scores",
    "measure_il_constants",
    "auc_score",
    "save_checkpoint",
    "load_checkpoint",
]

VARIANTS = (
    "sccnn",
    "snn",
    "psnn",
    "scnn",
    "bunch",
    "gnn",
    "mlp",
    "linear_gf",
    "linear_scf",
    "linear_cf_sc",
)

_MULTI_ORDER = {"sccnn", "bunch", "linear_cf_sc"}
_ORDER_ZERO = {"gnn", "linear_gf", "mlp"}
_IDENTITY_ONLY = {"linear_gf", "linear_scf", "linear_cf_sc"}
_SCHEMES = ("raw", "random_walk", "random_walk_symmetric")
READOUTS = ("trajectory", "simplex_nodes", "simplex_edges")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; validation enforces the variant table.

    `features` lists the width per depth, input first, so it has
    `layers + 1` entries.  Single-order variants set `order`; the
    convolutional variants that couple orders leave it None and process
    orders 0..dim.  `t_proj_down`/`t_proj_up` default to the matching
    self-branch order.
    """

    variant: str
    dim: int
    layers: int
    features: tuple[int, ...]
    t_down: int = 1
    t_up: int = 1
    t_proj_down: int | None = None
    t_proj_up: int | None = None
    nonlinearity: str = "tanh"
    scheme: str = "raw"
    order: int | None = None
    readout: str | None = None
    readout_order: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(int(f) for f in self.features))
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        if self.dim < 0 or self.layers < 1:
            raise ValidationError("dim must be >= 0 and layers >= 1")
        if len(self.features) != self.layers + 1:
            raise ValidationError(
                f"features must list {self.layers + 1} widths, got {len(self.features)}"
            )
        if any(f < 1 for f in self.features):
            raise ValidationError("feature widths must be positive")
        if min(self.t_down, self.t_up) < 0:
            raise ValidationError("filter orders must be nonnegative")
        if self.nonlinearity not in ELEMENTWISE_KINDS:
            raise ValidationError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.scheme not in _SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.readout is not None and self.readout not in READOUTS:
            raise ValidationError(f"unknown readout {self.readout!r}")
        if self.variant in _MULTI_ORDER:
            if self.order is not None:
                raise ValidationError(f"{self.variant} processes all orders; order must be None")
        else:
            if self.variant in _ORDER_ZERO and self.order not in (None, 0):
                raise ValidationError(f"{self.variant} is defined on order 0 only")
            k = 0 if self.variant in _ORDER_ZERO else self.order
            if k is None:
                raise ValidationError(f"{self.variant} needs a target order")
            if not 0 <= k <= self.dim:
                raise ValidationError(f"order {k} outside 0..{self.dim}")
            object.__setattr__(self, "order", k)
        if self.variant in {"psnn", "bunch"} and (self.t_down, self.t_up) != (1, 1):
            raise ValidationError(f"{self.variant} fixes t_down = t_up = 1")
        if self.variant == "snn" and self.t_down != self.t_up:
            raise ValidationError("snn shares lower/upper coefficients; orders must match")
        if self.variant in _IDENTITY_ONLY and self.nonlinearity != "identity":
            raise ValidationError(f"{self.variant} requires the identity nonlinearity")
        if self.readout in ("simplex_nodes", "simplex_edges"):
            if self.readout_order is None or not 1 <= self.readout_order <= self.dim + 1:
                raise ValidationError("simplex readout needs a candidate order >= 1")

    @property
    def orders(self) -> tuple[int, ...]:
        if self.variant in _MULTI_ORDER:
            return tuple(range(self.dim + 1))
        return (self.order,)

    @property
    def readout_source(self) -> int:
        return {"trajectory": 1, "simplex_nodes": 0, "simplex_edges": 1}[self.readout]


@dataclass(frozen=True)
class TrainOptions:
    epochs: int = 1000
    lr: float = 0.001
    batch: int = 100
    weight_decay: float = 0.0
    il_weight: float = 0.0
    patience: int = 100
    dtype: str = "float64"
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError("epochs must be nonnegative")
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")
        if np.dtype(self.dtype) not in (np.dtype("float32"), np.dtype("float64")):
            raise ValidationError("dtype must be float32 or float64")


@dataclass(frozen=True)
class TrajectorySample:
    """One prefix flow with its candidate next nodes (dense node ids)."""

    flow: np.ndarray
    last_node: int
    candidates: tuple[int, ...]
    target: int

    def __post_init__(self):
        object.__setattr__(self, "flow", np.asarray(self.flow, dtype=np.float64))
        if not self.candidates:
            raise ValidationError("empty candidate set")
        if not 0 <= self.target < len(self.candidates):
            raise ValidationError("target outside candidate list")


@dataclass(frozen=True)
class TrajectorySplits:
    """Training view of a trajectory corpus: prepared samples per split."""

    train: tuple[TrajectorySample, ...]
    val: tuple[TrajectorySample, ...]
    test: tuple[TrajectorySample, ...]


# ---------------------------------------------------------------------------
# layer plans


@dataclass(frozen=True)
class _Branch:
    name: str
    source: int
    proj: str | None  # down | up | None
    shift: str | None  # down | up | joint | None
    taps: tuple[int, ...]


def _order_plan(spec: ModelSpec, k: int) -> tuple[_Branch, ...]:
    """Branches feeding order k for one layer of the given variant."""
    v = spec.variant
    tpd = spec.t_down if spec.t_proj_down is None else spec.t_proj_down
    tpu = spec.t_up if spec.t_proj_up is None else spec.t_proj_up
    down = tuple(range(spec.t_down + 1))
    up = tuple(range(spec.t_up + 1))
    plan: list[_Branch] = []
    if v in ("sccnn", "linear_cf_sc"):
        if k > 0:
            plan.append(_Branch("proj_down", k - 1, "down", "down", tuple(range(tpd + 1))))
            plan.append(_Branch("self_down", k, None, "down", down))
        if k < spec.dim:
            plan.append(_Branch("self_up", k, None, "up", up))
            plan.append(_Branch("proj_up", k + 1, "up", "up", tuple(range(tpu + 1))))
    elif v == "bunch":
        if k > 0:
            plan.append(_Branch("proj_down", k - 1, "down", None, (0,)))
        plan.append(_Branch("joint", k, None, "joint", (0, 1)))
        if k < spec.dim:
            plan.append(_Branch("proj_up", k + 1, "up", None, (0,)))
    elif v in ("scnn", "linear_scf"):
        if k > 0:
            plan.append(_Branch("self_down", k, None, "down", down))
        if k < spec.dim:
            plan.append(_Branch("self_up", k, None, "up", up))
    elif v == "snn":
        plan.append(_Branch("joint", k, None, "joint", down))
    elif v == "psnn":
        plan.append(_Branch("joint", k, None, None, (0,)))
        if k > 0:
            plan.append(_Branch("self_down", k, None, "down", (1,)))
        if k < spec.dim:
            plan.append(_Branch("self_up", k, None, "up", (1,)))
    elif v in ("gnn", "linear_gf"):
        plan.append(_Branch("self_up", 0, None, "up", up))
    else:  # mlp
        plan.append(_Branch("dense", 0, None, None, (0,)))
    return tuple(plan)


def _key(layer: int, k: int, branch: str, tap: int) -> str:
    return f"l{layer}.k{k}.{branch}.t{tap}"


def _readout_keys(spec: ModelSpec) -> list[tuple[str, tuple[int, ...]]]:
    if spec.readout is None:
        return []
    f_out = spec.features[-1]
    if spec.readout == "trajectory":
        return [("readout.proj.w", (f_out, 1))]
    n_const = _num_constituents(spec.readout_order, spec.readout_source)
    width = n_const * f_out
    return [
        ("readout.hidden.w", (width, width)),
        ("readout.hidden.b", (1, width)),
        ("readout.out.w", (width, 1)),
        ("readout.out.b", (1, 1)),
    ]


def _num_constituents(candidate_order: int, source_order: int) -> int:
    from math import comb

    return comb(candidate_order + 1, source_order + 1)


def init_params(spec: ModelSpec, seed: int | None = None) -> dict[str, np.ndarray]:
    """Uniform [-1/sqrt(F_in), 1/sqrt(F_in)] weights, keyed layer.order.branch.tap."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    params: dict[str, np.ndarray] = {}
    for layer in range(1, spec.layers + 1):
        f_in, f_out = spec.features[layer - 1], spec.features[layer]
        bound = 1.0 / np.sqrt(f_in)
        for k in spec.orders:
            for br in _order_plan(spec, k):
                for t in br.taps:
                    params[_key(layer, k, br.name, t)] = rng.uniform(
                        -bound, bound, size=(f_in, f_out)
                    )
    for name, shape in _readout_keys(spec):
        bound = 1.0 / np.sqrt(shape[0])
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


# ---------------------------------------------------------------------------
# forward


@dataclass(frozen=True)
class _Ops:
    n: int
    down: LinOp | None
    up: LinOp | None
    proj_down: LinOp | None
    proj_up: LinOp | None


def _build_ops(
    spec: ModelSpec,
    sc: SimplicialComplex,
    dtype,
    operators: dict[int, Operators] | None = None,
) -> dict[int, _Ops]:
    if sc.dim != spec.dim:
        raise ValidationError(f"spec expects a dim-{spec.dim} complex, got dim {sc.dim}")
    if spec.variant == "mlp":
        return {0: _Ops(sc.num(0), None, None, None, None)}

    def lin(mat):
        return None if mat is None else LinOp(mat, dtype=dtype)

    sets = {}
    for k in spec.orders:
        if operators is not None:
            if k not in operators:
                raise ValidationError(f"operator override missing order {k}")
            ops = operators[k]
        else:
            ops = normalized_operators(sc, k, spec.scheme)
        sets[k] = _Ops(
            sc.num(k), lin(ops.lap_down), lin(ops.lap_up), lin(ops.proj_down), lin(ops.proj_up)
        )
    return sets


def _shift_sequence(tape, ops: _Ops, kind: str | None, base: Node, t_max: int) -> list[Node | None]:
    """[base, S base, S^2 base, ...] where S is the requested Laplacian."""
    n, b, f = base.shape
    seq: list[Node | None] = [base]
    if kind is None or t_max == 0:
        return seq + [None] * t_max
    mats = {"down": [ops.down], "up": [ops.up], "joint": [ops.down, ops.up]}[kind]
    mats = [m for m in mats if m is not None]
    cur = base
    for _ in range(t_max):
        if cur is None or not mats:
            seq.append(None)
            continue
        flat = tape.reshape(cur, (n, b * f))
        parts = [tape.sparse_matmul(m, flat) for m in mats]
        nxt = parts[0] if len(parts) == 1 else tape.add(*parts)
        cur = tape.reshape(nxt, (n, b, f))
        seq.append(cur)
    return seq


def _forward_stack(
    tape: Tape,
    spec: ModelSpec,
    opsets: dict[int, _Ops],
    pnodes: dict[str, Node],
    states: dict[int, Node | None],
    n_batch: int,
) -> dict[int, Node | None]:
    """Run every layer; states map order -> (N_k, B, F) node or None for zero."""
    for layer in range(1, spec.layers + 1):
        f_in, f_out = spec.features[layer - 1], spec.features[layer]
        new: dict[int, Node | None] = {}
        for k in spec.orders:
            n_k = opsets[k].n
            bases: list[Node] = []
            weights: list[Node] = []
            for br in _order_plan(spec, k):
                src = states[br.source]
                if src is None:
                    continue
                node = src
                if br.proj is not None:
                    op = opsets[k].proj_down if br.proj == "down" else opsets[k].proj_up
                    flat = tape.reshape(node, (node.shape[0], n_batch * f_in))
                    node = tape.reshape(tape.sparse_matmul(op, flat), (n_k, n_batch, f_in))
                seq = _shift_sequence(tape, opsets[k], br.shift, node, max(br.taps))
                for t in br.taps:
                    if seq[t] is None:
                        continue
                    bases.append(tape.reshape(seq[t], (n_k * n_batch, f_in)))
                    weights.append(pnodes[_key(layer, k, br.name, t)])
            if not bases:
                new[k] = None
                continue
            z = tape.reshape(tape.tap_matmul(bases, weights), (n_k, n_batch, f_out))
            new[k] = tape.elementwise(z, spec.nonlinearity)
        states = new
    return states


def _input_states(
    tape: Tape, spec: ModelSpec, opsets: dict[int, _Ops], stacks: dict[int, np.ndarray]
) -> dict[int, Node | None]:
    states: dict[int, Node | None] = {}
    skip_zero = spec.nonlinearity != "sigmoid"  # sigma(0) must stay 0 to skip
    for k in spec.orders:
        x = stacks[k]
        if x.shape[0] != opsets[k].n or x.ndim != 3 or x.shape[2] != spec.features[0]:
            raise ValidationError(
                f"order-{k} input has shape {x.shape}, expected "
                f"({opsets[k].n}, B, {spec.features[0]})"
            )
        states[k] = None if (skip_zero and not x.any()) else tape.constant(x)
    return states


def forward(
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    inputs: dict[int, Cochain],
    operators: dict[int, Operators] | None = None,
) -> dict[int, Cochain]:
    """Apply the model to one cochain per processed order.

    Inputs must cover exactly the orders the variant touches (all of
    0..dim for the coupled variants); vectors are treated as single-feature
    matrices.  Returns the final-layer cochains.

    `operators` optionally replaces the shift/projection operators the
    complex would provide per order — the hook used to run identical
    parameters on perturbed operators.
    """
    if set(inputs) != set(spec.orders):
        raise ValidationError(
            f"inputs must cover orders {sorted(spec.orders)}, got {sorted(inputs)}"
        )
    _check_params(spec, params)
    opsets = _build_ops(spec, sc, np.float64, operators)
    stacks = {}
    for k, cochain in inputs.items():
        x = cochain.values
        if x.ndim == 1:
            x = x[:, None]
        stacks[k] = np.ascontiguousarray(x[:, None, :], dtype=np.float64)
    tape = Tape()
    pnodes = {name: tape.parameter(np.asarray(params[name])) for name in params}
    states = _input_states(tape, spec, opsets, stacks)
    out = _forward_stack(tape, spec, opsets, pnodes, states, 1)
    result = {}
    f_out = spec.features[-1]
    for k in spec.orders:
        node = out[k]
        if node is None:
            values = np.zeros((opsets[k].n, f_out))
        else:
            values = np.asarray(node.value.reshape(opsets[k].n, f_out), dtype=np.float64)
        result[k] = Cochain(k, values)
    return result


def _check_params(spec: ModelSpec, params: dict[str, np.ndarray]) -> None:
    expected = set(init_params(spec, seed=0))
    if set(params) != expected:
        missing = expected - set(params)
        extra = set(params) - expected
        raise ValidationError(f"parameter keys mismatch: missing {sorted(missing)[:4]}, extra {sorted(extra)[:4]}")


# ---------------------------------------------------------------------------
# readouts


def _constituent_indices(
    sc: SimplicialComplex, candidate: Sequence[int], source_order: int
) -> list[int]:
    verts = sorted(int(v) for v in candidate)
    if len(set(verts)) != len(verts):
        raise ValidationError(f"candidate {tuple(candidate)} repeats a vertex")
    return [sc.index_of(c) for c in itertools.combinations(verts, source_order + 1)]


def readout_simplex(
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    features: np.ndarray,
    candidate: Sequence[int],
    source_order: int,
) -> float:
    """Closure probability of a candidate simplex from constituent features.

    Concatenates the rows of `features` belonging to the candidate's
    source_order-simplices in lexicographic vertex order and applies the
    two-layer sigmoid MLP stored in `params`.
    """
    idx = _constituent_indices(sc, candidate, source_order)
    vec = np.concatenate([np.atleast_2d(features)[i] for i in idx])[None, :]
    if vec.shape[1] != params["readout.hidden.w"].shape[0]:
        raise ValidationError(
            f"readout expects width {params['readout.hidden.w'].shape[0]}, got {vec.shape[1]}"
        )
    hidden = 1.0 / (1.0 + np.exp(-(vec @ params["readout.hidden.w"] + params["readout.hidden.b"])))
    logit = float(hidden @ params["readout.out.w"] + params["readout.out.b"])
    return float(1.0 / (1.0 + np.exp(-logit)))


def readout_trajectory(
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    x1_out: np.ndarray,
    last_node: int,
    candidates: Sequence[int],
) -> np.ndarray:
    """Distribution over candidate next nodes from an edge embedding.

    Projects the final edge features to the nodes through the raw incidence
    matrix, x_up = B_1 (X W), and softmaxes the candidate entries.
    """
    if len(candidates) == 0:
        raise ValidationError("empty candidate set")
    x = np.atleast_2d(np.asarray(x1_out, dtype=np.float64))
    if x.shape[0] != sc.num(1):
        raise ValidationError(f"edge features have {x.shape[0]} rows, expected {sc.num(1)}")
    proj = incidence(sc, 1) @ (x @ params["readout.proj.w"])
    logits = proj[np.asarray(candidates, dtype=int), 0]
    z = np.exp(logits - logits.max())
    return z / z.sum()


# ---------------------------------------------------------------------------
# integral-Lipschitz bookkeeping


def _il_tables(
    spec: ModelSpec, opsets: dict[int, _Ops], dtype
) -> list[tuple[int, str, str, np.ndarray, tuple[int, ...]]]:
    """(order, branch, side, coeff table, taps>=1) for every shifted series."""
    grids: dict[tuple[int, str], np.ndarray] = {}
    for k, ops in opsets.items():
        view = SimpleNamespace(
            lap_down=ops.down.mat if ops.down is not None else None,
            lap_up=ops.up.mat if ops.up is not None else None,
        )
        grids[(k, "down")], grids[(k, "up")] = frequency_grids(view)
    tables = []
    for k in spec.orders:
        for br in _order_plan(spec, k):
            taps = tuple(t for t in br.taps if t >= 1)
            if br.shift is None or not taps:
                continue
            sides = ("down", "up") if br.shift == "joint" else (br.shift,)
            for side in sides:
                lam = grids[(k, side)]
                if lam.size == 0:
                    continue
                coeffs = np.stack([t * lam**t for t in taps], axis=1).astype(dtype)
                tables.append((k, br.name, side, coeffs, taps))
    return tables


def _il_penalty(tape, spec, tables, pnodes) -> Node | None:
    terms = []
    for layer in range(1, spec.layers + 1):
        for k, branch, _side, coeffs, taps in tables:
            weights = [pnodes[_key(layer, k, branch, t)] for t in taps]
            terms.append(tape.il_norm(weights, coeffs))
    if not terms:
        return None
    return terms[0] if len(terms) == 1 else tape.add(*terms)


def measure_il_constants(
    spec: ModelSpec, params: dict[str, np.ndarray], sc: SimplicialComplex
) -> dict[str, float]:
    """Mean integral-Lipschitz constants of the trained filter banks.

    For every layer, shifted branch, and feature pair the constant is
    max over the sampled spectrum of |sum_t t w_t lambda^t|; the lower- and
    upper-shift families are averaged separately into C_d and C_u.
    """
    opsets = _build_ops(spec, sc, np.float64)
    tables = _il_tables(spec, opsets, np.float64)
    sums = {"down": 0.0, "up": 0.0}
    counts = {"down": 0, "up": 0}
    for layer in range(1, spec.layers + 1):
        for k, branch, side, coeffs, taps in tables:
            stack = np.stack([params[_key(layer, k, branch, t)] for t in taps])
            response = np.tensordot(coeffs, stack, axes=(1, 0))
            per_pair = np.abs(response).max(axis=0)
            sums[side] += float(per_pair.sum())
            counts[side] += per_pair.size
    return {
        "c_down": sums["down"] / counts["down"] if counts["down"] else 0.0,
        "c_up": sums["up"] / counts["up"] if counts["up"] else 0.0,
    }


# ---------------------------------------------------------------------------
# training


def train(
    spec: ModelSpec,
    sc: SimplicialComplex,
    dataset,
    opts: TrainOptions = TrainOptions(),
):
    """Adam training with early stopping on validation loss.

    Dispatches on the dataset shape: a TrajectorySplits view uses softmax
    cross-entropy over candidate next nodes; any object carrying
    inputs/candidates/labels/splits (a simplex dataset) uses binary
    cross-entropy on closure logits.  Minibatches are reshuffled every
    epoch, deterministically from the model seed.  Returns (params,
    history) where history has one row per epoch with train/validation
    losses and the validation metric (accuracy or AUC).  A non-finite
    loss raises NumericalError.
    """
    if isinstance(dataset, TrajectorySplits):
        return _train_trajectory(spec, sc, dataset, opts)
    if all(hasattr(dataset, a) for a in ("inputs", "candidates", "labels", "splits")):
        return _train_simplex(spec, sc, dataset, opts)
    if hasattr(dataset, "training_view"):
        raise ValidationError("pass dataset.training_view(), not the raw corpus")
    raise ValidationError(f"unsupported dataset type {type(dataset).__name__}")


def _loop(params, opts, epoch_fn, evaluate):
    """Shared epoch loop: epoch_fn trains one epoch, evaluate returns (loss, metric)."""
    state: dict = {}
    history: list[dict] = []
    best_loss = np.inf
    best_epoch = 0
    best_params = {k: v.copy() for k, v in params.items()}
    for epoch in range(1, opts.epochs + 1):
        train_loss = epoch_fn(params, state, epoch)
        if not np.isfinite(train_loss):
            raise NumericalError(f"training loss diverged at epoch {epoch}: {train_loss}")
        val_loss, val_metric = evaluate(params)
        history.append(
            {
                "epoch": epoch,
                "train_loss": float(train_loss),
                "val_loss": float(val_loss),
                "val_metric": float(val_metric),
            }
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        elif epoch - best_epoch >= opts.patience:
            break
    for k in params:
        params[k][...] = best_params[k]
    return params, history


def _batches(n: int, size: int) -> list[np.ndarray]:
    if size <= 0 or size >= n:
        return [np.arange(n)]
    return [np.arange(i, min(i + size, n)) for i in range(0, n, size)]


def _train_trajectory(spec, sc, dataset, opts):
    if spec.readout != "trajectory":
        raise ValidationError("trajectory training needs readout='trajectory'")
    if not dataset.train or not dataset.val:
        raise ValidationError("trajectory dataset needs nonempty train and val splits")
    dtype = np.dtype(opts.dtype)
    opsets = _build_ops(spec, sc, dtype)
    b1 = LinOp(incidence(sc, 1), dtype=dtype)
    n0, n1 = sc.num(0), sc.num(1)
    params = {k: v.astype(dtype) for k, v in init_params(spec).items()}
    il_tables = _il_tables(spec, opsets, dtype) if opts.il_weight else []

    def stack_inputs(samples):
        flows = np.stack([s.flow for s in samples], axis=1)[:, :, None].astype(dtype)
        stacks = {1: np.ascontiguousarray(flows)}
        for k in spec.orders:
            if k != 1:
                stacks[k] = np.zeros((opsets[k].n, len(samples), 1), dtype=dtype)
        return stacks

    def batch_logits(tape, pnodes, samples, stacks):
        states = _input_states(tape, spec, opsets, stacks)
        out = _forward_stack(tape, spec, opsets, pnodes, states, len(samples))
        x1 = out[1]
        if x1 is None:
            raise NumericalError("edge features vanished in the forward pass")
        flat = tape.reshape(x1, (n1 * len(samples), spec.features[-1]))
        proj = tape.matmul(flat, pnodes["readout.proj.w"])  # (n1*B, 1)
        per_edge = tape.reshape(proj, (n1, len(samples)))
        nodes = tape.reshape(tape.sparse_matmul(b1, per_edge), (n0 * len(samples), 1))
        return nodes

    def sample_loss_nodes(tape, nodes_flat, samples):
        losses = []
        n_b = len(samples)
        for b, s in enumerate(samples):
            idx = np.array([c * n_b + b for c in s.candidates])
            logits = tape.reshape(tape.gather_rows(nodes_flat, idx), (len(s.candidates),))
            losses.append(tape.softmax_ce_loss(logits, s.target))
        total = losses[0] if len(losses) == 1 else tape.add(*losses)
        return tape.scale(total, 1.0 / n_b)

    train_samples = list(dataset.train)
    n_train = len(train_samples)
    all_flows = np.ascontiguousarray(
        np.stack([s.flow for s in train_samples], axis=1)[:, :, None].astype(dtype)
    )
    zero_cache: dict[int, dict[int, np.ndarray]] = {}

    def train_stacks(ids):
        stacks = {1: np.ascontiguousarray(all_flows[:, ids, :])}
        b = len(ids)
        if b not in zero_cache:
            zero_cache[b] = {
                k: np.zeros((opsets[k].n, b, 1), dtype=dtype)
                for k in spec.orders
                if k != 1
            }
        stacks.update(zero_cache[b])
        return stacks

    batch_ids = _batches(n_train, opts.batch)
    val_stacks = stack_inputs(dataset.val)
    shuffle = np.random.default_rng((spec.seed, 1))

    def epoch_fn(params, state, epoch):
        total = 0.0
        perm = shuffle.permutation(n_train)
        for ids in batch_ids:
            chunk = perm[ids]
            samples = [train_samples[int(i)] for i in chunk]
            stacks = train_stacks(chunk)
            tape = Tape()
            pnodes = {k: tape.parameter(v) for k, v in params.items()}
            loss = sample_loss_nodes(tape, batch_logits(tape, pnodes, samples, stacks), samples)
            if il_tables:
                penalty = _il_penalty(tape, spec, il_tables, pnodes)
                if penalty is not None:
                    loss = tape.add(loss, tape.scale(penalty, opts.il_weight))
            total += float(loss.value)
            grads = tape.backward(loss)
            grad_arrays = {k: grads.get(pnodes[k], np.zeros_like(v)) for k, v in params.items()}
            state.update(
                adam_step(
                    params,
                    grad_arrays,
                    state,
                    lr=opts.lr,
                    betas=opts.betas,
                    eps=opts.eps,
                    weight_decay=opts.weight_decay,
                )
            )
        return total / len(batch_ids)

    def evaluate(params):
        loss, acc = _eval_trajectory(spec, params, opsets, b1, dataset.val, val_stacks)
        return loss, acc

    params, history = _loop(params, opts, epoch_fn, evaluate)
    return params, history


def _eval_trajectory(spec, params, opsets, b1, samples, stacks):
    """(mean cross-entropy, accuracy) without building gradients."""
    tape = Tape()
    pnodes = {k: tape.parameter(v) for k, v in params.items()}
    states = _input_states(tape, spec, opsets, stacks)
    out = _forward_stack(tape, spec, opsets, pnodes, states, len(samples))
    n1 = opsets[1].n
    x1 = out[1].value.reshape(n1 * len(samples), spec.features[-1])
    proj = (x1 @ params["readout.proj.w"]).reshape(n1, len(samples))
    node_vals = b1.dot(proj)  # (n0, B)
    total = 0.0
    hits = 0
    for b, s in enumerate(samples):
        logits = node_vals[np.asarray(s.candidates, dtype=int), b]
        m = logits.max()
        lse = m + np.log(np.exp(logits - m).sum())
        total += float(lse - logits[s.target])
        hits += int(np.argmax(logits) == s.target)
    return total / len(samples), hits / len(samples)


def trajectory_accuracy(
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    samples: Sequence[TrajectorySample],
    dtype: str = "float64",
) -> float:
    """Fraction of samples whose argmax candidate is the true next node."""
    if not samples:
        raise ValidationError("no samples to evaluate")
    dt = np.dtype(dtype)
    opsets = _build_ops(spec, sc, dt)
    b1 = LinOp(incidence(sc, 1), dtype=dt)
    flows = np.stack([s.flow for s in samples], axis=1)[:, :, None].astype(dt)
    stacks = {1: np.ascontiguousarray(flows)}
    for k in spec.orders:
        if k != 1:
            stacks[k] = np.zeros((opsets[k].n, len(samples), 1), dtype=dt)
    cast = {k: v.astype(dt) for k, v in params.items()}
    _, acc = _eval_trajectory(spec, cast, opsets, b1, samples, stacks)
    return acc


def _train_simplex(spec, sc, dataset, opts):
    if spec.readout not in ("simplex_nodes", "simplex_edges"):
        raise ValidationError("simplex training needs a simplex readout")
    for split in ("train", "val"):
        if split not in dataset.splits or len(dataset.splits[split]) == 0:
            raise ValidationError(f"simplex dataset needs a nonempty {split!r} split")
    dtype = np.dtype(opts.dtype)
    opsets = _build_ops(spec, sc, dtype)
    params = {k: v.astype(dtype) for k, v in init_params(spec).items()}
    il_tables = _il_tables(spec, opsets, dtype) if opts.il_weight else []
    source = spec.readout_source
    const_idx = np.array(
        [_constituent_indices(sc, cand, source) for cand in dataset.candidates]
    )
    labels = np.asarray(dataset.labels, dtype=dtype)
    stacks = {}
    for k in spec.orders:
        if k not in dataset.inputs:
            raise ValidationError(f"simplex dataset lacks an order-{k} input")
        x = dataset.inputs[k].values
        if x.ndim == 1:
            x = x[:, None]
        stacks[k] = np.ascontiguousarray(x[:, None, :], dtype=dtype)

    def candidate_logits(tape, pnodes, rows):
        states = _input_states(tape, spec, opsets, stacks)
        out = _forward_stack(tape, spec, opsets, pnodes, states, 1)
        feats = out[source]
        if feats is None:
            feats = tape.constant(np.zeros((opsets[source].n, 1, spec.features[-1]), dtype=dtype))
        flat = tape.reshape(feats, (opsets[source].n, spec.features[-1]))
        gathered = tape.gather_rows(flat, const_idx[rows])  # (M, C, F)
        width = const_idx.shape[1] * spec.features[-1]
        vec = tape.reshape(gathered, (len(rows), width))
        hidden = tape.elementwise(
            tape.add(tape.matmul(vec, pnodes["readout.hidden.w"]), pnodes["readout.hidden.b"]),
            "sigmoid",
        )
        logits = tape.add(tape.matmul(hidden, pnodes["readout.out.w"]), pnodes["readout.out.b"])
        return tape.reshape(logits, (len(rows),))

    train_rows = np.asarray(dataset.splits["train"], dtype=int)
    val_rows = np.asarray(dataset.splits["val"], dtype=int)
    batch_ids = _batches(len(train_rows), opts.batch)
    shuffle = np.random.default_rng((spec.seed, 1))

    def epoch_fn(params, state, epoch):
        total = 0.0
        perm = shuffle.permutation(len(train_rows))
        for ids in batch_ids:
            rows = train_rows[perm[ids]]
            tape = Tape()
            pnodes = {k: tape.parameter(v) for k, v in params.items()}
            loss = tape.bce_loss(candidate_logits(tape, pnodes, rows), labels[rows])
            if il_tables:
                penalty = _il_penalty(tape, spec, il_tables, pnodes)
                if penalty is not None:
                    loss = tape.add(loss, tape.scale(penalty, opts.il_weight))
            total += float(loss.value)
            grads = tape.backward(loss)
            grad_arrays = {k: grads.get(pnodes[k], np.zeros_like(v)) for k, v in params.items()}
            state.update(
                adam_step(
                    params,
                    grad_arrays,
                    state,
                    lr=opts.lr,
                    betas=opts.betas,
                    eps=opts.eps,
                    weight_decay=opts.weight_decay,
                )
            )
        return total / len(batch_ids)

    def evaluate(params):
        tape = Tape()
        pnodes = {k: tape.parameter(v) for k, v in params.items()}
        logits = candidate_logits(tape, pnodes, val_rows)
        loss = float(tape.bce_loss(logits, labels[val_rows]).value)
        metric = auc_score(labels[val_rows], logits.value)
        return loss, metric

    params, history = _loop(params, opts, epoch_fn, evaluate)
    return params, history


def simplex_scores(
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    sc: SimplicialComplex,
    dataset,
    rows: np.ndarray | None = None,
) -> np.ndarray:
    """Closure probabilities for candidate rows (default: all candidates)."""
    for k in spec.orders:
        if k not in dataset.inputs:
            raise ValidationError(f"simplex dataset lacks an order-{k} input")
    outputs = forward(spec, params, sc, {k: dataset.inputs[k] for k in spec.orders})
    feats = outputs[spec.readout_source].values
    rows = np.arange(len(dataset.candidates)) if rows is None else np.asarray(rows, dtype=int)
    cast = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    return np.array(
        [
            readout_simplex(cast, sc, feats, dataset.candidates[r], spec.readout_source)
            for r in rows
        ]
    )


def auc_score(labels: np.ndarray, scores: np.ndarray) -> float:
    """Area under the ROC curve via the rank statistic, ties counted half."""
    import scipy.stats

    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise ValidationError("labels and scores must align")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC needs both classes present")
    ranks = scipy.stats.rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# checkpoints


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr)
    return {
        "dtype": arr.dtype.str,
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode_array(blob: dict) -> np.ndarray:
    data = base64.b64decode(blob["data"])
    return np.frombuffer(data, dtype=np.dtype(blob["dtype"])).reshape(blob["shape"]).copy()


def save_checkpoint(
    path,
    spec: ModelSpec,
    params: dict[str, np.ndarray],
    adam_state: dict | None = None,
    rng_state: dict | None = None,
) -> None:
    """Bit-exact JSON checkpoint: spec, parameters, optimizer moments, rng."""
    payload = {
        "spec": dataclasses.asdict(spec),
        "params": {k: _encode_array(v) for k, v in sorted(params.items())},
        "adam": None,
        "rng_state": rng_state,
    }
    if adam_state:
        payload["adam"] = {
            "step": adam_state["step"],
            "m": {k: _encode_array(v) for k, v in sorted(adam_state["m"].items())},
            "v": {k: _encode_array(v) for k, v in sorted(adam_state["v"].items())},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Inverse of save_checkpoint: (spec, params, adam_state, rng_state)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    raw = dict(payload["spec"])
    raw["features"] = tuple(raw["features"])
    if raw.get("betas"):
        raw["betas"] = tuple(raw["betas"])
    spec = ModelSpec(**raw)
    params = {k: _decode_array(v) for k, v in payload["params"].items()}
    adam_state = None
    if payload.get("adam"):
        adam_state = {
            "step": payload["adam"]["step"],
            "m": {k: _decode_array(v) for k, v in payload["adam"]["m"].items()},
            "v": {k: _decode_array(v) for k, v in payload["adam"]["v"].items()},
        }
    return spec, params, adam_state, payload.get("rng_state")
