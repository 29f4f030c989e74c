"""Reverse-mode automatic differentiation on a flat tape.

The model forward passes here are compositions of a small, fixed op set:
products with constant sparse operators, dense weight products, sums,
elementwise nonlinearities, gather/concat/reshape plumbing, two logit
losses, and the integral-Lipschitz penalty.  A purpose-built tape over
numpy arrays keeps that set auditable and avoids a heavyweight framework
dependency.

Values are stored eagerly at node creation; ``Tape.backward`` replays the
recorded graph in reverse.  Gradients are accumulated in the dtype of the
forward values, so a float32 training run stays float32 end to end.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ValidationError
from .kernels import LinOp

__all__ = ["Node", "Tape", "adam_step", "ELEMENTWISE_KINDS", "LEAKY_SLOPE"]

LEAKY_SLOPE = 0.01

ELEMENTWISE_KINDS = ("identity", "tanh", "sigmoid", "leaky_relu")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Node:
    """One tape entry: an array value plus the recipe that produced it."""

    __slots__ = ("value", "kind", "inputs", "aux", "needs_grad", "_index")

    def __init__(
        self,
        value: np.ndarray,
        kind: str,
        inputs: tuple["Node", ...],
        aux,
        needs_grad: bool,
        index: int,
    ):
        self.value = value
        self.kind = kind
        self.inputs = inputs
        self.aux = aux
        self.needs_grad = needs_grad
        self._index = index

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


class Tape:
    """Records a forward pass and differentiates it in reverse.

    A tape is built fresh for every training step; parameters are wrapped
    with :meth:`parameter` (no copy) and their gradients come back from
    :meth:`backward` keyed by node.
    """

    def __init__(self):
        self._nodes: list[Node] = []

    def _record(self, value, kind, inputs=(), aux=None, needs_grad=None) -> Node:
        value = np.asarray(value)
        if needs_grad is None:
            needs_grad = any(p.needs_grad for p in inputs)
        node = Node(value, kind, tuple(inputs), aux, needs_grad, len(self._nodes))
        self._nodes.append(node)
        return node

    # -- leaves ---------------------------------------------------------

    def constant(self, value) -> Node:
        return self._record(value, "constant", needs_grad=False)

    def parameter(self, value: np.ndarray) -> Node:
        return self._record(value, "parameter", needs_grad=True)

    # -- linear algebra -------------------------------------------------

    def sparse_matmul(self, op: LinOp, x: Node) -> Node:
        """y = A x for a constant sparse operator A (gradient uses A^T)."""
        return self._record(op.dot(x.value), "sparse_const_matmul", (x,), aux=op)

    def matmul(self, x: Node, w: Node) -> Node:
        return self._record(x.value @ w.value, "dense_matmul", (x, w))

    def tap_matmul(self, bases: list[Node], weights: list[Node]) -> Node:
        """y = sum_t bases[t] @ weights[t], accumulated without concatenation.

        The filter banks sum many tap products with a shared output shape;
        fusing them avoids materialising the wide [bases] block that an
        equivalent concat + single matmul would copy on every step.
        """
        if not bases or len(bases) != len(weights):
            raise ValidationError(
                f"tap_matmul needs matching tap lists, got {len(bases)} bases "
                f"and {len(weights)} weights"
            )
        out = bases[0].value @ weights[0].value
        if len(bases) > 1:
            scratch = np.empty_like(out)
            for b, w in zip(bases[1:], weights[1:]):
                np.matmul(b.value, w.value, out=scratch)
                out += scratch
        return self._record(
            out, "tap_matmul", tuple(bases) + tuple(weights), aux=len(bases)
        )

    def add(self, *terms: Node) -> Node:
        if len(terms) < 2:
            raise ValidationError("add needs at least two terms")
        total = terms[0].value
        for t in terms[1:]:
            total = total + t.value
        return self._record(total, "add", terms)

    def scale(self, x: Node, alpha: float) -> Node:
        return self._record(x.value * alpha, "scale", (x,), aux=float(alpha))

    # -- shape plumbing --------------------------------------------------

    def concat_rows(self, parts: list[Node]) -> Node:
        value = np.concatenate([p.value for p in parts], axis=0)
        return self._record(value, "concat_rows", tuple(parts))

    def concat_cols(self, parts: list[Node]) -> Node:
        value = np.concatenate([p.value for p in parts], axis=-1)
        return self._record(value, "concat_cols", tuple(parts))

    def gather_rows(self, x: Node, idx: np.ndarray) -> Node:
        idx = np.asarray(idx, dtype=np.intp)
        return self._record(x.value[idx], "gather_rows", (x,), aux=idx)

    def reshape(self, x: Node, shape: tuple[int, ...]) -> Node:
        return self._record(x.value.reshape(shape), "reshape", (x,))

    # -- nonlinearities ---------------------------------------------------

    def elementwise(self, x: Node, kind: str) -> Node:
        if kind == "identity":
            return x
        if kind == "tanh":
            value = np.tanh(x.value)
        elif kind == "sigmoid":
            value = _sigmoid(x.value)
        elif kind == "leaky_relu":
            value = np.maximum(x.value, LEAKY_SLOPE * x.value)
        else:
            raise ValidationError(f"unknown elementwise kind {kind!r}")
        return self._record(value, "elementwise", (x,), aux=kind)

    # -- reductions -------------------------------------------------------

    def bce_loss(self, logits: Node, targets: np.ndarray) -> Node:
        """Mean binary cross-entropy on logits (numerically stable form)."""
        z = logits.value
        y = np.asarray(targets, dtype=z.dtype)
        if y.shape != z.shape:
            raise ValidationError(f"target shape {y.shape} != logit shape {z.shape}")
        loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
        return self._record(
            np.asarray(loss.mean(), dtype=z.dtype),
            "reduce_loss",
            (logits,),
            aux=("bce", y),
        )

    def softmax_ce_loss(self, logits: Node, target: int) -> Node:
        """Cross-entropy of a single softmax over a vector of logits."""
        z = logits.value.reshape(-1)
        if not 0 <= target < z.size:
            raise ValidationError(f"target {target} out of range for {z.size} logits")
        m = z.max()
        lse = m + np.log(np.exp(z - m).sum())
        return self._record(
            np.asarray(lse - z[target], dtype=z.dtype),
            "reduce_loss",
            (logits,),
            aux=("softmax_ce", int(target)),
        )

    def il_norm(self, weights: list[Node], coeffs: np.ndarray) -> Node:
        """Integral-Lipschitz penalty sqrt(sum_j ||sum_t c[j,t] W_t||_F^2).

        `coeffs` has one row per sampled frequency and one column per tap
        weight in `weights` (the t * lambda^t factors).  Scalar taps and
        matrix taps are both accepted; the Frobenius norm aggregates the
        feature dimensions.
        """
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[1] != len(weights):
            raise ValidationError(
                f"coefficient table {coeffs.shape} does not match {len(weights)} taps"
            )
        stack = np.stack([np.atleast_2d(w.value) for w in weights])
        responses = np.tensordot(coeffs, stack, axes=(1, 0))
        total = float((responses**2).sum())
        value = np.asarray(np.sqrt(total), dtype=stack.dtype)
        return self._record(
            value, "il_norm", tuple(weights), aux=(coeffs, responses, total)
        )

    # -- reverse pass -----------------------------------------------------

    def backward(self, loss: Node) -> dict[Node, np.ndarray]:
        """Accumulate d loss / d parameter for every parameter node.

        `loss` must be a scalar node on this tape.  Returns a mapping from
        parameter nodes to gradient arrays of matching shape.
        """
        if loss.value.ndim != 0:
            raise ValidationError("backward target must be a scalar node")
        grads = _GradStore()
        grads.store[loss._index] = np.asarray(1.0, dtype=loss.value.dtype)
        out: dict[Node, np.ndarray] = {}
        for node in reversed(self._nodes[: loss._index + 1]):
            g = grads.store.pop(node._index, None)
            if g is None or not node.needs_grad:
                continue
            if node.kind == "parameter":
                out[node] = g
                continue
            _BACKWARD[node.kind](node, g, grads)
        return out


class _GradStore:
    """Gradient accumulator that adds in place once it owns an array.

    The first contribution for a node is stored by reference (it may be a
    view into an upstream gradient, e.g. from a reshape); the second add
    allocates a fresh owned array, and later ones update it in place.
    """

    __slots__ = ("store", "owned")

    def __init__(self):
        self.store: dict[int, np.ndarray] = {}
        self.owned: set[int] = set()


def _accumulate(grads: _GradStore, node: Node, g: np.ndarray) -> None:
    if not node.needs_grad:
        return
    idx = node._index
    held = grads.store.get(idx)
    if held is None:
        grads.store[idx] = g
    elif idx in grads.owned and held.shape == np.shape(g):
        held += g
    else:
        grads.store[idx] = held + g
        grads.owned.add(idx)


def _back_sparse(node, g, grads):
    x = node.inputs[0]
    if x.needs_grad:
        _accumulate(grads, x, node.aux.tdot(g))


def _back_matmul(node, g, grads):
    x, w = node.inputs
    if x.needs_grad:
        _accumulate(grads, x, g @ w.value.T)
    if w.needs_grad:
        _accumulate(grads, w, x.value.T @ g)


def _back_tap_matmul(node, g, grads):
    n = node.aux
    for b, w in zip(node.inputs[:n], node.inputs[n:]):
        if b.needs_grad:
            _accumulate(grads, b, g @ w.value.T)
        if w.needs_grad:
            _accumulate(grads, w, b.value.T @ g)


def _back_add(node, g, grads):
    for term in node.inputs:
        _accumulate(grads, term, _unbroadcast(g, term.shape))


def _back_scale(node, g, grads):
    _accumulate(grads, node.inputs[0], g * node.aux)


def _back_concat_rows(node, g, grads):
    offset = 0
    for part in node.inputs:
        n = part.shape[0]
        _accumulate(grads, part, g[offset : offset + n])
        offset += n


def _back_concat_cols(node, g, grads):
    offset = 0
    for part in node.inputs:
        n = part.shape[-1]
        _accumulate(grads, part, g[..., offset : offset + n])
        offset += n


def _back_gather(node, g, grads):
    x = node.inputs[0]
    gx = np.zeros_like(x.value)
    np.add.at(gx, node.aux, g)
    _accumulate(grads, x, gx)


def _back_reshape(node, g, grads):
    x = node.inputs[0]
    _accumulate(grads, x, g.reshape(x.shape))


def _back_elementwise(node, g, grads):
    x = node.inputs[0]
    kind = node.aux
    if kind == "tanh":
        local = 1.0 - node.value**2
    elif kind == "sigmoid":
        local = node.value * (1.0 - node.value)
    else:  # leaky_relu
        local = np.where(x.value > 0, 1.0, LEAKY_SLOPE).astype(node.value.dtype)
    _accumulate(grads, x, g * local)


def _back_loss(node, g, grads):
    logits = node.inputs[0]
    kind, target = node.aux
    z = logits.value
    if kind == "bce":
        gz = (_sigmoid(z) - target) / z.size
    else:  # softmax_ce
        flat = z.reshape(-1)
        m = flat.max()
        p = np.exp(flat - m)
        gz = (p / p.sum()).reshape(z.shape)
        gz.reshape(-1)[target] -= 1.0
    _accumulate(grads, logits, g * gz)


def _back_il_norm(node, g, grads):
    coeffs, responses, total = node.aux
    if total <= 0.0:
        return
    scale = float(g) / float(node.value)
    full = np.tensordot(coeffs, responses, axes=(0, 0))
    for t, w in enumerate(node.inputs):
        _accumulate(grads, w, (scale * full[t]).reshape(w.shape))


_BACKWARD: dict[str, Callable] = {
    "sparse_const_matmul": _back_sparse,
    "dense_matmul": _back_matmul,
    "tap_matmul": _back_tap_matmul,
    "add": _back_add,
    "scale": _back_scale,
    "concat_rows": _back_concat_rows,
    "concat_cols": _back_concat_cols,
    "gather_rows": _back_gather,
    "reshape": _back_reshape,
    "elementwise": _back_elementwise,
    "reduce_loss": _back_loss,
    "il_norm": _back_il_norm,
}


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict,
    lr: float = 0.001,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> dict:
    """One Adam update, in place on the arrays in `params`.

    Decoupled it is not: weight decay is added to the gradient before the
    moment updates, matching the classic formulation.  `state` is created
    on first call; pass the returned dict back on subsequent steps.
    """
    if lr <= 0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    if not state:
        state = {
            "step": 0,
            "m": {k: np.zeros_like(v) for k, v in params.items()},
            "v": {k: np.zeros_like(v) for k, v in params.items()},
        }
    state["step"] += 1
    t = state["step"]
    b1, b2 = betas
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        if weight_decay:
            g = g + weight_decay * p
        m = state["m"][name]
        v = state["v"][name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
    return state
