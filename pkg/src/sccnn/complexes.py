"""Simplicial complexes, incidence structure, and Hodge Laplacians.

A k-simplex is a set of k+1 vertices; a simplicial complex stores, per order
k, a sequence of simplices closed under taking faces.  Each stored simplex
carries a reference orientation given by the order of its vertex tuple; a
freshly built complex uses the lexicographic (ascending) orientation, while
`reorient_complex` and `permute_complex` produce complexes whose stored order
encodes the transformed orientation and indexing.

Conventions
-----------
- The incidence matrix B_k maps k-simplices to (k-1)-simplices with the signed
  boundary: for an edge e = [i, j], column e of B_1 has -1 at i and +1 at j;
  for a triangle [i, j, k], column entries are +1, -1, +1 on [i, j], [i, k],
  [j, k].  B_k @ B_{k+1} = 0 always.
- The Hodge Laplacian of order k is L_k = B_kᵀ B_k + B_{k+1} B_{k+1}ᵀ, with
  the lower (face-mediated) and upper (coface-mediated) parts kept separate.
- Normalized operators follow the random-walk weighting: each order-k simplex
  receives a weight matrix M_{k,j} for use in order-j operators, with the
  max(., I) clamp protecting against isolated simplices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

__all__ = [
    "Cochain",
    "SimplicialComplex",
    "Operators",
    "Neighborhood",
    "build_complex",
    "incidence",
    "hodge_laplacians",
    "normalized_operators",
    "neighborhoods",
    "permute_complex",
    "reorient_complex",
    "divergence",
    "gradient",
    "curl",
    "read_complex_text",
    "write_complex_text",
    "read_cochain_csv",
    "write_cochain_csv",
]

SCHEMES = ("raw", "random_walk", "random_walk_symmetric")


@dataclass(frozen=True)
class Cochain:
    """A real-valued signal indexed by the k-simplices of a complex.

    Values may be a vector of shape (N_k,) or a feature matrix (N_k, F).
    """

    k: int
    values: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


@dataclass(frozen=True)
class SimplicialComplex:
    """An immutable simplicial complex with oriented, indexed simplices.

    Parameters
    ----------
    simplices:
        Per order k, a tuple of vertex tuples.  Vertices are dense 0-based
        integers; the order of each tuple is the simplex's stored reference
        orientation.
    node_labels:
        Original vertex labels, indexed by dense vertex id.
    vertex_positions:
        Optional (N_0, 2) coordinates attached by generators; carried as
        metadata and ignored by equality.
    """

    simplices: tuple[tuple[tuple[int, ...], ...], ...]
    node_labels: tuple[int, ...]
    vertex_positions: np.ndarray | None = field(default=None, compare=False)
    _index: tuple[dict[frozenset, int], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        index: list[dict[frozenset, int]] = []
        for k, level in enumerate(self.simplices):
            lookup: dict[frozenset, int] = {}
            for i, simplex in enumerate(level):
                if len(simplex) != k + 1 or len(set(simplex)) != k + 1:
                    raise ValidationError(
                        f"order-{k} simplex {simplex!r} must have {k + 1} distinct vertices"
                    )
                key = frozenset(simplex)
                if key in lookup:
                    raise ValidationError(f"duplicate simplex {simplex!r}")
                lookup[key] = i
            index.append(lookup)
        object.__setattr__(self, "_index", tuple(index))
        for k in range(1, self.dim + 1):
            for simplex in self.simplices[k]:
                for face in itertools.combinations(sorted(simplex), k):
                    if frozenset(face) not in self._index[k - 1]:
                        raise ValidationError(
                            f"face {face!r} of {simplex!r} missing: not a valid complex"
                        )

    @property
    def dim(self) -> int:
        """Largest order K with at least one simplex."""
        return len(self.simplices) - 1

    def num(self, k: int) -> int:
        """Number of k-simplices (0 when k is out of range)."""
        if k < 0 or k > self.dim:
            return 0
        return len(self.simplices[k])

    def index_of(self, simplex: Iterable[int]) -> int:
        """Dense index of a simplex given by any ordering of its vertices."""
        vertices = tuple(simplex)
        k = len(vertices) - 1
        if k < 0 or k > self.dim:
            raise ValidationError(f"no order-{k} simplices in this complex")
        try:
            return self._index[k][frozenset(vertices)]
        except KeyError:
            raise ValidationError(f"simplex {vertices!r} not in complex") from None


def _parity(sequence: Sequence[int], reference: Sequence[int]) -> int:
    """Sign of the permutation mapping `sequence` onto `reference`."""
    pos = {v: i for i, v in enumerate(reference)}
    perm = [pos[v] for v in sequence]
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def build_complex(
    simplices: Iterable[Iterable[int]],
    vertex_positions: np.ndarray | None = None,
) -> SimplicialComplex:
    """Build a complex from any collection of simplices.

    All faces are added automatically; vertices are reindexed to dense
    0-based ids (ascending by original label) and the lexicographic reference
    orientation is applied throughout.

    Parameters
    ----------
    simplices:
        Iterable of vertex collections (any order, any hashable integers).
    vertex_positions:
        Optional coordinates, indexed by *original label rank* (i.e. the same
        order as the resulting dense ids).

    Raises
    ------
    ValidationError
        On an empty collection or a simplex with repeated vertices.
    """
    seed_sets: list[tuple[int, ...]] = []
    for simplex in simplices:
        vertices = tuple(int(v) for v in simplex)
        if len(vertices) == 0:
            raise ValidationError("empty simplex")
        if len(set(vertices)) != len(vertices):
            raise ValidationError(f"repeated vertex in simplex {vertices!r}")
        seed_sets.append(vertices)
    if not seed_sets:
        raise ValidationError("cannot build a complex from no simplices")

    labels = sorted({v for s in seed_sets for v in s})
    dense = {v: i for i, v in enumerate(labels)}
    levels: list[set[tuple[int, ...]]] = []
    for vertices in seed_sets:
        k = len(vertices) - 1
        while len(levels) <= k:
            levels.append(set())
        mapped = sorted(dense[v] for v in vertices)
        for order in range(k + 1):
            for face in itertools.combinations(mapped, order + 1):
                levels[order].add(face)

    stored = tuple(tuple(sorted(level)) for level in levels)
    return SimplicialComplex(
        simplices=stored,
        node_labels=tuple(labels),
        vertex_positions=None if vertex_positions is None else np.asarray(vertex_positions, dtype=np.float64),
    )


def incidence(sc: SimplicialComplex, k: int) -> sp.csr_matrix:
    """Signed incidence matrix B_k of shape (N_{k-1}, N_k).

    Signs follow the boundary of the stored orientation: the face omitting
    the p-th stored vertex contributes (-1)^p, corrected by the parity of the
    stored orientation of that face.
    """
    if k < 1 or k > sc.dim:
        raise ValidationError(f"incidence order k={k} outside 1..{sc.dim}")
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    faces = sc.simplices[k - 1]
    lookup = sc._index[k - 1]
    for col, simplex in enumerate(sc.simplices[k]):
        for p in range(len(simplex)):
            face = simplex[:p] + simplex[p + 1 :]
            row = lookup[frozenset(face)]
            sign = (-1) ** p * _parity(face, faces[row])
            rows.append(row)
            cols.append(col)
            vals.append(float(sign))
    mat = sp.csr_matrix(
        (vals, (rows, cols)), shape=(sc.num(k - 1), sc.num(k)), dtype=np.float64
    )
    mat.sort_indices()
    return mat


def _incidence_or_empty(sc: SimplicialComplex, k: int) -> sp.csr_matrix:
    """B_k, or an all-zero matrix when the complex has no k-simplices."""
    if 1 <= k <= sc.dim:
        return incidence(sc, k)
    return sp.csr_matrix((max(sc.num(k - 1), 0), max(sc.num(k), 0)), dtype=np.float64)


def hodge_laplacians(
    sc: SimplicialComplex, k: int
) -> tuple[sp.csr_matrix, sp.csr_matrix | None, sp.csr_matrix | None]:
    """Raw Hodge Laplacian of order k: (L_k, lower part, upper part).

    The lower part B_kᵀB_k is None at k=0 and the upper part B_{k+1}B_{k+1}ᵀ
    is None at k=K; L_k is the sum of whichever parts exist.
    """
    if k < 0 or k > sc.dim:
        raise ValidationError(f"order k={k} outside 0..{sc.dim}")
    lower = None
    upper = None
    if k >= 1:
        b_k = incidence(sc, k)
        lower = sp.csr_matrix(b_k.T @ b_k)
        lower.sort_indices()
    if k < sc.dim:
        b_up = incidence(sc, k + 1)
        upper = sp.csr_matrix(b_up @ b_up.T)
        upper.sort_indices()
    if lower is None and upper is None:
        total = sp.csr_matrix((sc.num(k), sc.num(k)), dtype=np.float64)
    elif lower is None:
        total = upper.copy()
    elif upper is None:
        total = lower.copy()
    else:
        total = sp.csr_matrix(lower + upper)
    total.sort_indices()
    return total, lower, upper


def _weight_diagonals(sc: SimplicialComplex) -> dict[tuple[int, int], np.ndarray]:
    """Diagonals of the weight matrices M_{k,j} for the random-walk scheme.

    M_{k,j} weights order-k simplices for use in order-j operators:

    - M_{k,k} = max(diag(|B_{k+1}| 1), I) for k < K, and I at k = K;
    - M_{k-1,k} = (k+1) diag(|B_k| M_{k,k} 1) for k < K, diag(|B_K| 1) at k = K;
    - M_{k+1,k} = I at k = 0, I/(k+2) for k >= 1.

    Every diagonal that gets inverted (M_{k,k}, M_{k-1,k}) is clamped with
    max(., 1).  Nonzero entries are always >= 1, so the clamp only lifts the
    zeros of isolated simplices, whose rows never enter the surrounding
    incidence products anyway.
    """
    K = sc.dim
    abs_b = {k: abs(_incidence_or_empty(sc, k)) for k in range(1, K + 1)}
    diag: dict[tuple[int, int], np.ndarray] = {}
    for k in range(K + 1):
        if k < K:
            deg = np.asarray(abs_b[k + 1].sum(axis=1)).ravel()
            diag[(k, k)] = np.maximum(deg, 1.0)
        else:
            diag[(k, k)] = np.ones(sc.num(k))
    for k in range(1, K + 1):
        if k < K:
            weighted = (k + 1) * (abs_b[k] @ diag[(k, k)])
        else:
            weighted = np.asarray(abs_b[k].sum(axis=1)).ravel()
        diag[(k - 1, k)] = np.maximum(weighted, 1.0)
    for k in range(K):
        n = sc.num(k + 1)
        diag[(k + 1, k)] = np.ones(n) if k == 0 else np.full(n, 1.0 / (k + 2))
    return diag


@dataclass(frozen=True)
class Operators:
    """Shift and projection operators of one order under one scheme.

    Attributes
    ----------
    k, scheme:
        Order and normalization scheme.
    lap, lap_down, lap_up:
        L_k and its lower/upper parts (parts are None when undefined).
    proj_down:
        R_{k,d} mapping (k-1)-signals into order k (None at k=0).
    proj_up:
        R_{k,u} mapping (k+1)-signals into order k (None at k=K).
    """

    k: int
    scheme: str
    lap: sp.csr_matrix = field(compare=False)
    lap_down: sp.csr_matrix | None = field(compare=False)
    lap_up: sp.csr_matrix | None = field(compare=False)
    proj_down: sp.csr_matrix | None = field(compare=False)
    proj_up: sp.csr_matrix | None = field(compare=False)


def _csr(mat) -> sp.csr_matrix:
    out = sp.csr_matrix(mat)
    out.sort_indices()
    return out


def normalized_operators(
    sc: SimplicialComplex,
    k: int,
    scheme: str = "raw",
    weight_scale: dict[int, np.ndarray] | None = None,
) -> Operators:
    """Shift and projection operators of order k under the given scheme.

    Schemes
    -------
    raw:
        Unweighted operators; projections are B_kᵀ (down) and B_{k+1} (up).
    random_walk:
        Weighted, asymmetric: L_{k,d} = M_{k,k} B_kᵀ M_{k-1,k}⁻¹ B_k and
        L_{k,u} = B_{k+1} M_{k+1,k} B_{k+1}ᵀ M_{k,k}⁻¹.
    random_walk_symmetric:
        The symmetric conjugates M_{k,k}∓¹ᐟ² L M_{k,k}±¹ᐟ².

    Projections under both weighted schemes: R_{k,d} = M_{k,k} B_kᵀ M_{k-1,k}⁻¹,
    R_{k,u} = B_{k+1} M_{k+1,k} for k >= 1 and R_{0,u} = M_{0,1}⁻¹ B_1.

    Parameters
    ----------
    weight_scale:
        Optional per-order multiplicative factors on the simplex weights:
        a map {order j: positive vector of length N_j} applied to every
        M_{j,.} diagonal.  Only valid for weighted schemes.

    Raises
    ------
    ValidationError
        Unknown scheme; weight_scale with scheme="raw"; a weighted scheme on
        a complex with a zero weight (isolated simplex) or non-positive
        scaled weight.
    """
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if k < 0 or k > sc.dim:
        raise ValidationError(f"order k={k} outside 0..{sc.dim}")

    b_k = _incidence_or_empty(sc, k)
    b_up = _incidence_or_empty(sc, k + 1)

    if scheme == "raw":
        if weight_scale is not None:
            raise ValidationError("weight_scale requires a weighted scheme")
        lap, lower, upper = hodge_laplacians(sc, k)
        return Operators(
            k=k,
            scheme=scheme,
            lap=lap,
            lap_down=lower,
            lap_up=upper,
            proj_down=_csr(b_k.T) if k >= 1 else None,
            proj_up=_csr(b_up) if k < sc.dim else None,
        )

    diag = _weight_diagonals(sc)
    if weight_scale is not None:
        diag = dict(diag)
        for order, factors in weight_scale.items():
            factors = np.asarray(factors, dtype=np.float64)
            for key in list(diag):
                if key[0] == order:
                    if factors.shape != diag[key].shape:
                        raise ValidationError(
                            f"weight_scale[{order}] has shape {factors.shape}, "
                            f"expected {diag[key].shape}"
                        )
                    diag[key] = diag[key] * factors
    for key, values in diag.items():
        if values.size and values.min() <= 0:
            raise ValidationError(
                f"non-positive weight in M_{key}: weighted scheme undefined"
            )

    def dia(key: tuple[int, int], power: float = 1.0) -> sp.dia_matrix:
        return sp.diags(diag[key] ** power)

    lower = None
    upper = None
    if k >= 1:
        lower = _csr(dia((k, k)) @ b_k.T @ dia((k - 1, k), -1.0) @ b_k)
    if k < sc.dim:
        upper = _csr(b_up @ dia((k + 1, k)) @ b_up.T @ dia((k, k), -1.0))
    if scheme == "random_walk_symmetric":
        left = dia((k, k), -0.5)
        right = dia((k, k), 0.5)
        if lower is not None:
            lower = _csr(left @ lower @ right)
        if upper is not None:
            upper = _csr(left @ upper @ right)

    proj_down = None
    proj_up = None
    if k >= 1:
        proj_down = _csr(dia((k, k)) @ b_k.T @ dia((k - 1, k), -1.0))
    if k < sc.dim:
        if k == 0:
            proj_up = _csr(dia((0, 1), -1.0) @ b_up)
        else:
            proj_up = _csr(b_up @ dia((k + 1, k)))

    if lower is None and upper is None:
        lap = sp.csr_matrix((sc.num(k), sc.num(k)), dtype=np.float64)
    elif lower is None:
        lap = upper.copy()
    elif upper is None:
        lap = lower.copy()
    else:
        lap = _csr(lower + upper)
    return Operators(
        k=k,
        scheme=scheme,
        lap=lap,
        lap_down=lower,
        lap_up=upper,
        proj_down=proj_down,
        proj_up=proj_up,
    )


@dataclass(frozen=True)
class Neighborhood:
    """Adjacency of one k-simplex: faces, cofaces, and neighbor index lists."""

    faces: tuple[int, ...]
    cofaces: tuple[int, ...]
    lower: tuple[int, ...]
    upper: tuple[int, ...]


def neighborhoods(sc: SimplicialComplex, k: int, i: int) -> Neighborhood:
    """Faces, cofaces, and lower/upper neighbors of the i-th k-simplex.

    Lower neighbors share a face; upper neighbors share a coface.  The
    simplex itself is excluded from both neighbor lists.
    """
    if k < 0 or k > sc.dim:
        raise ValidationError(f"order k={k} outside 0..{sc.dim}")
    if not 0 <= i < sc.num(k):
        raise ValidationError(f"simplex index {i} outside 0..{sc.num(k) - 1}")
    simplex = set(sc.simplices[k][i])

    faces: list[int] = []
    if k >= 1:
        for face in itertools.combinations(sorted(simplex), k):
            faces.append(sc._index[k - 1][frozenset(face)])
    cofaces: list[int] = []
    if k < sc.dim:
        for j, candidate in enumerate(sc.simplices[k + 1]):
            if simplex.issubset(candidate):
                cofaces.append(j)

    lower: set[int] = set()
    for j, other in enumerate(sc.simplices[k]):
        if j != i and len(simplex & set(other)) == k:
            lower.add(j)
    upper: set[int] = set()
    for c in cofaces:
        coface = set(sc.simplices[k + 1][c])
        for j, other in enumerate(sc.simplices[k]):
            if j != i and set(other).issubset(coface):
                upper.add(j)
    return Neighborhood(
        faces=tuple(sorted(faces)),
        cofaces=tuple(sorted(cofaces)),
        lower=tuple(sorted(lower)),
        upper=tuple(sorted(upper)),
    )


def permute_complex(
    sc: SimplicialComplex, perms: Sequence[np.ndarray]
) -> tuple[SimplicialComplex, list[sp.csr_matrix]]:
    """Relabel and reorder the complex by per-order permutations.

    perms[k] is an array p_k with the meaning: new index i holds the simplex
    that was at old index p_k[i].  Returns the permuted complex together with
    the permutation matrices P_k (x_new = P_k @ x_old); incidence matrices
    satisfy B_k(new) = P_{k-1} B_k(old) P_kᵀ exactly.
    """
    if len(perms) != sc.dim + 1:
        raise ValidationError(f"need {sc.dim + 1} permutations, got {len(perms)}")
    mats: list[sp.csr_matrix] = []
    for k, perm in enumerate(perms):
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(sc.num(k))):
            raise ValidationError(f"perms[{k}] is not a permutation of 0..{sc.num(k) - 1}")
        n = sc.num(k)
        mats.append(
            _csr(sp.csr_matrix((np.ones(n), (np.arange(n), perm)), shape=(n, n)))
        )
    vertex_new = np.empty(sc.num(0), dtype=np.int64)
    vertex_new[np.asarray(perms[0], dtype=np.int64)] = np.arange(sc.num(0))

    levels: list[tuple[tuple[int, ...], ...]] = []
    for k in range(sc.dim + 1):
        perm = np.asarray(perms[k], dtype=np.int64)
        level = tuple(
            tuple(int(vertex_new[v]) for v in sc.simplices[k][old]) for old in perm
        )
        levels.append(level)
    labels = tuple(sc.node_labels[old] for old in np.asarray(perms[0], dtype=np.int64))
    positions = None
    if sc.vertex_positions is not None:
        positions = sc.vertex_positions[np.asarray(perms[0], dtype=np.int64)]
    return (
        SimplicialComplex(tuple(levels), labels, positions),
        mats,
    )


def reorient_complex(
    sc: SimplicialComplex, signs: Sequence[np.ndarray]
) -> tuple[SimplicialComplex, list[sp.csr_matrix]]:
    """Flip the reference orientation of selected simplices.

    signs[k] is a ±1 vector; order-0 signs must all be +1 (vertices are
    unoriented).  A flipped simplex has its first two stored vertices
    swapped.  Returns the complex and the diagonal matrices D_k with
    B_k(new) = D_{k-1} B_k(old) D_k exactly.
    """
    if len(signs) != sc.dim + 1:
        raise ValidationError(f"need {sc.dim + 1} sign vectors, got {len(signs)}")
    mats: list[sp.csr_matrix] = []
    levels: list[tuple[tuple[int, ...], ...]] = []
    for k, sign in enumerate(signs):
        sign = np.asarray(sign, dtype=np.float64)
        if sign.shape != (sc.num(k),) or not np.all(np.abs(sign) == 1):
            raise ValidationError(f"signs[{k}] must be ±1 of length {sc.num(k)}")
        if k == 0 and not np.all(sign == 1):
            raise ValidationError("vertices are unoriented: signs[0] must be all +1")
        mats.append(_csr(sp.diags(sign)))
        level = []
        for i, simplex in enumerate(sc.simplices[k]):
            if sign[i] < 0:
                simplex = (simplex[1], simplex[0]) + simplex[2:]
            level.append(simplex)
        levels.append(tuple(level))
    return SimplicialComplex(tuple(levels), sc.node_labels, sc.vertex_positions), mats


def divergence(sc: SimplicialComplex, x1: np.ndarray) -> np.ndarray:
    """Net flow B_1 x_1 at each node of an edge signal."""
    return _incidence_or_empty(sc, 1) @ np.asarray(x1)


def gradient(sc: SimplicialComplex, x0: np.ndarray) -> np.ndarray:
    """Node-difference edge flow B_1ᵀ x_0 of a node signal."""
    return _incidence_or_empty(sc, 1).T @ np.asarray(x0)


def curl(sc: SimplicialComplex, x1: np.ndarray) -> np.ndarray:
    """Circulation B_2ᵀ x_1 of an edge signal around each triangle."""
    if sc.dim < 2:
        raise ValidationError("curl needs a complex with triangles")
    return incidence(sc, 2).T @ np.asarray(x1)


def _maximal_simplices(sc: SimplicialComplex) -> list[tuple[int, ...]]:
    result: list[tuple[int, ...]] = []
    for k in range(sc.dim + 1):
        for simplex in sc.simplices[k]:
            key = set(simplex)
            is_face = False
            if k < sc.dim:
                for upper in sc.simplices[k + 1]:
                    if key.issubset(upper):
                        is_face = True
                        break
            if not is_face:
                result.append(tuple(sorted(simplex)))
    return result


def write_complex_text(sc: SimplicialComplex, path: str) -> None:
    """Write the complex as one maximal simplex per line (original labels)."""
    lines = ["# simplicial complex: one maximal simplex per line"]
    for simplex in _maximal_simplices(sc):
        lines.append(" ".join(str(sc.node_labels[v]) for v in simplex))
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def read_complex_text(path: str) -> SimplicialComplex:
    """Read a complex from the plain-text format of `write_complex_text`."""
    simplices: list[list[int]] = []
    with open(path, "r", encoding="ascii") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                simplices.append([int(token) for token in line.split()])
            except ValueError:
                raise ValidationError(
                    f"{path}:{line_no}: expected whitespace-separated integers"
                ) from None
    return build_complex(simplices)


def write_cochain_csv(sc: SimplicialComplex, cochain: Cochain, path: str) -> None:
    """Write a cochain as CSV with header index,value_0,...,value_{F-1}."""
    values = cochain.values
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != sc.num(cochain.k):
        raise ValidationError(
            f"cochain has {values.shape[0]} rows, complex has {sc.num(cochain.k)} "
            f"order-{cochain.k} simplices"
        )
    header = "index," + ",".join(f"value_{f}" for f in range(values.shape[1]))
    lines = [header]
    for i, row in enumerate(values):
        lines.append(f"{i}," + ",".join("%.17g" % v for v in row))
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def read_cochain_csv(sc: SimplicialComplex, k: int, path: str) -> Cochain:
    """Read a cochain written by `write_cochain_csv`; validates length."""
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines or not lines[0].startswith("index,"):
        raise ValidationError(f"{path}: missing cochain header")
    n_features = len(lines[0].split(",")) - 1
    rows = np.zeros((sc.num(k), n_features))
    seen = np.zeros(sc.num(k), dtype=bool)
    for line in lines[1:]:
        parts = line.split(",")
        idx = int(parts[0])
        if not 0 <= idx < sc.num(k) or len(parts) != n_features + 1:
            raise ValidationError(f"{path}: bad cochain row {line!r}")
        rows[idx] = [float(p) for p in parts[1:]]
        seen[idx] = True
    if not seen.all():
        raise ValidationError(f"{path}: missing rows for some simplices")
    values = rows[:, 0] if n_features == 1 else rows
    return Cochain(k=k, values=values)
