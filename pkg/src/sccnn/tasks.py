"""Dataset generation, splits, heuristics, and metrics for both tasks.

Two experiment families live here.  Trajectory prediction builds a
triangulated unit square with two circular holes, walks shortest paths
between annotated corner regions, and encodes path prefixes as oriented
edge flows.  Simplex prediction thresholds a signal on the top-order
simplices into closure labels and rebuilds the host complex so that only
training positives contribute to the upper incidence structure (negatives
and held-out candidates must be invisible to the operators).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
import scipy.spatial

from .complexes import Cochain, SimplicialComplex, build_complex
from .errors import ValidationError
from .models import TrajectorySample, TrajectorySplits, auc_score

__all__ = [
    "REGIONS",
    "HOLES",
    "TrajectoryDataset",
    "SimplexDataset",
    "gen_synthetic_sc",
    "gen_trajectories",
    "shortest_path",
    "flow_from_path",
    "decode_flow",
    "build_simplex_dataset",
    "gen_planted_citations",
    "heuristic_score",
    "auc",
    "accuracy",
    "write_trajectories_json",
    "read_trajectories_json",
]

# Axis-aligned boxes covering 20% of each side; the trajectory endpoints are
# sampled from these.
REGIONS = {
    "lower_left": ((0.0, 0.2), (0.0, 0.2)),
    "upper_left": ((0.0, 0.2), (0.8, 1.0)),
    "center": ((0.4, 0.6), (0.4, 0.6)),
    "lower_right": ((0.8, 1.0), (0.0, 0.2)),
    "upper_right": ((0.8, 1.0), (0.8, 1.0)),
}

# Two discs removed from the triangulation to create holes.
HOLES = (((0.35, 0.65), 0.15), ((0.65, 0.3), 0.15))

_MID_REGIONS = ("upper_left", "center", "lower_right")


@dataclass(frozen=True)
class TrajectoryDataset:
    """A trajectory corpus: node sequences over a host complex.

    `sequences` are dense node-id tuples; `splits` maps train/val/test to
    index arrays into the sequence list.  `training_view` turns the corpus
    into prefix-flow samples ready for the trainer.
    """

    complex: SimplicialComplex
    sequences: tuple[tuple[int, ...], ...]
    splits: dict[str, np.ndarray]

    def training_view(self, reverse_test: bool = False) -> TrajectorySplits:
        """Prefix-flow samples per split; optionally reverse test sequences."""
        cache = _adjacency(self.complex)

        def view(name):
            samples = []
            for i in self.splits[name]:
                seq = self.sequences[int(i)]
                if reverse_test and name == "test":
                    seq = seq[::-1]
                samples.append(_sequence_sample(self.complex, cache, seq))
            return tuple(samples)

        return TrajectorySplits(train=view("train"), val=view("val"), test=view("test"))


@dataclass(frozen=True)
class SimplexDataset:
    """Closure-prediction data: candidates, labels, splits, host complex.

    The host complex contains every candidate's faces but only the
    training-split positive candidates themselves, so no information about
    held-out labels leaks through the incidence structure.  `inputs` holds
    one cochain per order of the host complex.
    """

    complex: SimplicialComplex
    inputs: dict[int, Cochain]
    candidates: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray]


# ---------------------------------------------------------------------------
# synthetic complex


def _dist_point_segment(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else float(np.clip((c - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab - c))


def _triangle_hits_disc(pts: np.ndarray, center: np.ndarray, radius: float) -> bool:
    # Inside-triangle test via barycentric signs, then edge distances.
    a, b, c = pts
    v0, v1, v2 = b - a, c - a, center - a
    den = v0[0] * v1[1] - v1[0] * v0[1]
    if den != 0:
        u = (v2[0] * v1[1] - v1[0] * v2[1]) / den
        v = (v0[0] * v2[1] - v2[0] * v0[1]) / den
        if u >= 0 and v >= 0 and u + v <= 1:
            return True
    return any(
        _dist_point_segment(center, pts[i], pts[j]) < radius
        for i, j in ((0, 1), (1, 2), (0, 2))
    )


def gen_synthetic_sc(
    n_points: int = 400, holes: int = 2, seed: int = 0
) -> SimplicialComplex:
    """Delaunay complex on uniform points with circular holes cut out.

    Removes every vertex, edge, and triangle intersecting the first
    `holes` discs of HOLES, then fills all remaining triangles.  Vertices
    left without any incident edge are dropped.  Deterministic in `seed`.
    """
    if n_points < 3:
        raise ValidationError("need at least 3 points to triangulate")
    if not 0 <= holes <= len(HOLES):
        raise ValidationError(f"holes must lie in 0..{len(HOLES)}")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(n_points, 2))
    try:
        tri = scipy.spatial.Delaunay(points)
    except scipy.spatial.QhullError as exc:
        raise ValidationError(f"degenerate point set: {exc}") from exc

    discs = [(np.asarray(c), r) for c, r in HOLES[:holes]]

    def vertex_ok(v):
        return all(np.linalg.norm(points[v] - c) >= r for c, r in discs)

    def edge_ok(e):
        return all(
            _dist_point_segment(c, points[e[0]], points[e[1]]) >= r for c, r in discs
        )

    def triangle_ok(t):
        return not any(_triangle_hits_disc(points[list(t)], c, r) for c, r in discs)

    triangles = {tuple(sorted(map(int, s))) for s in tri.simplices}
    edges = {tuple(sorted(p)) for t in triangles for p in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2]))}
    keep_tri = [t for t in triangles if all(vertex_ok(v) for v in t) and triangle_ok(t)]
    covered = {p for t in keep_tri for p in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2]))}
    keep_edge = [
        e for e in edges if e not in covered and all(vertex_ok(v) for v in e) and edge_ok(e)
    ]
    maximal = sorted(keep_tri) + sorted(keep_edge)
    if not maximal:
        raise ValidationError("hole removal left no simplices")
    used = sorted({v for s in maximal for v in s})
    return build_complex(maximal, vertex_positions=points[used])


# ---------------------------------------------------------------------------
# trajectories


def _adjacency(sc: SimplicialComplex) -> dict[int, tuple[int, ...]]:
    adj: dict[int, list[int]] = {v: [] for v in range(sc.num(0))}
    for a, b in sc.simplices[1]:
        adj[a].append(b)
        adj[b].append(a)
    return {v: tuple(sorted(ns)) for v, ns in adj.items()}


def _length_graph(sc: SimplicialComplex) -> scipy.sparse.csr_matrix:
    """Symmetric node graph weighted by Euclidean edge lengths."""
    if sc.vertex_positions is None:
        raise ValidationError("geodesic paths need vertex positions")
    pos = sc.vertex_positions
    rows, cols, weights = [], [], []
    for a, b in sc.simplices[1]:
        d = float(np.linalg.norm(pos[a] - pos[b]))
        rows += [a, b]
        cols += [b, a]
        weights += [d, d]
    return scipy.sparse.csr_matrix(
        (weights, (rows, cols)), shape=(sc.num(0), sc.num(0))
    )


def _walk_predecessors(pred: np.ndarray, start: int, goal: int) -> tuple[int, ...]:
    path = [start]
    while path[-1] != goal:
        nxt = int(pred[path[-1]])
        if nxt < 0:
            raise ValidationError(f"nodes {start} and {goal} are disconnected")
        path.append(nxt)
    return tuple(path)


def shortest_path(sc: SimplicialComplex, start: int, goal: int) -> tuple[int, ...]:
    """Geodesic shortest path between two nodes of an embedded complex.

    Edges are weighted by the Euclidean distance between their endpoints,
    so paths follow the geometry of the mesh rather than hop counts (hop
    counts would pick among many equally short zigzags and the result
    would be locally unpredictable).  Without vertex positions falls back
    to hop counts with smallest-id tie-breaks.
    """
    n = sc.num(0)
    if not (0 <= start < n and 0 <= goal < n):
        raise ValidationError(f"nodes {start}, {goal} outside 0..{n - 1}")
    if sc.vertex_positions is not None:
        _, pred = scipy.sparse.csgraph.dijkstra(
            _length_graph(sc), indices=goal, return_predecessors=True
        )
        return _walk_predecessors(pred, start, goal)
    adj = _adjacency(sc)
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    if start not in dist:
        raise ValidationError(f"nodes {start} and {goal} are disconnected")
    path = [start]
    while path[-1] != goal:
        here = path[-1]
        path.append(min(u for u in adj[here] if dist.get(u, -1) == dist[here] - 1))
    return tuple(path)


def _region_nodes(sc: SimplicialComplex, name: str) -> np.ndarray:
    if sc.vertex_positions is None:
        raise ValidationError("complex lacks vertex positions; regenerate with positions")
    (x0, x1), (y0, y1) = REGIONS[name]
    p = sc.vertex_positions
    mask = (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
    nodes = np.nonzero(mask)[0]
    if nodes.size == 0:
        raise ValidationError(f"no nodes inside region {name!r}")
    return nodes


def gen_trajectories(
    sc: SimplicialComplex,
    count: int = 1000,
    seed: int = 0,
    splits: tuple[int, int, int] = (800, 100, 100),
) -> TrajectoryDataset:
    """Corner-to-corner geodesic trajectories over the embedded complex.

    Each sequence walks lower-left -> one of {upper-left, center,
    lower-right} -> upper-right, concatenating two Euclidean-weighted
    shortest paths, so the walks bend smoothly around the holes.  The
    split sizes must sum to `count`.
    """
    if sum(splits) != count:
        raise ValidationError(f"splits {splits} do not sum to {count}")
    rng = np.random.default_rng(seed)
    graph = _length_graph(sc)
    pred_cache: dict[int, np.ndarray] = {}

    def path_to(start: int, goal: int) -> tuple[int, ...]:
        if goal not in pred_cache:
            _, pred_cache[goal] = scipy.sparse.csgraph.dijkstra(
                graph, indices=goal, return_predecessors=True
            )
        return _walk_predecessors(pred_cache[goal], start, goal)

    pools = {name: _region_nodes(sc, name) for name in REGIONS}
    sequences: list[tuple[int, ...]] = []
    attempts = 0
    while len(sequences) < count:
        attempts += 1
        if attempts > 50 * count:
            raise ValidationError("could not sample enough multi-edge trajectories")
        start = int(rng.choice(pools["lower_left"]))
        mid_pool = pools[_MID_REGIONS[int(rng.integers(len(_MID_REGIONS)))]]
        mid = int(rng.choice(mid_pool))
        end = int(rng.choice(pools["upper_right"]))
        seq = path_to(start, mid) + path_to(mid, end)[1:]
        if len(seq) < 3:
            continue
        sequences.append(seq)
    bounds = np.cumsum((0,) + splits)
    split_idx = {
        name: np.arange(bounds[i], bounds[i + 1])
        for i, name in enumerate(("train", "val", "test"))
    }
    return TrajectoryDataset(complex=sc, sequences=tuple(sequences), splits=split_idx)


def flow_from_path(sc: SimplicialComplex, path) -> np.ndarray:
    """Oriented indicator flow of a node path.

    The entry of edge [a, b] (stored orientation a < b) is +1 when the path
    traverses a -> b, -1 for b -> a; revisited edges keep the last
    traversal's sign.
    """
    flow = np.zeros(sc.num(1))
    for a, b in zip(path[:-1], path[1:]):
        idx = sc.index_of((a, b))
        flow[idx] = 1.0 if (int(a), int(b)) == sc.simplices[1][idx] else -1.0
    return flow


def decode_flow(sc: SimplicialComplex, flow: np.ndarray) -> list[tuple[int, int]]:
    """Oriented edges of a flow's support, in stored-edge order."""
    out = []
    for idx in np.nonzero(np.asarray(flow))[0]:
        a, b = sc.simplices[1][int(idx)]
        out.append((a, b) if flow[idx] > 0 else (b, a))
    return out


def _sequence_sample(sc, adj, seq) -> TrajectorySample:
    if len(seq) < 3:
        raise ValidationError(f"sequence {seq!r} too short to hold out a step")
    prefix, target_node = seq[:-1], seq[-1]
    last = prefix[-1]
    candidates = adj[last]
    if target_node not in candidates:
        raise ValidationError(f"nodes {last} and {target_node} are not adjacent")
    return TrajectorySample(
        flow=flow_from_path(sc, prefix),
        last_node=int(last),
        candidates=tuple(int(c) for c in candidates),
        target=candidates.index(target_node),
    )


def write_trajectories_json(path, dataset: TrajectoryDataset) -> None:
    """Export the node sequences as a JSON list of index lists."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([list(map(int, s)) for s in dataset.sequences], fh)
        fh.write("\n")


def read_trajectories_json(
    path, sc: SimplicialComplex, splits: tuple[int, int, int] | None = None
) -> TrajectoryDataset:
    """Rebuild a TrajectoryDataset from an exported sequence list."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    sequences = tuple(tuple(int(v) for v in s) for s in raw)
    n = len(sequences)
    if splits is None:
        n_test = max(n // 10, 1) if n > 2 else 0
        splits = (n - 2 * n_test, n_test, n_test)
    if sum(splits) != n:
        raise ValidationError(f"splits {splits} do not sum to {n} sequences")
    bounds = np.cumsum((0,) + tuple(splits))
    split_idx = {
        name: np.arange(bounds[i], bounds[i + 1])
        for i, name in enumerate(("train", "val", "test"))
    }
    return TrajectoryDataset(complex=sc, sequences=sequences, splits=split_idx)


# ---------------------------------------------------------------------------
# simplex prediction


def build_simplex_dataset(
    sc_full: SimplicialComplex,
    citations: Cochain,
    threshold: float = 7.0,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    inputs: dict[int, Cochain] | None = None,
) -> SimplexDataset:
    """Threshold a top-order signal into closure labels and split.

    Candidates are all order-k simplices of `sc_full` where k is the
    citation cochain's order; a candidate is positive when its value
    exceeds `threshold` strictly.  The host complex keeps every lower-order
    simplex but only the training positives at order k.  Missing input
    orders are padded with zero cochains on the host complex.
    """
    q = citations.k
    if q < 1 or q != sc_full.dim:
        raise ValidationError(
            f"citations must sit on the top order ({sc_full.dim}), got {q}; anything "
            "above the candidate order would leak labels through the closure"
        )
    values = np.asarray(citations.values, dtype=np.float64).reshape(-1)
    cands = sc_full.simplices[q]
    if values.shape[0] != len(cands):
        raise ValidationError(
            f"citation signal has {values.shape[0]} entries for {len(cands)} simplices"
        )
    if abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise ValidationError(f"ratios {ratios} must be positive and sum to 1")
    labels = (values > threshold).astype(np.float64)
    if labels.min() == labels.max():
        raise ValidationError("thresholding produced a single class")

    m = len(cands)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    n_train = int(round(ratios[0] * m))
    n_val = int(round(ratios[1] * m))
    splits = {
        "train": np.sort(perm[:n_train]),
        "val": np.sort(perm[n_train : n_train + n_val]),
        "test": np.sort(perm[n_train + n_val :]),
    }
    for name, rows in splits.items():
        if rows.size == 0 or labels[rows].min() == labels[rows].max():
            raise ValidationError(f"split {name!r} lacks one of the classes")

    train_pos = [list(cands[i]) for i in splits["train"] if labels[i] > 0]
    maximal = train_pos + [list(s) for s in sc_full.simplices[q - 1]]
    for k in range(q - 1):
        maximal += [list(s) for s in sc_full.simplices[k]]
    host = build_complex(maximal, vertex_positions=sc_full.vertex_positions)
    if host.num(0) != sc_full.num(0) or host.simplices[: q] != sc_full.simplices[: q]:
        raise ValidationError("host rebuild changed the lower-order structure")

    full_inputs = dict(inputs or {})
    for k in range(host.dim + 1):
        if k in full_inputs:
            x = full_inputs[k].values
            rows = x.shape[0]
            if rows != host.num(k):
                raise ValidationError(
                    f"order-{k} input has {rows} rows, host complex has {host.num(k)}"
                )
        else:
            full_inputs[k] = Cochain(k, np.zeros((host.num(k), 1)))

    return SimplexDataset(
        complex=host,
        inputs=full_inputs,
        candidates=np.array([list(c) for c in cands], dtype=int),
        labels=labels,
        splits=splits,
    )


def gen_planted_citations(
    sc: SimplicialComplex, noise_sd: float = 0.25, seed: int = 0
) -> tuple[dict[int, Cochain], Cochain, float]:
    """Closure signal planted on a smooth latent field over the complex.

    A random low-frequency field over the unit square is observed at the
    vertices (noisy, sd 10*noise_sd) and at edge midpoints (cleaner, sd
    noise_sd/2); each triangle's citation value is the mean of its boundary
    edges' observations plus Gaussian noise (sd noise_sd).  Vertex
    observations alone predict closure only coarsely, so order-0-only
    architectures trail models that can denoise over the complex.
    Returns (inputs, citations, median threshold).
    """
    if sc.dim < 2:
        raise ValidationError("planted task needs a complex with triangles")
    if sc.vertex_positions is None:
        raise ValidationError("complex lacks vertex positions; regenerate with positions")
    rng = np.random.default_rng(seed)
    pos = sc.vertex_positions

    freqs = rng.uniform(0.5, 1.25, size=3)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=3)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
    amps = rng.uniform(0.5, 1.0, size=3)
    waves = freqs[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def field(points: np.ndarray) -> np.ndarray:
        phase = 2.0 * np.pi * points @ waves.T + phases
        return 6.0 + np.cos(phase) @ amps

    x0 = field(pos)[:, None] + rng.normal(0.0, 10.0 * noise_sd, size=(sc.num(0), 1))
    mids = np.array([(pos[u] + pos[v]) / 2.0 for u, v in sc.simplices[1]])
    x1 = field(mids)[:, None] + rng.normal(0.0, noise_sd / 2.0, size=(sc.num(1), 1))
    q = 2
    values = np.empty(sc.num(q))
    for i, tri in enumerate(sc.simplices[q]):
        a, b, c = tri
        edges = [sc.index_of(e) for e in ((a, b), (a, c), (b, c))]
        values[i] = x1[edges, 0].mean() + rng.normal(0.0, noise_sd)
    threshold = float(np.median(values))
    inputs = {0: Cochain(0, x0), 1: Cochain(1, x1)}
    return inputs, Cochain(q, values), threshold


# ---------------------------------------------------------------------------
# heuristics and metrics


def heuristic_score(variant: str, face_values) -> float:
    """Closure score of a candidate from its face values.

    harmonic: n / sum(1/x); geometric: (prod x)^(1/n); arithmetic: mean.
    """
    x = np.asarray(face_values, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValidationError("no face values given")
    if variant == "arithmetic":
        return float(x.mean())
    if variant == "geometric":
        return float(np.prod(x) ** (1.0 / x.size))
    if variant == "harmonic":
        if np.any(x == 0):
            raise ValidationError("harmonic mean undefined for zero face values")
        return float(x.size / np.sum(1.0 / x))
    raise ValidationError(f"unknown heuristic {variant!r}")


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with half credit for ties."""
    return auc_score(np.asarray(labels), np.asarray(scores))


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValidationError("predictions and labels must align and be nonempty")
    return float(np.mean(preds == labels))
