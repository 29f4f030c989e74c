"""Task pipelines: synthetic meshes, trajectories, closure datasets, metrics."""

import numpy as np
import pytest

from sccnn import tasks
from sccnn.complexes import Cochain, build_complex, normalized_operators
from sccnn.errors import ValidationError


# ---------------------------------------------------------------------------
# synthetic mesh generator


def test_gen_synthetic_sc_validation():
    with pytest.raises(ValidationError):
        tasks.gen_synthetic_sc(2, 0)
    with pytest.raises(ValidationError):
        tasks.gen_synthetic_sc(100, holes=7)


def test_gen_synthetic_sc_deterministic():
    a = tasks.gen_synthetic_sc(150, 2, seed=9)
    b = tasks.gen_synthetic_sc(150, 2, seed=9)
    assert a.simplices == b.simplices
    assert np.array_equal(a.vertex_positions, b.vertex_positions)


def test_gen_synthetic_sc_reference_instance():
    """The default benchmark mesh: two holes leave a two-dimensional
    harmonic space, and no vertex survives inside a removed disc."""
    sc = tasks.gen_synthetic_sc(400, 2, seed=1)
    assert (sc.num(0), sc.num(1), sc.num(2)) == (331, 935, 603)
    lap = normalized_operators(sc, 1, "raw").lap.toarray()
    eigenvalues = np.linalg.eigvalsh(lap)
    assert int((eigenvalues < 1e-8).sum()) == 2
    for center, radius in tasks.HOLES[:2]:
        dist = np.linalg.norm(sc.vertex_positions - np.asarray(center), axis=1)
        assert dist.min() >= radius


def test_gen_synthetic_sc_no_holes_is_contractible():
    sc = tasks.gen_synthetic_sc(120, 0, seed=3)
    assert sc.num(0) == 120  # nothing removed
    lap = normalized_operators(sc, 1, "raw").lap.toarray()
    eigenvalues = np.linalg.eigvalsh(lap)
    assert int((eigenvalues < 1e-8).sum()) == 0


# ---------------------------------------------------------------------------
# shortest paths


def test_shortest_path_is_geodesic():
    sc = tasks.gen_synthetic_sc(200, 2, seed=4)
    import scipy.sparse.csgraph

    graph = tasks._length_graph(sc)
    dist = scipy.sparse.csgraph.dijkstra(graph, indices=0)
    goal = int(np.argmax(np.isfinite(dist) * dist))  # farthest reachable node
    path = tasks.shortest_path(sc, 0, goal)
    assert path[0] == 0 and path[-1] == goal
    pos = sc.vertex_positions
    length = 0.0
    for a, b in zip(path[:-1], path[1:]):
        sc.index_of((a, b))  # every step is an edge of the complex
        length += float(np.linalg.norm(pos[a] - pos[b]))
    assert abs(length - dist[goal]) < 1e-9


def test_shortest_path_hop_fallback(example_sc):
    assert example_sc.vertex_positions is None
    assert tasks.shortest_path(example_sc, 6, 0) == (6, 4, 1, 0)
    assert tasks.shortest_path(example_sc, 3, 3) == (3,)
    with pytest.raises(ValidationError):
        tasks.shortest_path(example_sc, 0, 99)


def test_shortest_path_disconnected():
    sc = build_complex([[0, 1], [2, 3]])
    with pytest.raises(ValidationError):
        tasks.shortest_path(sc, 0, 3)
    positions = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]])
    embedded = build_complex([[0, 1], [2, 3]], vertex_positions=positions)
    with pytest.raises(ValidationError):
        tasks.shortest_path(embedded, 0, 3)


# ---------------------------------------------------------------------------
# trajectory corpus


def test_gen_trajectories_split_mismatch():
    sc = tasks.gen_synthetic_sc(200, 2, seed=4)
    with pytest.raises(ValidationError):
        tasks.gen_trajectories(sc, count=10, splits=(8, 1, 2))


def test_gen_trajectories_walks_the_mesh():
    sc = tasks.gen_synthetic_sc(300, 2, seed=2)
    data = tasks.gen_trajectories(sc, count=30, seed=5, splits=(24, 3, 3))
    assert len(data.sequences) == 30
    assert [len(data.splits[n]) for n in ("train", "val", "test")] == [24, 3, 3]
    (ll_x, ll_y) = tasks.REGIONS["lower_left"]
    (ur_x, ur_y) = tasks.REGIONS["upper_right"]
    pos = sc.vertex_positions
    for seq in data.sequences:
        assert len(seq) >= 3
        for a, b in zip(seq[:-1], seq[1:]):
            sc.index_of((a, b))
        assert ll_x[0] <= pos[seq[0], 0] <= ll_x[1]
        assert ll_y[0] <= pos[seq[0], 1] <= ll_y[1]
        assert ur_x[0] <= pos[seq[-1], 0] <= ur_x[1]
        assert ur_y[0] <= pos[seq[-1], 1] <= ur_y[1]
    again = tasks.gen_trajectories(sc, count=30, seed=5, splits=(24, 3, 3))
    assert again.sequences == data.sequences


def test_region_nodes_need_positions(example_sc):
    with pytest.raises(ValidationError):
        tasks._region_nodes(example_sc, "lower_left")


# ---------------------------------------------------------------------------
# flows and samples


def test_flow_round_trip(example_sc):
    path = (0, 1, 2, 4)
    flow = tasks.flow_from_path(example_sc, path)
    assert sorted(np.abs(flow)) == [0] * 7 + [1] * 3
    assert tasks.decode_flow(example_sc, flow) == [(0, 1), (1, 2), (2, 4)]
    back = tasks.flow_from_path(example_sc, path[::-1])
    assert np.array_equal(back, -flow)
    assert tasks.decode_flow(example_sc, back) == [(1, 0), (2, 1), (4, 2)]


def test_flow_requires_real_edges(example_sc):
    with pytest.raises(ValidationError):
        tasks.flow_from_path(example_sc, (0, 5))  # labels 1 and 6 are not adjacent


def test_sequence_sample_contract(example_sc):
    adj = tasks._adjacency(example_sc)
    sample = tasks._sequence_sample(example_sc, adj, (0, 1, 2, 4))
    assert sample.last_node == 2
    assert sample.candidates == adj[2]
    assert sample.candidates[sample.target] == 4
    assert np.array_equal(sample.flow, tasks.flow_from_path(example_sc, (0, 1, 2)))
    with pytest.raises(ValidationError):
        tasks._sequence_sample(example_sc, adj, (0, 1))
    with pytest.raises(ValidationError):
        tasks._sequence_sample(example_sc, adj, (0, 1, 5))  # final hop not an edge


def test_training_view_reverses_only_test(example_sc):
    seqs = ((0, 1, 2, 4), (3, 2, 4, 6), (1, 0, 2, 5))
    data = tasks.TrajectoryDataset(
        complex=example_sc,
        sequences=seqs,
        splits={
            "train": np.array([0]),
            "val": np.array([1]),
            "test": np.array([2]),
        },
    )
    plain = data.training_view()
    flipped = data.training_view(reverse_test=True)
    assert np.array_equal(plain.train[0].flow, flipped.train[0].flow)
    assert np.array_equal(plain.val[0].flow, flipped.val[0].flow)
    adj = tasks._adjacency(example_sc)
    expected = tasks._sequence_sample(example_sc, adj, seqs[2][::-1])
    assert np.array_equal(flipped.test[0].flow, expected.flow)
    assert flipped.test[0].candidates == expected.candidates
    assert flipped.test[0].target == expected.target


def test_trajectories_json_round_trip(tmp_path, example_sc):
    seqs = tuple((0, 1, 2, 4) for _ in range(20))
    data = tasks.TrajectoryDataset(
        complex=example_sc,
        sequences=seqs,
        splits={"train": np.arange(16), "val": np.arange(16, 18), "test": np.arange(18, 20)},
    )
    path = tmp_path / "walks.json"
    tasks.write_trajectories_json(path, data)
    back = tasks.read_trajectories_json(path, example_sc)
    assert back.sequences == seqs
    assert [len(back.splits[n]) for n in ("train", "val", "test")] == [16, 2, 2]
    explicit = tasks.read_trajectories_json(path, example_sc, splits=(10, 5, 5))
    assert [len(explicit.splits[n]) for n in ("train", "val", "test")] == [10, 5, 5]
    with pytest.raises(ValidationError):
        tasks.read_trajectories_json(path, example_sc, splits=(10, 5, 4))


# ---------------------------------------------------------------------------
# closure prediction data


def test_gen_planted_citations(example_sc):
    sc = tasks.gen_synthetic_sc(60, 0, seed=5)
    inputs, citations, threshold = tasks.gen_planted_citations(sc, noise_sd=0.1, seed=0)
    assert inputs[0].values.shape == (sc.num(0), 1)
    assert inputs[1].values.shape == (sc.num(1), 1)
    assert citations.k == 2 and citations.values.shape == (sc.num(2),)
    assert threshold == np.median(citations.values)
    for i, tri in enumerate(sc.simplices[2]):
        a, b, c = tri
        edges = [sc.index_of(e) for e in ((a, b), (a, c), (b, c))]
        planted = inputs[1].values[edges, 0].mean()
        assert abs(citations.values[i] - planted) < 1.5  # mean plus bounded noise
    # node observations track the same field as the nearby edges, just noisier
    corr = np.corrcoef(
        inputs[0].values[:, 0],
        [
            inputs[1].values[[i for i, e in enumerate(sc.simplices[1]) if u in e], 0].mean()
            for u in range(sc.num(0))
        ],
    )[0, 1]
    assert corr > 0.5
    with pytest.raises(ValidationError):  # no triangles
        tasks.gen_planted_citations(build_complex([[0, 1], [1, 2]]))
    with pytest.raises(ValidationError):  # triangles but no positions
        tasks.gen_planted_citations(example_sc)


def test_build_simplex_dataset_structure():
    sc = tasks.gen_synthetic_sc(120, 0, seed=3)
    inputs, citations, threshold = tasks.gen_planted_citations(sc, seed=1)
    data = tasks.build_simplex_dataset(
        sc, citations, threshold=threshold, seed=2, inputs=inputs
    )
    m = sc.num(2)
    labels = (citations.values > threshold).astype(float)
    assert np.array_equal(data.labels, labels)
    assert data.candidates.shape == (m, 3)
    joined = np.concatenate([data.splits[n] for n in ("train", "val", "test")])
    assert np.array_equal(np.sort(joined), np.arange(m))
    # host keeps the lower orders but only the training positives on top
    assert data.complex.simplices[:2] == sc.simplices[:2]
    n_train_pos = int(labels[data.splits["train"]].sum())
    assert data.complex.num(2) == n_train_pos < m
    host_tris = set(data.complex.simplices[2])
    for i in data.splits["test"]:
        if labels[i] > 0:
            assert tuple(data.candidates[i]) not in host_tris
    # provided inputs pass through, the top order is zero-padded
    assert np.array_equal(data.inputs[1].values, inputs[1].values)
    assert data.inputs[2].values.shape == (n_train_pos, 1)
    assert not data.inputs[2].values.any()


def test_build_simplex_dataset_validation():
    sc = tasks.gen_synthetic_sc(120, 0, seed=3)
    _, citations, threshold = tasks.gen_planted_citations(sc, seed=1)
    with pytest.raises(ValidationError):  # signal below the top order leaks
        tasks.build_simplex_dataset(sc, Cochain(1, np.ones(sc.num(1))))
    with pytest.raises(ValidationError):  # length mismatch
        tasks.build_simplex_dataset(sc, Cochain(2, np.ones(3)))
    with pytest.raises(ValidationError):  # single class
        tasks.build_simplex_dataset(sc, citations, threshold=1e9)
    with pytest.raises(ValidationError):  # ratios must sum to one
        tasks.build_simplex_dataset(sc, citations, threshold=threshold, ratios=(0.5, 0.2, 0.2))


# ---------------------------------------------------------------------------
# heuristics and metrics


def test_heuristic_scores():
    for variant in ("arithmetic", "geometric", "harmonic"):
        assert tasks.heuristic_score(variant, (1.0, 1.0, 1.0)) == 1.0
    assert tasks.heuristic_score("arithmetic", (1, 2, 4)) == pytest.approx(7 / 3)
    assert tasks.heuristic_score("geometric", (1, 2, 4)) == pytest.approx(2.0)
    assert tasks.heuristic_score("harmonic", (1, 2, 4)) == pytest.approx(12 / 7)
    with pytest.raises(ValidationError):
        tasks.heuristic_score("harmonic", (0.0, 1.0))
    with pytest.raises(ValidationError):
        tasks.heuristic_score("median", (1.0,))
    with pytest.raises(ValidationError):
        tasks.heuristic_score("arithmetic", ())


def test_auc_and_accuracy():
    assert tasks.auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert tasks.auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5
    assert tasks.accuracy([1, 0, 1], [1, 1, 1]) == pytest.approx(2 / 3)
    with pytest.raises(ValidationError):
        tasks.accuracy([1, 0], [1, 0, 1])
    with pytest.raises(ValidationError):
        tasks.accuracy([], [])
