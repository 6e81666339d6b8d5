import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlconflict import DataError
from mlconflict.graphs import (
    Community,
    CommunitySet,
    GraphSequence,
    MultilayerGraph,
    align_layers,
    build_window_layer,
    project_communities,
)


def test_window_includes_first_year():
    vs, adj = build_window_layer([("A", "B", 1965)], 1974, 10)
    assert vs == ["A", "B"] and adj[0, 1] == 1 == adj[1, 0]


def test_window_excludes_year_before():
    vs, adj = build_window_layer([("A", "B", 1964)], 1974, 10, vertices=["A", "B"])
    assert adj.sum() == 0


def test_window_ignores_future_and_self_events():
    vs, adj = build_window_layer([("A", "B", 1975), ("A", "A", 1970)], 1974, 10, vertices=["A", "B"])
    assert adj.sum() == 0


def test_window_matches_per_dyad_scan(rng):
    names = [f"E{i}" for i in range(12)]
    events = [
        (names[a], names[b], int(y))
        for a, b, y in zip(rng.integers(0, 12, 200), rng.integers(0, 12, 200), rng.integers(1960, 1991, 200))
    ]
    for target in range(1960, 1991):
        _, adj = build_window_layer(events, target, 10, vertices=names)
        for i, j in itertools.combinations(range(12), 2):
            hit = any(
                {a, b} == {names[i], names[j]} and target - 9 <= y <= target for a, b, y in events
            )
            assert adj[i, j] == int(hit) == adj[j, i]
        assert not np.diag(adj).any()


def test_window_order_independent_and_idempotent(rng):
    events = [("A", "B", 1970), ("B", "C", 1968), ("A", "B", 1971), ("C", "D", 1950)]
    _, a1 = build_window_layer(events, 1972)
    _, a2 = build_window_layer(list(reversed(events)) + events, 1972)
    assert np.array_equal(a1, a2)


def test_window_rejects_empty_identifier():
    with pytest.raises(DataError, match="event 2"):
        build_window_layer([("A", "B", 1970), ("", "B", 1970)], 1970)


def test_window_length_must_be_positive():
    with pytest.raises(ValueError):
        build_window_layer([], 1970, 0)


def test_align_union_zero_fills():
    g = align_layers({"x": (["A", "B"], np.array([[0, 1], [1, 0]])), "y": (["B", "C"], np.array([[0, 1], [1, 0]]))})
    assert g.vertices == ("A", "B", "C")
    assert g.layer("x").tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]
    assert g.layer("y").tolist() == [[0, 0, 0], [0, 0, 1], [0, 1, 0]]


def test_align_identity(rng):
    vs = ["A", "B", "C", "D"]
    a = np.triu((rng.random((4, 4)) < 0.5).astype(np.int8), 1)
    a = a + a.T
    g = align_layers({"x": (vs, a), "y": (vs, a)})
    assert np.array_equal(g.layer("x"), a) and np.array_equal(g.layer("y"), a)


def test_align_union_matches_set_union(rng):
    pool = [f"V{i}" for i in range(20)]
    layers = {}
    for name in "abc":
        vs = sorted(rng.choice(pool, size=rng.integers(2, 15), replace=False).tolist())
        layers[name] = (vs, np.zeros((len(vs), len(vs)), dtype=np.int8))
    g = align_layers(layers, policy="union")
    assert set(g.vertices) == set().union(*(set(v) for v, _ in layers.values()))


def test_align_intersection_empty_is_error():
    z = np.zeros((1, 1), dtype=np.int8)
    with pytest.raises(DataError):
        align_layers({"x": (["A"], z), "y": (["B"], z)}, policy="intersection")


def test_align_needs_a_layer():
    with pytest.raises(DataError):
        align_layers({})


def test_multilayer_graph_validates():
    with pytest.raises(DataError):
        MultilayerGraph(1970, ("A", "B"), (("x", np.array([[0, 1], [0, 0]])),))
    with pytest.raises(DataError):
        MultilayerGraph(1970, ("A", "B"), (("x", np.eye(2, dtype=int)),))
    z = np.zeros((2, 2), dtype=int)
    with pytest.raises(DataError):
        MultilayerGraph(1970, ("A", "B"), (("x", z), ("x", z)))


def test_graph_sequence_requires_contiguous_years():
    z = np.zeros((2, 2), dtype=int)
    g = lambda y: MultilayerGraph(y, ("A", "B"), (("x", z),))  # noqa: E731
    GraphSequence((g(1970), g(1971)))
    with pytest.raises(DataError):
        GraphSequence((g(1970), g(1972)))
    with pytest.raises(DataError):
        GraphSequence((g(1971), g(1970)))


def test_community_requires_two_vertices_and_a_layer():
    with pytest.raises(DataError):
        Community(frozenset({"A"}), frozenset({"x"}), 1.0)
    with pytest.raises(DataError):
        Community(frozenset({"A", "B"}), frozenset(), 1.0)


def _cs(*groups):
    return CommunitySet(1970, tuple(Community(frozenset(g), frozenset({"x"}), 1.0) for g in groups))


def test_projection_example():
    pg = project_communities(_cs("ABC", "AB"))
    idx = {v: i for i, v in enumerate(pg.vertices)}
    w = pg.weights
    assert w[idx["A"], idx["B"]] == 2 and w[idx["A"], idx["C"]] == 1 and w[idx["B"], idx["C"]] == 1


def test_projection_isolated_vertex_row_is_zero():
    pg = project_communities(_cs("AB"), vertices=["A", "B", "Z"])
    assert pg.weights[2].sum() == 0 and pg.weights[:, 2].sum() == 0


def test_projection_matches_pairwise_count(rng):
    verts = [f"V{i:02d}" for i in range(15)]
    groups = [set(rng.choice(verts, size=rng.integers(2, 8), replace=False)) for _ in range(20)]
    pg = project_communities(_cs(*groups), vertices=verts)
    for i, j in itertools.product(range(15), repeat=2):
        expected = 0 if i == j else sum(verts[i] in g and verts[j] in g for g in groups)
        assert pg.weights[i, j] == expected


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sets(st.sampled_from("ABCDEFG"), min_size=2), min_size=1, max_size=6), st.sets(st.sampled_from("ABCDEFG"), min_size=2))
def test_projection_monotone(groups, extra):
    verts = list("ABCDEFG")
    before = project_communities(_cs(*groups), verts).weights
    after = project_communities(_cs(*groups, extra), verts).weights
    assert (after >= before).all()


def test_community_set_round_trip():
    cs = _cs("AB", "BCD")
    again = CommunitySet.from_dict(cs.to_dict())
    assert again == cs
