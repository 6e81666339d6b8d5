import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph
from mlconflict import DataError
from mlconflict.extraction import (
    ExtractionConfig,
    extract,
    initial_sets,
    node_roles,
    polarity_metrics,
    vertex_layer_score,
)
from mlconflict.graphs import Community, CommunitySet, MultilayerGraph


def graph(*layers, names=None):
    n = layers[0].shape[0]
    names = names or tuple(f"v{i:02d}" for i in range(n))
    return MultilayerGraph(1970, tuple(names), tuple((f"l{k}", a) for k, a in enumerate(layers)))


def planted(rng, n=60, blocks=((range(0, 10), (0, 1)),), n_layers=4, p=0.05, p_in=0.9):
    layers = []
    for l in range(n_layers):
        a = rng.random((n, n)) < p
        for members, dense in blocks:
            if l in dense:
                idx = np.array(list(members))
                a[np.ix_(idx, idx)] = rng.random((idx.size, idx.size)) < p_in
        a = np.triu(a, 1)
        layers.append((a + a.T).astype(np.int8))
    return graph(*layers)


def test_clique_beats_random_subsets(rng):
    n = 20
    clique = np.zeros((n, n), dtype=np.int8)
    clique[:5, :5] = 1
    np.fill_diagonal(clique, 0)
    g_clique = graph(clique)
    target = vertex_layer_score(g_clique.vertices[:5], ["l0"], g_clique)
    p = 10 / (n * (n - 1) / 2)
    for _ in range(100):
        g = graph(random_graph(rng, n, p))
        subset = rng.choice(g.vertices, size=5, replace=False)
        assert vertex_layer_score(subset, ["l0"], g) < target


def test_no_internal_edges_scores_zero(rng):
    a = random_graph(rng, 12, 0.3)
    a[:4, :4] = 0
    b = random_graph(rng, 12, 0.3)
    b[:4, :4] = 0
    g = graph(a, b)
    assert vertex_layer_score(g.vertices[:4], ["l0", "l1"], g) == 0.0


def test_score_rejects_unknown_vertex_or_layer(rng):
    g = graph(random_graph(rng, 6, 0.5))
    with pytest.raises(DataError):
        vertex_layer_score(["v00", "zzz"], ["l0"], g)
    with pytest.raises(DataError):
        vertex_layer_score(["v00", "v01"], ["nope"], g)


def test_single_layer_monotone_on_all_4_vertex_graphs():
    pairs = list(itertools.combinations(range(4), 2))
    graphs = []
    for bits in itertools.product((0, 1), repeat=6):
        a = np.zeros((4, 4), dtype=np.int8)
        for on, (i, j) in zip(bits, pairs):
            a[i, j] = a[j, i] = on
        graphs.append(a)
    by_degrees = {}
    for a in graphs:
        by_degrees.setdefault(tuple(a.sum(axis=1)), []).append(a)
    names = ("a", "b", "c", "d")
    checked = 0
    for group in by_degrees.values():
        for size in (2, 3, 4):
            for B in itertools.combinations(range(4), size):
                vals = []
                for a in group:
                    e_in = a[np.ix_(B, B)].sum() // 2
                    vals.append((e_in, vertex_layer_score([names[i] for i in B], ["l0"], graph(a, names=names))))
                for (e1, s1), (e2, s2) in itertools.combinations(vals, 2):
                    if e1 < e2:
                        assert s1 <= s2 + 1e-12
                    elif e2 < e1:
                        assert s2 <= s1 + 1e-12
                    checked += 1
    assert checked > 0


def test_empty_graph_gives_empty_set():
    g = graph(np.zeros((10, 10), dtype=np.int8), np.zeros((10, 10), dtype=np.int8))
    assert len(extract(g, ExtractionConfig(seeds=3), seed=0)) == 0


def test_planted_block_recovered():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        g = planted(rng)
        cs = extract(g, ExtractionConfig((0.25,)), seed=seed)
        truth = set(g.vertices[:10])
        hits += any(
            len(c.vertices & truth) / len(c.vertices | truth) >= 0.9 and c.layers == {"l0", "l1"}
            for c in cs.communities
        )
    assert hits >= 9


def test_two_disjoint_blocks_are_top_communities():
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        g = planted(rng, blocks=((range(0, 10), (0, 1)), (range(10, 20), (2, 3))))
        cs = extract(g, ExtractionConfig((0.25,)), seed=seed)
        top = sorted(cs.communities, key=lambda c: -c.score)[:2]
        blocks = [(set(g.vertices[:10]), {"l0", "l1"}), (set(g.vertices[10:20]), {"l2", "l3"})]
        for c in top:
            assert sum(bool(c.vertices & vs) for vs, _ in blocks) == 1  # no cross-block vertices
        found = {(frozenset(c.vertices), frozenset(c.layers)) for c in top}
        assert found == {(frozenset(vs), frozenset(ls)) for vs, ls in blocks}


def test_returned_scores_positive_and_deduplicated(rng):
    g = planted(rng)
    cfg = ExtractionConfig()
    cs = extract(g, cfg, seed=3)
    for c in cs.communities:
        assert c.score > 0 and len(c.vertices) >= 2 and c.layers
    for a, b in itertools.combinations(cs.communities, 2):
        assert len(a.vertices & b.vertices) / len(a.vertices | b.vertices) <= cfg.overlap_threshold


def test_extract_deterministic(rng):
    g = planted(rng)
    assert extract(g, seed=5) == extract(g, seed=5)


def test_relabeling_invariance(rng):
    g = planted(rng, n=30, blocks=((range(0, 8), (0, 1)),))
    cfg = ExtractionConfig((0.25,), seeds=4)
    starts = [[g.vertices[i] for i in idx] for _, idx in initial_sets(len(g.vertices), cfg, 9)]
    perm = rng.permutation(len(g.vertices))
    rename = {v: f"u{k:02d}" for k, v in enumerate(rng.permutation(g.vertices))}
    verts = tuple(rename[g.vertices[i]] for i in perm)
    layers = tuple((name, a[np.ix_(perm, perm)]) for name, a in g.layers)
    h = MultilayerGraph(g.year, verts, layers)
    got = extract(h, cfg, starts=[[rename[v] for v in s] for s in starts])
    want = extract(g, cfg, starts=starts)
    mapped = {(frozenset(rename[v] for v in c.vertices), c.layers) for c in want.communities}
    assert {(c.vertices, c.layers) for c in got.communities} == mapped


def test_config_validation():
    with pytest.raises(ValueError):
        ExtractionConfig(init_proportions=(0.0,))
    with pytest.raises(ValueError):
        ExtractionConfig(max_iterations=0)
    with pytest.raises(ValueError):
        ExtractionConfig(overlap_threshold=1.5)


def _cs(*groups):
    return CommunitySet(1970, tuple(Community(frozenset(g), frozenset({"x"}), 1.0) for g in groups))


def test_polarity_examples():
    r = polarity_metrics(_cs(), list("ABCD"))
    assert (r.n_communities, r.pct_assigned, r.pct_bridges) == (0, 0.0, 0.0)
    r = polarity_metrics(_cs("AB", "BC"), list("ABCD"))
    assert (r.n_communities, r.pct_assigned, r.pct_bridges) == (2, 0.75, 0.25)


def test_polarity_requires_members_in_system():
    with pytest.raises(DataError):
        polarity_metrics(_cs("AZ"), list("ABC"))


def test_polarity_matches_set_algebra(rng):
    system = [f"S{i}" for i in range(25)]
    for _ in range(50):
        groups = [set(rng.choice(system, size=rng.integers(2, 8), replace=False)) for _ in range(rng.integers(0, 6))]
        r = polarity_metrics(_cs(*groups), system)
        union = set().union(*groups) if groups else set()
        bridges = {v for v in system if sum(v in g for g in groups) >= 2}
        assert r.n_communities == len(groups)
        assert r.pct_assigned == len(union) / 25
        assert r.pct_bridges == len(bridges) / 25
        assert r.pct_bridges <= r.pct_assigned <= 1


def test_node_roles_examples():
    roles = node_roles(_cs("vuw", "vx"))
    assert roles["v"].is_bridge and roles["v"].partners is None
    roles = node_roles(_cs("vuw"))
    assert "u" in roles["v"].partners and "v" in roles["u"].partners


def test_node_roles_match_counting_pass(rng):
    pool = list("ABCDEFGHIJKL")
    for _ in range(50):
        groups = [set(rng.choice(pool, size=rng.integers(2, 6), replace=False)) for _ in range(rng.integers(1, 5))]
        roles = node_roles(_cs(*groups))
        count = {v: sum(v in g for g in groups) for v in pool}
        assert set(roles) == {v for v in pool if count[v]}
        for v, role in roles.items():
            assert role.is_bridge == (count[v] >= 2)
            if count[v] == 1:
                (home,) = [g for g in groups if v in g]
                assert role.partners == {u for u in home if u != v and count[u] == 1}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_polarity_invariant(seed):
    rng = np.random.default_rng(seed)
    g = planted(rng, n=20, blocks=((range(0, 6), (0,)),), n_layers=2, p=0.1)
    cs = extract(g, ExtractionConfig((0.3,), seeds=2), seed=seed)
    r = polarity_metrics(cs, g.vertices)
    assert 0 <= r.pct_bridges <= r.pct_assigned <= 1
