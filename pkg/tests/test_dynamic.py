from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from dyntd.dynamic import WORK_C1, DynamicDecomposition, build_catalog
from dyntd.errors import (
    DepthExceeded,
    DepthWouldExceed,
    EdgeExists,
    Infeasible,
    InvalidDepth,
    NoRootWitness,
    NoSuchEdge,
    NotIsolated,
    NotPresent,
    SelfLoop,
    VertexExists,
)
from dyntd.graph import DynamicGraph
from dyntd.mso import build_gamma, evaluate, parse
from dyntd.static import (
    RootedForest,
    complete_graph,
    cycle_graph,
    is_valid_decomposition,
    path_graph,
    star_graph,
    tree_depth,
)

from .conftest import DOMINATING


def valid(dd: DynamicDecomposition) -> bool:
    dd.check_invariants()
    return is_valid_decomposition(dd.graph, dd.decompression(), dd.D)


def test_empty_graph(gamma_catalog3):
    dd = DynamicDecomposition.initialize(DynamicGraph(), 3, build_gamma(), gamma_catalog3)
    assert dd.roots() == [] and dd.num_cabinets() == 0
    assert dd.query() == evaluate(DynamicGraph(), build_gamma())
    dd.check_invariants()


@pytest.mark.parametrize("n", [1, 2, 5, 40])
def test_star_compresses_to_two_cabinets(catalog2, n):
    dd = DynamicDecomposition.initialize(star_graph(n), 2, build_gamma(), catalog2)
    cabs = dd.cabinets()
    assert len(cabs) == 2
    assert cabs[1].drawers == [(0, tuple(range(1, n + 1)))]
    assert dd.query() is True


def test_path7_depth3(gamma_catalog3):
    dd = DynamicDecomposition.initialize(path_graph(7), 3, build_gamma(), gamma_catalog3)
    assert valid(dd)
    assert dd.decompression().depth() == 3


def test_initialize_rejects_deep_graph(gamma_catalog3):
    with pytest.raises(DepthExceeded):
        DynamicDecomposition.initialize(complete_graph(4), 3, build_gamma(), gamma_catalog3)
    with pytest.raises(InvalidDepth):
        DynamicDecomposition(0)
    with pytest.raises(ValueError):
        DynamicDecomposition(2, catalog=build_catalog(3, S=1))


def test_extract_leaf_splits_drawer(catalog2):
    dd = DynamicDecomposition.initialize(star_graph(6), 2, None, catalog2)
    before = dd.state_digest()
    forest = dd.decompression()
    rec = dd.extract_path(3)
    assert rec.path == [3, 0] and rec.split == [3]
    sizes = sorted(len(m) for c in dd.cabinets() for _, m in c.drawers if c.parent is not None)
    assert sizes == [1, 5]
    assert dd.cabinets()[0].dirty
    assert dd.decompression() == forest
    dd.clean_dirty(rec)
    assert dd.state_digest() == before
    dd.check_invariants()


def test_extract_on_singleton_path_is_noop(gamma_catalog3):
    dd = DynamicDecomposition.initialize(path_graph(3), 3, None, gamma_catalog3)
    r = dd.roots()[0]
    before = dd.state_digest()
    rec = dd.extract_path(r)
    assert rec.path == [r] and rec.split == []
    assert dd.last.path_length == 0
    assert dd.state_digest() == before
    dd.clean_dirty(rec)
    dd.clean_dirty(type(rec)())
    assert dd.state_digest() == before
    with pytest.raises(NotPresent):
        dd.extract_path(99)


def test_delete_merges_isomorphic_siblings(gamma_catalog3):
    g = DynamicGraph.from_edges([(0, 1), (0, 2), (0, 4), (2, 3)])
    dd = DynamicDecomposition.initialize(g, 3, None, gamma_catalog3)
    dd.delete_edge(2, 3)
    assert valid(dd)
    assert len(dd.roots()) == 2
    big = max(len(m) for c in dd.cabinets() for _, m in c.drawers)
    assert big >= 2


def test_delete_in_triangle(gamma_catalog3):
    dd = DynamicDecomposition.initialize(cycle_graph(3), 3, build_gamma(), gamma_catalog3)
    dd.delete_edge(0, 1)
    assert valid(dd) and dd.query() is True
    assert len(dd.roots()) == 1


def test_delete_k2_gives_two_roots(catalog2):
    dd = DynamicDecomposition.initialize(path_graph(2), 2, build_gamma(), catalog2)
    dd.delete_edge(0, 1)
    assert sorted(dd.roots()) == [0, 1]
    assert dd.query() is False
    assert valid(dd)


def test_delete_star_spoke(catalog2):
    dd = DynamicDecomposition.initialize(star_graph(5), 2, None, catalog2)
    dd.delete_edge(0, 2)
    assert sorted(dd.roots()) == [0, 2]
    assert sorted(dd.cabinets(roots=[0])[1].drawers[0][1]) == [1, 3, 4, 5]
    assert valid(dd)
    assert dd.last.cabinets_touched <= WORK_C1 * 2


def test_reroot_examples(gamma_catalog3):
    dd = DynamicDecomposition.initialize(path_graph(3), 3, None, gamma_catalog3)
    assert dd.roots() == [1]
    before = dd.state_digest()
    dd.reroot(1)
    assert dd.state_digest() == before
    dd.reroot(0)
    assert dd.roots() == [0] and valid(dd)
    assert dd.last.reroot_depth <= 3

    dd = DynamicDecomposition.initialize(star_graph(4), 3, None, gamma_catalog3)
    dd.reroot(2)
    assert dd.roots() == [2] and dd.parent(0) == 2
    assert all(dd.parent(x) == 0 for x in (1, 3, 4))
    assert valid(dd)


def test_reroot_without_witness(gamma_catalog3):
    dd = DynamicDecomposition.initialize(path_graph(7), 3, None, gamma_catalog3)
    before = dd.state_digest()
    with pytest.raises(NoRootWitness):
        dd.reroot(0)
    assert dd.state_digest() == before


def test_insert_fast_path(gamma_catalog3):
    dd = DynamicDecomposition.initialize(path_graph(3), 3, None, gamma_catalog3)
    dd.reroot(0)
    assert dd.parent(1) == 0 and dd.parent(2) == 1
    dd.insert_edge(0, 2)
    assert dd.last.reroot_depth == 0 and dd.last.path_length == 2
    assert dd.parent(2) == 1 and valid(dd)


def test_insert_rejected_leaves_state(catalog2):
    dd = DynamicDecomposition.initialize(path_graph(3), 2, None, catalog2)
    before = dd.state_digest()
    with pytest.raises(DepthWouldExceed):
        dd.insert_edge(0, 2)
    assert dd.state_digest() == before
    assert not dd.graph.has_edge(0, 2)


def test_insert_joins_components(catalog2):
    dd = DynamicDecomposition(2, build_gamma(), catalog2)
    a, b = dd.add_isolated_vertex(), dd.add_isolated_vertex()
    assert dd.query() is False
    dd.insert_edge(a, b)
    assert len(dd.roots()) == 1 and dd.decompression().depth() == 2
    assert dd.query() is True and valid(dd)


def test_isolated_vertices(catalog2):
    dd = DynamicDecomposition(2, parse("exists x . x = x"), build_catalog(2, parse("exists x . x = x")))
    assert dd.query() is False
    v = dd.add_isolated_vertex()
    assert dd.roots() == [v] and dd.query() is True
    dd.remove_isolated_vertex(v)
    assert dd.roots() == [] and dd.query() is False
    for _ in range(1000):
        dd.add_isolated_vertex()
    assert len(dd.roots()) == 1000
    dd.query()
    assert dd.last.cabinets_touched == 0
    with pytest.raises(VertexExists):
        dd.add_isolated_vertex(5)
    dd.insert_edge(5, 6)
    with pytest.raises(NotIsolated):
        dd.remove_isolated_vertex(5)
    with pytest.raises(NotPresent):
        dd.remove_isolated_vertex(5000)


def test_edge_errors(catalog2):
    dd = DynamicDecomposition.initialize(path_graph(3), 2, None, catalog2)
    with pytest.raises(NoSuchEdge):
        dd.delete_edge(0, 2)
    with pytest.raises(EdgeExists):
        dd.insert_edge(0, 1)
    with pytest.raises(SelfLoop):
        dd.insert_edge(1, 1)
    with pytest.raises(NotPresent):
        dd.insert_edge(0, 9)


def test_find_root_examples(catalog2):
    dd = DynamicDecomposition(2, None, catalog2)
    v = dd.add_isolated_vertex()
    assert dd.find_root(v, t=1) == v
    dd = DynamicDecomposition.initialize(path_graph(3), 2, None, catalog2)
    assert dd.find_root(0, t=2) == 1
    with pytest.raises(Infeasible):
        dd.find_root(0, 0, 2, t=2)
    with pytest.raises(Infeasible):
        dd.find_root(0, t=1)


def test_round_trip_through_decompression(gamma_catalog3):
    g = DynamicGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (7, 8)])
    dd = DynamicDecomposition.initialize(g, 3, None, gamma_catalog3)
    dd.delete_edge(2, 3)
    dd.insert_edge(4, 8)
    again = DynamicDecomposition.from_forest(dd.graph, dd.decompression(), 3, None, gamma_catalog3)
    assert again.label_multiset() == dd.label_multiset()
    assert again.state_digest() == dd.state_digest()


def test_from_forest_rejects_disconnected_subtree(gamma_catalog3):
    g = DynamicGraph.from_edges([(0, 1)], range(3))
    forest = RootedForest.from_parents({0: None, 1: 0, 2: 0})
    with pytest.raises(ValueError):
        DynamicDecomposition.from_forest(g, forest, 3, None, gamma_catalog3)


ops = st.lists(st.tuples(st.sampled_from(["add", "del", "v"]), st.integers(0, 7), st.integers(0, 7)),
               max_size=40)


@settings(max_examples=40)
@given(ops)
def test_random_updates_match_oracle(gamma_catalog3, seq):
    phi = build_gamma()
    dd = DynamicDecomposition(3, phi, gamma_catalog3)
    for _ in range(5):
        dd.add_isolated_vertex()
    for kind, u, v in seq:
        g = dd.graph
        if kind == "v":
            if len(g) < 8:
                dd.add_isolated_vertex()
            continue
        if u not in g or v not in g or u == v:
            continue
        if kind == "del":
            if g.has_edge(u, v):
                dd.delete_edge(u, v)
                assert dd.last.cabinets_touched <= WORK_C1 * 3
            continue
        if g.has_edge(u, v):
            continue
        h = g.copy()
        h.set_edge(u, v, True)
        if tree_depth(h) > 3:
            before = dd.state_digest()
            with pytest.raises(DepthWouldExceed):
                dd.insert_edge(u, v)
            assert dd.state_digest() == before
            continue
        dd.insert_edge(u, v)
        assert dd.last.reroot_depth <= 3
        assert valid(dd)
        assert dd.query() == evaluate(dd.graph, phi)


def test_dominating_formula_tracks_oracle():
    phi = parse(DOMINATING)
    dd = DynamicDecomposition.initialize(path_graph(3), 3, phi)
    assert dd.query() is True
    dd.delete_edge(0, 1)
    assert dd.query() is False
    dd.insert_edge(0, 2)
    assert dd.query() is True == evaluate(dd.graph, phi)
