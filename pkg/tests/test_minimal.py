from __future__ import annotations

import itertools

import pytest

from dyntd.errors import CatalogBudgetExceeded, InconsistentLabel
from dyntd.minimal import (
    LabelCatalog,
    MinimalTreeCatalog,
    all_trees,
    bit_alphabet,
    build_root_table,
    build_sat_table,
    compute_limb_threshold,
    decode,
    enumerate_minimal_trees,
    load_catalog,
    max_isomorphic_limbs,
    placements,
    save_catalog,
    verify_limb_threshold,
)
from dyntd.mso import ConstantAssignment, build_gamma, build_tau_prime, parse
from dyntd.static import LabelledTree, rooted_tree_depth

L = LabelledTree


def test_catalog_counts():
    assert len(enumerate_minimal_trees(1, 1, [()])) == 1
    assert len(enumerate_minimal_trees(2, 1, [()])) == 2
    assert len(enumerate_minimal_trees(2, 2, [()])) == 3


def test_catalog_rejects_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_minimal_trees(0, 1, [()])
    with pytest.raises(ValueError):
        enumerate_minimal_trees(2, 0, [()])
    with pytest.raises(CatalogBudgetExceeded):
        enumerate_minimal_trees(3, 3, bit_alphabet(3), budget=100)


def _prune(tree: LabelledTree, S: int) -> LabelledTree:
    kids = [_prune(c, S) for c in tree.children]
    kept, seen = [], {}
    for c in kids:
        seen[c.key] = seen.get(c.key, 0) + 1
        if seen[c.key] <= S:
            kept.append(c)
    return L(tree.label, tuple(kept))


def _all_depth2(alphabet, cap):
    for root in alphabet:
        for k in range(cap):
            for kids in itertools.product(alphabet, repeat=k):
                yield L(root, tuple(L(x) for x in kids))


@pytest.mark.parametrize("S", [1, 2, 3])
@pytest.mark.parametrize("alphabet", [[()], ["p", "q"]])
def test_catalog_complete_against_pruned_bruteforce(S, alphabet):
    cat = enumerate_minimal_trees(2, S, alphabet)
    keys = {t.key for t in cat.entries}
    assert len(keys) == len(cat.entries)
    assert all(max_isomorphic_limbs(t) <= S for t in cat.entries)
    cap = 1 + (S + 1) * len(alphabet)
    pruned = {_prune(t, S).key for t in _all_depth2(alphabet, cap)}
    assert pruned == keys


def test_decode_examples():
    chain = L((0, 0), (L((1, 0), (L((1, 1)),)),))
    g = decode(chain)
    assert g.edges() == [(0, 1), (0, 2), (1, 2)]
    flat = L((0, 0), (L((0, 0)), L((0, 0), (L((0, 0)),))))
    assert decode(flat).num_edges() == 0
    star = L((0,), tuple(L((1,)) for _ in range(4)))
    assert decode(star).edges() == [(0, i) for i in range(1, 5)]
    with pytest.raises(InconsistentLabel):
        decode(L((1,)))
    assert decode(L((1,)), strict=False).num_edges() == 0


def test_decode_virtual_root():
    forest = L(None, (L((0,), (L((1,)),)), L((0,))))
    g = decode(forest)
    assert g.vertices() == [1, 2, 3] and g.edges() == [(1, 2)]


def test_verify_rejects_too_small_threshold():
    f = parse("exists x . not x = a")
    assert not verify_limb_threshold(0, f, all_trees(2, 1, [()]))


def test_verify_vacuous_for_large_threshold():
    f = parse("exists x . not x = a")
    assert verify_limb_threshold(5, f, all_trees(2, 3, [()]))


def test_threshold_examples():
    free = compute_limb_threshold(parse("a = a"), [()], 2)
    assert free.seed == 1 and free.S == 1 and free.validated
    gamma = compute_limb_threshold(build_gamma(), [()], 2)
    assert gamma.validated and gamma.S <= gamma.seed
    assert compute_limb_threshold(build_gamma(), [()], 1).S == 1


@pytest.mark.parametrize("t", [1, 2])
def test_computed_threshold_revalidates(t):
    f = build_tau_prime(t)
    r = compute_limb_threshold(f, bit_alphabet(2), 2)
    assert verify_limb_threshold(r.S, f, all_trees(2, r.S + 1, bit_alphabet(2)))


def test_placements_cover_label_classes():
    tree = L((0,), (L((1,)), L((1,)), L((0,)))).sorted()
    got = placements(tree, {"a", "b"})
    labels = [n.label for n, _, _ in tree.nodes()]
    pairs = {(labels[a], labels[b], a == b) for a, b in got}
    classes = set(labels)
    assert pairs == {(x, y, same) for x in classes for y in classes for same in (True, False)
                     if not same or x == y}


@pytest.fixture(scope="module")
def d2_catalog():
    cat = enumerate_minimal_trees(2, 2, bit_alphabet(2))
    build_root_table(cat)
    return cat


def test_root_table_examples(d2_catalog):
    cat = d2_catalog
    p3 = L((0,), (L((1,)), L((1,)))).sorted()
    idx = cat.index(p3)
    assert cat.root_table[(idx, 2, (1,), (1,), True)] == frozenset({(0,)})
    single = cat.index(L((0,)))
    assert cat.root_table[(single, 1, (0,), (0,), True)] == frozenset({(0,)})
    pair = cat.index(L((0,), (L((0,)),)))
    assert cat.root_table[(pair, 1, (0,), (0,), False)] is None


def test_root_table_matches_static_oracle(d2_catalog):
    cat = d2_catalog
    for (idx, t, la, lb, same), roots in cat.root_table.items():
        tree = cat.entries[idx].sorted()
        nodes = tree.nodes()
        g = decode(tree, strict=False)
        a, b = next((a, b) for a, b in placements(tree, {"a", "b"})
                    if nodes[a][0].label == la and nodes[b][0].label == lb and (a == b) == same)
        if a != b:
            g.set_edge(a, b, True)
        ok = {nodes[z][0].label for z in g.vertices() if rooted_tree_depth(g, z) <= t}
        assert (roots or frozenset()) == ok


def test_sat_table_examples():
    chain = L((0, 0), (L((1, 0), (L((1, 1)),)),))
    flat = L((0, 0), (L((0, 0)), L((0, 0))))
    cat = MinimalTreeCatalog(3, 1, bit_alphabet(3), [chain, flat])
    assert build_sat_table(cat, parse("exists x . x = x")) == {0: True, 1: True}
    assert build_sat_table(cat, build_gamma()) == {0: True, 1: False}
    assert build_sat_table(cat, parse("exists x . exists y . edge(x,y)"))[0]
    with pytest.raises(ValueError):
        build_sat_table(cat, parse("exists x . x = a"))


def test_catalog_round_trip(tmp_path, d2_catalog):
    cat = d2_catalog
    build_sat_table(cat, build_gamma())
    key = save_catalog(cat, tmp_path / "c.json")
    back = load_catalog(tmp_path / "c.json", expect_key=key)
    assert [t.key for t in back.entries] == [t.key for t in cat.entries]
    assert back.root_table == cat.root_table
    assert back.sat_table == cat.sat_table
    with pytest.raises(ValueError):
        load_catalog(tmp_path / "c.json", expect_key="nope")


def test_label_catalog_interning_and_kernel():
    cat = LabelCatalog(2, 2, build_gamma())
    leaf = cat.label_of(1, {})
    star = cat.label_of(0, {leaf: 7})
    assert cat.label_of(0, {leaf: 3}) == star
    assert cat.label_of(0, {leaf: 1}) != star
    assert cat.kernel(star).size == 3
    assert cat.height[star] == 2 and cat.mask[star] == 0 and cat.mask[leaf] == 1
    assert cat.forest_answer({star: 1}) is True
    assert cat.forest_answer({star: 5}) is False


def test_label_catalog_round_trip(tmp_path):
    cat = LabelCatalog(2, 2, build_gamma())
    leaf = cat.label_of(1, {})
    cat.forest_answer({cat.label_of(0, {leaf: 2}): 1})
    cat.root_memo[(b"(key)", 2)] = 0
    key = cat.save(tmp_path / "l.json")
    back = LabelCatalog.load(tmp_path / "l.json", build_gamma(), expect_key=key)
    assert back.bits == cat.bits and back.kids == cat.kids
    assert back.forest_memo == cat.forest_memo and back.root_memo == cat.root_memo
    with pytest.raises(ValueError):
        LabelCatalog.load(tmp_path / "l.json", parse("exists x . x = x"))


def test_label_catalog_rejects_constants():
    with pytest.raises(ValueError):
        LabelCatalog(2, 1, parse("exists x . x = a"))
