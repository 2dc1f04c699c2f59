"""Limb threshold, minimal-tree catalogs and their lookup tables.

Tree labels are 0-1 tuples of length D-1 where position ``i`` records the edge
to the ancestor ``i + 1`` levels up (position 0 is the parent). A tree whose
root label is ``None`` is a forest under a virtual root that is not a vertex.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Optional, Sequence

from .errors import (
    CatalogBudgetExceeded,
    InconsistentLabel,
    ValidationBudgetExceeded,
)
from .graph import DynamicGraph
from .mso import (
    ROOT_VAR,
    ConstantAssignment,
    Formula,
    build_tau_prime,
    build_tau_prime_rooted,
    constants_used,
    evaluate,
    quantifier_rank,
    to_text,
)
from .static import LabelledTree

DEFAULT_CATALOG_BUDGET = 200_000


def bit_alphabet(D: int) -> list[tuple[int, ...]]:
    """All ancestor-bit vectors of length D-1."""
    return [tuple(bits) for bits in itertools.product((0, 1), repeat=max(D - 1, 0))]


def _bits_of(label: Hashable) -> tuple:
    if isinstance(label, tuple) and label and isinstance(label[0], tuple):
        return label[0]
    if isinstance(label, tuple):
        return label
    return ()


def decode(tree: LabelledTree, strict: bool = True) -> DynamicGraph:
    """Graph encoded by the ancestor bits; vertex ids are preorder positions.

    Bits pointing above the tree root are an error when ``strict`` and are
    dropped otherwise (they describe edges leaving the tree).
    """
    nodes = tree.nodes()
    virtual = tree.label is None
    parents = [p for _, _, p in nodes]
    g = DynamicGraph()
    for i in range(1 if virtual else 0, len(nodes)):
        g.ensure_vertex(i)
    for i, (t, depth, _) in enumerate(nodes):
        if virtual and i == 0:
            continue
        level = depth - 1 if virtual else depth
        anc = parents[i]
        for k, bit in enumerate(_bits_of(t.label)):
            if not bit:
                if anc is not None:
                    anc = parents[anc]
                continue
            if k >= level:
                if strict:
                    raise InconsistentLabel(f"vertex {i} has a bit for missing ancestor {k + 1}")
                continue
            g.set_edge(i, anc, True)
            anc = parents[anc]
    return g


def induced(graph: DynamicGraph, keep: Iterable[int]) -> DynamicGraph:
    keep = set(keep)
    return DynamicGraph.from_edges(((u, v) for u, v in graph.edges() if u in keep and v in keep), keep)


# -- enumeration -------------------------------------------------------------


def _multisets(classes: Sequence[LabelledTree], bound: int, room: Optional[int]):
    """Child tuples using each class at most ``bound`` times, total size <= room."""

    def rec(i, room):
        yield ()
        for j in range(i, len(classes)):
            c = classes[j]
            for k in range(1, bound + 1):
                used = k * c.size
                if room is not None and used > room:
                    break
                for rest in rec(j + 1, None if room is None else room - used):
                    yield (c,) * k + rest

    yield from rec(0, room)


def all_trees(D: int, bound: int, alphabet: Sequence[Hashable], max_size: Optional[int] = None,
              budget: int = DEFAULT_CATALOG_BUDGET) -> list[LabelledTree]:
    """Every labelled tree of depth <= D with at most ``bound`` isomorphic limbs
    per vertex (and at most ``max_size`` vertices), sorted by canonical key."""
    if D < 1:
        return []
    trees = sorted((LabelledTree(l) for l in alphabet), key=lambda t: t.key)
    for _ in range(D - 1):
        if max_size is None and len(alphabet) * (bound + 1) ** len(trees) > budget:
            raise CatalogBudgetExceeded(f"more than {budget} trees at this depth")
        out = {}
        for label in alphabet:
            room = None if max_size is None else max_size - 1
            for kids in _multisets(trees, bound, room):
                t = LabelledTree(label, kids)
                out[t.key] = t
                if len(out) > budget:
                    raise CatalogBudgetExceeded(f"more than {budget} trees")
        trees = sorted(out.values(), key=lambda t: t.key)
    return trees


@dataclass
class MinimalTreeCatalog:
    D: int
    S: int
    alphabet: list
    entries: list[LabelledTree]
    root_table: dict = field(default_factory=dict)
    sat_table: dict = field(default_factory=dict)
    formulas: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def index(self, tree: LabelledTree) -> int:
        key = tree.key
        for i, t in enumerate(self.entries):
            if t.key == key:
                return i
        raise KeyError("tree not in catalog")

    def cache_key(self) -> str:
        return content_key(self.D, self.formulas, self.S)


def enumerate_minimal_trees(D: int, S: int, alphabet: Sequence[Hashable],
                            budget: int = DEFAULT_CATALOG_BUDGET) -> MinimalTreeCatalog:
    if D < 1 or S < 1:
        raise ValueError("need D >= 1 and S >= 1")
    entries = all_trees(D, S, alphabet, budget=budget)
    return MinimalTreeCatalog(D, S, list(alphabet), entries)


def max_isomorphic_limbs(tree: LabelledTree) -> int:
    best = 0
    stack = [tree]
    while stack:
        t = stack.pop()
        counts: dict = {}
        for c in t.children:
            counts[c.key] = counts.get(c.key, 0) + 1
            stack.append(c)
        best = max([best, *counts.values()])
    return best


# -- constant placements -----------------------------------------------------


def placements(tree: LabelledTree, uses: set[str]) -> list[tuple[Optional[int], Optional[int]]]:
    """Constant placements by label class, canonically-first representative.

    ``tree`` must already be in canonical order; positions are preorder indices.
    """
    first: dict = {}
    second: dict = {}
    for i, (t, _, _) in enumerate(tree.nodes()):
        if t.label is None:
            continue
        if t.label not in first:
            first[t.label] = i
        elif t.label not in second:
            second[t.label] = i
    reps = list(first.values())
    if not uses:
        return [(None, None)]
    if uses == {"a"}:
        return [(i, None) for i in reps]
    if uses == {"b"}:
        return [(None, i) for i in reps]
    out = [(i, i) for i in reps]
    for la, lb in itertools.product(first, repeat=2):
        ia = first[la]
        ib = first[lb] if la != lb else second.get(lb)
        if ib is not None:
            out.append((ia, ib))
    return out


def _assignment(a: Optional[int], b: Optional[int]) -> ConstantAssignment:
    return ConstantAssignment(a, b)


# -- limb threshold ----------------------------------------------------------


@dataclass
class LimbThreshold:
    S: int
    seed: int
    validated: bool
    tried: list[int] = field(default_factory=list)
    checked_trees: int = 0


def _forest_variants(trees: list[LabelledTree], S: int, cap: int) -> list[LabelledTree]:
    leaves = [t for t in trees if t.size == 1]
    out = []
    for t in trees:
        if t.size * (S + 1) > cap:
            continue
        out.append(LabelledTree(None, (t,) * (S + 1)))
        for leaf in leaves:
            if t.size * (S + 1) + 1 <= cap:
                out.append(LabelledTree(None, (t,) * (S + 1) + (leaf,)))
    return out


def verify_limb_threshold(S: int, phi: Formula, trees: Iterable[LabelledTree],
                          forests: bool = False, cap: int = 16) -> bool:
    """Deleting one of more than S pairwise isomorphic limbs never changes phi.

    Constants are placed by label class; limbs holding a constant are never
    deleted. With ``forests`` the same is checked for isomorphic components.
    """
    uses = constants_used(phi)
    pool = [t for t in trees if t.size <= cap]
    if forests:
        pool += _forest_variants(pool, S, cap)
    for tree in pool:
        tree = tree.sorted()
        nodes = tree.nodes()
        graph = decode(tree, strict=False)
        size = [t.size for t, _, _ in nodes]
        for a, b in placements(tree, uses):
            marked = {i for i in (a, b) if i is not None}
            base = None
            for x, (t, _, _) in enumerate(nodes):
                groups: dict = {}
                child = x + 1
                for c in t.children:
                    span = range(child, child + size[child])
                    if not marked.intersection(span):
                        groups.setdefault(c.key, []).append(span)
                    child += size[child]
                for spans in groups.values():
                    if len(spans) <= S:
                        continue
                    if base is None:
                        base = evaluate(graph, phi, _assignment(a, b), cap=cap)
                    keep = set(graph) - set(spans[-1])
                    if evaluate(induced(graph, keep), phi, _assignment(a, b), cap=cap) != base:
                        return False
    return True


def compute_limb_threshold(phi: Formula, alphabet: Sequence[Hashable], D: int, max_size: int = 6,
                           cap: int = 64, forests: bool = False) -> LimbThreshold:
    """Smallest power of two S that passes validation on trees of at most
    ``max_size`` vertices; 2**q + q (q = quantifier rank) is kept as the seed."""
    if D < 1:
        raise ValueError("D must be positive")
    q = quantifier_rank(phi)
    seed = 2 ** q + q
    tried = []
    S = 1
    while S <= cap:
        tried.append(S)
        trees = all_trees(D, S + 1, alphabet, max_size=max_size)
        if verify_limb_threshold(S, phi, trees, forests=forests, cap=max(16, max_size * (S + 2))):
            return LimbThreshold(S, seed, True, tried, len(trees))
        S *= 2
    raise ValidationBudgetExceeded(f"no S <= {cap} validated")


# -- tables ------------------------------------------------------------------


def build_root_table(catalog: MinimalTreeCatalog, D: Optional[int] = None) -> dict:
    """(entry, t, label of a, label of b, a is b) -> labels that can be root.

    An infeasible combination maps to None and is kept in the table.
    """
    D = catalog.D if D is None else D
    table: dict = {}
    for idx, entry in enumerate(catalog.entries):
        tree = entry.sorted()
        nodes = tree.nodes()
        graph = decode(tree, strict=False)
        for t in range(1, D + 1):
            f = build_tau_prime_rooted(t)
            for a, b in placements(tree, {"a", "b"}):
                labels = set()
                for z in graph.vertices():
                    if nodes[z][0].label in labels:
                        continue
                    if evaluate(graph, f, ConstantAssignment(a, b), {ROOT_VAR: z}):
                        labels.add(nodes[z][0].label)
                key = (idx, t, nodes[a][0].label, nodes[b][0].label, a == b)
                table[key] = frozenset(labels) if labels else None
    catalog.root_table = table
    if not catalog.formulas:
        catalog.formulas = [to_text(build_tau_prime(D))]
    return table


def build_sat_table(catalog: MinimalTreeCatalog, phi_user: Formula) -> dict:
    if constants_used(phi_user):
        raise ValueError("the query formula may not use constants")
    table = {i: evaluate(decode(t, strict=False), phi_user) for i, t in enumerate(catalog.entries)}
    catalog.sat_table = table
    text = to_text(phi_user)
    if text not in catalog.formulas:
        catalog.formulas.append(text)
    return table


# -- persistence -------------------------------------------------------------


def content_key(D: int, formula_texts: Sequence[str], S: int) -> str:
    blob = json.dumps({"D": D, "formulas": list(formula_texts), "S": S}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _tree_to_json(t: LabelledTree):
    return [_jsonable(t.label), [_tree_to_json(c) for c in t.children]]


def _tree_from_json(obj) -> LabelledTree:
    return LabelledTree(_tupled(obj[0]), tuple(_tree_from_json(c) for c in obj[1]))


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    if isinstance(x, frozenset):
        return sorted(_jsonable(y) for y in x)
    return x


def _tupled(x):
    if isinstance(x, list):
        return tuple(_tupled(y) for y in x)
    return x


def save_catalog(catalog: MinimalTreeCatalog, path: Path) -> str:
    key = catalog.cache_key()
    doc = {
        "format": "dyntd-minimal-catalog/1",
        "key": key,
        "D": catalog.D,
        "S": catalog.S,
        "alphabet": _jsonable(catalog.alphabet),
        "formulas": catalog.formulas,
        "entries": [_tree_to_json(t) for t in catalog.entries],
        "root_table": [[_jsonable(list(k)), None if v is None else _jsonable(sorted(v))]
                       for k, v in sorted(catalog.root_table.items(), key=repr)],
        "sat_table": [[k, v] for k, v in sorted(catalog.sat_table.items())],
    }
    Path(path).write_text(json.dumps(doc))
    return key


def load_catalog(path: Path, expect_key: Optional[str] = None) -> MinimalTreeCatalog:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "dyntd-minimal-catalog/1":
        raise ValueError("not a minimal-tree catalog file")
    if expect_key is not None and doc["key"] != expect_key:
        raise ValueError("catalog cache key mismatch")
    cat = MinimalTreeCatalog(
        doc["D"], doc["S"], [_tupled(a) for a in doc["alphabet"]],
        [_tree_from_json(e) for e in doc["entries"]], formulas=doc["formulas"],
    )
    cat.root_table = {_tupled(k): None if v is None else frozenset(_tupled(v)) for k, v in doc["root_table"]}
    cat.sat_table = {k: v for k, v in doc["sat_table"]}
    return cat


# -- lazily populated catalog for the live structure --------------------------


class LabelCatalog:
    """Interned cabinet labels plus memoised answers keyed by them.

    A label is (ancestor bits as an int, sorted tuple of (child label,
    min(S, count))). It names exactly one minimal tree, so label ids double as
    catalog identities; they are dense and assigned in discovery order.
    """

    def __init__(self, D: int, S: int, phi_user: Optional[Formula] = None, eval_cap: int = 16,
                 thresholds: Optional[dict] = None, budget: Optional[int] = None):
        if D < 1 or S < 1:
            raise ValueError("need D >= 1 and S >= 1")
        if phi_user is not None and constants_used(phi_user):
            raise ValueError("the query formula may not use constants")
        self.D = D
        self.S = S
        self.phi_user = phi_user
        self.eval_cap = eval_cap
        self.thresholds = dict(thresholds or {})
        self.budget = budget
        self._ids: dict[tuple, int] = {}
        self.bits: list[int] = []
        self.kids: list[tuple] = []
        self.height: list[int] = []
        self.mask: list[int] = []
        self._kernels: dict[int, LabelledTree] = {}
        self.forest_memo: dict[frozenset, bool] = {}
        self.root_memo: dict[tuple, Optional[tuple]] = {}
        self.forest_evaluations = 0

    def __len__(self) -> int:
        return len(self.bits)

    def intern(self, bits: int, kids: tuple) -> int:
        key = (bits, kids)
        got = self._ids.get(key)
        if got is not None:
            return got
        i = len(self.bits)
        if self.budget is not None and i >= self.budget:
            raise CatalogBudgetExceeded(f"more than {self.budget} labels")
        self._ids[key] = i
        self.bits.append(bits)
        self.kids.append(kids)
        self.height.append(1 + max((self.height[k] for k, _ in kids), default=0))
        m = bits
        for k, _ in kids:
            m |= self.mask[k] >> 1
        self.mask.append(m)
        return i

    def label_of(self, bits: int, counts: Mapping[int, int]) -> int:
        S = self.S
        return self.intern(bits, tuple(sorted((k, min(S, c)) for k, c in counts.items() if c > 0)))

    def bits_tuple(self, bits: int) -> tuple[int, ...]:
        return tuple(bits >> i & 1 for i in range(self.D - 1))

    def kernel(self, label: int) -> LabelledTree:
        got = self._kernels.get(label)
        if got is None:
            kids = tuple(c for k, n in self.kids[label] for c in (self.kernel(k),) * n)
            got = LabelledTree(self.bits_tuple(self.bits[label]), kids)
            self._kernels[label] = got
        return got

    def forest_key(self, root_counts: Mapping[int, int]) -> frozenset:
        return frozenset((k, min(self.S, c)) for k, c in root_counts.items() if c > 0)

    def forest_answer(self, root_counts: Mapping[int, int]) -> Optional[bool]:
        """phi_user on the forest of component kernels, capped at S per kind."""
        if self.phi_user is None:
            return None
        key = self.forest_key(root_counts)
        got = self.forest_memo.get(key)
        if got is None:
            kids = tuple(t for k, n in sorted(key) for t in (self.kernel(k),) * n)
            graph = decode(LabelledTree(None, kids), strict=False)
            got = evaluate(graph, self.phi_user, cap=self.eval_cap)
            self.forest_memo[key] = got
            self.forest_evaluations += 1
        return got

    def cache_key(self) -> str:
        texts = [to_text(self.phi_user)] if self.phi_user is not None else []
        return content_key(self.D, texts, self.S)

    def save(self, path: Path) -> str:
        key = self.cache_key()
        doc = {
            "format": "dyntd-label-catalog/1",
            "key": key,
            "D": self.D,
            "S": self.S,
            "alphabet": _jsonable(bit_alphabet(self.D)),
            "formulas": [to_text(self.phi_user)] if self.phi_user is not None else [],
            "thresholds": self.thresholds,
            "entries": [[b, _jsonable(k)] for b, k in zip(self.bits, self.kids)],
            "sat_table": [[_jsonable(sorted(k)), v] for k, v in sorted(self.forest_memo.items(), key=lambda kv: sorted(kv[0]))],
            "root_table": [[[k.decode("latin-1"), t], v] for (k, t), v in sorted(self.root_memo.items())],
        }
        Path(path).write_text(json.dumps(doc))
        return key

    @classmethod
    def load(cls, path: Path, phi_user: Optional[Formula], eval_cap: int = 16,
             expect_key: Optional[str] = None, budget: Optional[int] = None) -> LabelCatalog:
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != "dyntd-label-catalog/1":
            raise ValueError("not a label catalog file")
        if expect_key is not None and doc["key"] != expect_key:
            raise ValueError("catalog cache key mismatch")
        cat = cls(doc["D"], doc["S"], phi_user, eval_cap, doc.get("thresholds"), budget)
        if cat.cache_key() != doc["key"]:
            raise ValueError("catalog was built for a different formula")
        for bits, kids in doc["entries"]:
            cat.intern(bits, tuple(tuple(k) for k in kids))
        cat.forest_memo = {frozenset(tuple(p) for p in k): v for k, v in doc["sat_table"]}
        cat.root_memo = {_rootkey(k): v for k, v in doc["root_table"]}
        return cat


def _rootkey(k):
    key, t = k
    return (key.encode("latin-1"), t)


def live_threshold(D: int, phi_user: Optional[Formula], max_size: int = 5, cap: int = 64) -> tuple[int, dict]:
    """S for the live structure: the larger of the thresholds validated for
    tau'_t (every t <= D) and for the query formula, components included."""
    alphabet = bit_alphabet(D)
    found = {}
    for t in range(1, D + 1):
        found[f"tau_prime_{t}"] = compute_limb_threshold(build_tau_prime(t), alphabet, D, max_size, cap).S
    if phi_user is not None:
        found["query"] = compute_limb_threshold(phi_user, alphabet, D, max_size, cap, forests=True).S
    return max(found.values()), found
