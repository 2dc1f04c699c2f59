"""Compressed tree-depth decomposition maintained under graph updates.

Every vertex sits in a drawer: the children of one parent that carry the same
label. Cabinets are the classes obtained by merging, level by level, the
drawers whose parents share a cabinet and whose labels agree, so a cabinet is
identified by the label path from its root. Labels are interned in a
:class:`LabelCatalog`; ancestor bits are stored relative to the parent
(bit ``k`` is the edge to the ancestor ``k + 1`` levels up).

Between public operations the forest is in connected normal form: every
subtree induces a connected subgraph, so each root tree is one component.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from .errors import (
    DepthExceeded,
    DepthWouldExceed,
    EdgeExists,
    Infeasible,
    InvalidDepth,
    InvariantViolation,
    NoRootWitness,
    NoSuchEdge,
    NotIsolated,
    NotPresent,
    SelfLoop,
    VertexExists,
    VertexSetMismatch,
)
from .graph import DynamicGraph, VertexId
from .minimal import LabelCatalog, decode, live_threshold
from .mso import Formula, to_text
from .static import LabelledTree, RootedForest, is_valid_decomposition, rooted_tree_depths

# delete_edge may touch at most WORK_C1 * D cabinets
WORK_C1 = 6


class _Drawer:
    __slots__ = ("label", "parent", "members", "public")

    def __init__(self, label: int, parent: Optional[VertexId], public: bool):
        self.label = label
        self.parent = parent
        self.members: dict[VertexId, None] = {}
        self.public = public

    @property
    def cardinality(self) -> int:
        return len(self.members)

    def first(self) -> VertexId:
        return next(iter(self.members))


@dataclass
class Counters:
    cabinets_touched: int = 0
    reroot_depth: int = 0
    path_length: int = 0
    splits: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExtractionRecord:
    path: list[VertexId] = field(default_factory=list)  # bottom-up, ends at the root
    split: list[VertexId] = field(default_factory=list)  # vertices taken out of shared drawers


@dataclass
class CabinetView:
    label: int
    drawers: list[tuple[Optional[VertexId], tuple[VertexId, ...]]]
    parent: Optional[int]
    children: list[int] = field(default_factory=list)
    dirty: bool = False

    @property
    def size(self) -> int:
        return sum(len(m) for _, m in self.drawers)


_THRESHOLDS: dict = {}


def build_catalog(D: int, phi_user: Optional[Formula] = None, S: Optional[int] = None,
                  max_size: Optional[int] = None, eval_cap: int = 32,
                  budget: Optional[int] = None) -> LabelCatalog:
    """Fresh live catalog; S defaults to the validated threshold (memoised per process)."""
    if D < 1:
        raise InvalidDepth(f"D must be positive, got {D}")
    found: dict = {}
    if S is None:
        size = max_size if max_size is not None else (5 if D <= 3 else 4)
        key = (D, to_text(phi_user) if phi_user is not None else None, size)
        if key not in _THRESHOLDS:
            _THRESHOLDS[key] = live_threshold(D, phi_user, size)
        S, found = _THRESHOLDS[key]
    return LabelCatalog(D, S, phi_user, eval_cap, found, budget)


def _dec(counts: dict, key, n: int = 1) -> None:
    left = counts[key] - n
    if left:
        counts[key] = left
    else:
        del counts[key]


class DynamicDecomposition:
    def __init__(self, D: int, phi_user: Optional[Formula] = None, catalog: Optional[LabelCatalog] = None,
                 S: Optional[int] = None):
        if D < 1:
            raise InvalidDepth(f"D must be positive, got {D}")
        if catalog is None:
            catalog = build_catalog(D, phi_user, S)
        if catalog.D != D:
            raise ValueError("catalog was built for a different depth bound")
        self.D = D
        self.catalog = catalog
        self.graph = DynamicGraph()
        self._drawer: dict[VertexId, _Drawer] = {}
        self._kids: dict[VertexId, dict[int, _Drawer]] = {}
        self._priv: dict[VertexId, dict[_Drawer, None]] = {}
        self._kidcount: dict[VertexId, dict[int, int]] = {}
        self._roots: dict[VertexId, None] = {}
        self._rootcount: dict[int, int] = {}
        self._shift_memo: dict[tuple, int] = {}
        self._fits_memo: dict = {}
        self._pending: Optional[tuple[VertexId, VertexId]] = None
        self._level = 0
        self.last = Counters()
        self._answer = catalog.forest_answer(self._rootcount)

    # -- construction ------------------------------------------------------

    @classmethod
    def initialize(cls, graph: DynamicGraph, D: int, phi_user: Optional[Formula] = None,
                   catalog: Optional[LabelCatalog] = None, S: Optional[int] = None) -> DynamicDecomposition:
        self = cls(D, phi_user, catalog, S)
        self.graph = graph.copy()
        for v in self.graph.vertices():
            self._records(v)
        self._fits_memo = {}
        for comp in self.graph.components():
            plan: dict = {}
            if not self._plan_rec(comp, D, None, None, plan, None):
                raise DepthExceeded(f"no decomposition of depth <= {D} for component of {min(comp)}")
            self._materialize(plan)
        self._fits_memo = {}
        self._refresh_answer()
        return self

    @classmethod
    def from_forest(cls, graph: DynamicGraph, forest: RootedForest, D: int, phi_user: Optional[Formula] = None,
                    catalog: Optional[LabelCatalog] = None, S: Optional[int] = None) -> DynamicDecomposition:
        """Compress a given decomposition. Every subtree must induce a connected subgraph."""
        if forest.vertices() != set(graph):
            raise VertexSetMismatch("forest and graph have different vertices")
        if not is_valid_decomposition(graph, forest, D):
            raise DepthExceeded(f"forest is not a valid depth-{D} decomposition")
        self = cls(D, phi_user, catalog, S)
        self.graph = graph.copy()
        for v in self.graph.vertices():
            self._records(v)
        self._materialize(dict(forest.parent))
        mask = self.catalog.mask
        for v, d in self._drawer.items():
            if d.parent is not None and not mask[d.label] & 1:
                raise ValueError(f"subtree of {v} is not connected to its parent")
        self._refresh_answer()
        return self

    def _records(self, v: VertexId) -> None:
        self._kids[v] = {}
        self._priv[v] = {}
        self._kidcount[v] = {}

    # -- small accessors ---------------------------------------------------

    def parent(self, v: VertexId) -> Optional[VertexId]:
        try:
            return self._drawer[v].parent
        except KeyError:
            raise NotPresent(v) from None

    def label(self, v: VertexId) -> int:
        return self._drawer[v].label

    def bits(self, v: VertexId) -> int:
        return self.catalog.bits[self._drawer[v].label]

    def root_of(self, v: VertexId) -> VertexId:
        p = self.parent(v)
        while p is not None:
            v, p = p, self._drawer[p].parent
        return v

    def roots(self) -> list[VertexId]:
        return list(self._roots)

    def children(self, v: VertexId) -> list[VertexId]:
        return [y for d in self._child_drawers(v) for y in d.members]

    def _child_drawers(self, v: VertexId) -> list[_Drawer]:
        return [*self._kids[v].values(), *self._priv[v]]

    def _distance_up(self, v: VertexId, target: VertexId) -> Optional[int]:
        """Steps from ``v`` up to its ancestor ``target``; at most D walks."""
        x, k = self._drawer[v].parent, 1
        while x is not None and k < self.D:
            if x == target:
                return k
            x, k = self._drawer[x].parent, k + 1
        return None

    def _subtree(self, v: VertexId) -> list[VertexId]:
        out, stack = [], [v]
        while stack:
            x = stack.pop()
            out.append(x)
            stack.extend(reversed(self.children(x)))
        return out

    # -- drawer bookkeeping ------------------------------------------------

    def _attach(self, x: VertexId, p: Optional[VertexId], L: int, public: bool = True) -> None:
        if p is None:
            d = _Drawer(L, None, False)
            self._roots[x] = None
            self._rootcount[L] = self._rootcount.get(L, 0) + 1
        else:
            d = self._kids[p].get(L) if public else None
            if d is None:
                d = _Drawer(L, p, public)
                if public:
                    self._kids[p][L] = d
                else:
                    self._priv[p][d] = None
            kc = self._kidcount[p]
            kc[L] = kc.get(L, 0) + 1
        d.members[x] = None
        self._drawer[x] = d

    def _detach(self, x: VertexId) -> None:
        d = self._drawer.pop(x)
        del d.members[x]
        if d.parent is None:
            del self._roots[x]
            _dec(self._rootcount, d.label)
            return
        _dec(self._kidcount[d.parent], d.label)
        if not d.members:
            if d.public:
                del self._kids[d.parent][d.label]
            else:
                del self._priv[d.parent][d]

    def _privatize(self, x: VertexId) -> bool:
        d = self._drawer[x]
        if d.parent is None or not d.public:
            return False
        p = d.parent
        if len(d.members) == 1:
            d.public = False
            del self._kids[p][d.label]
            self._priv[p][d] = None
            return False
        del d.members[x]
        nd = _Drawer(d.label, p, False)
        nd.members[x] = None
        self._drawer[x] = nd
        self._priv[p][nd] = None
        return True

    def _relabel(self, x: VertexId, L: int) -> bool:
        d = self._drawer[x]
        old = d.label
        if old == L:
            return False
        if d.public:
            raise InvariantViolation(f"relabelling {x} inside a shared drawer")
        counts = self._rootcount if d.parent is None else self._kidcount[d.parent]
        _dec(counts, old)
        counts[L] = counts.get(L, 0) + 1
        d.label = L
        return True

    def _publish(self, x: VertexId) -> None:
        d = self._drawer[x]
        if d.public or d.parent is None:
            return
        p = d.parent
        del self._priv[p][d]
        into = self._kids[p].get(d.label)
        if into is None:
            d.public = True
            self._kids[p][d.label] = d
        else:
            into.members[x] = None
            self._drawer[x] = into

    # -- extraction and cleanup --------------------------------------------

    def extract_path(self, v: VertexId) -> ExtractionRecord:
        """Give every vertex on the root-to-v path a drawer of its own."""
        if v not in self._drawer:
            raise NotPresent(v)
        path = [v]
        p = self._drawer[v].parent
        while p is not None:
            path.append(p)
            p = self._drawer[p].parent
        split = [x for x in path if self._privatize(x)]
        self.last.path_length = len(path) - 1
        self.last.splits += len(split)
        self.last.cabinets_touched += len(path)
        return ExtractionRecord(path, split)

    def clean_dirty(self, record: ExtractionRecord) -> None:
        for x in record.path:
            d = self._drawer.get(x)
            if d is not None and not d.public and d.parent is not None:
                self._publish(x)
                self.last.cabinets_touched += 1

    def _repair(self, path: list[VertexId], bits: dict[VertexId, int]) -> None:
        """Relabel the extracted path bottom-up, moving limbs that lost their
        edge to the parent under the lowest ancestor they still see."""
        cat = self.catalog
        for x in path:
            b = bits.get(x, cat.bits[self._drawer[x].label])
            L = cat.label_of(b, self._kidcount[x])
            if self._relabel(x, L):
                self.last.cabinets_touched += 1
            p = self._drawer[x].parent
            if p is None:
                break
            m = cat.mask[L]
            if not m & 1:
                self._relocate(x, m)

    def _relocate(self, x: VertexId, m: int) -> None:
        if m == 0:
            L = self._drawer[x].label
            self._detach(x)
            self._attach(x, None, L)
            return
        gap = (m & -m).bit_length() - 1
        target = x
        for _ in range(gap + 1):
            target = self._drawer[target].parent
        L = self._shift_limb(x, gap)
        self._detach(x)
        self._attach(x, target, L, public=False)

    def _shift(self, L: int, h: int, gap: int) -> int:
        """Label after removing ``gap`` empty ancestor levels above height ``h``."""
        key = (L, h, gap)
        got = self._shift_memo.get(key)
        if got is None:
            cat = self.catalog
            b = cat.bits[L]
            if (b >> h) & ((1 << gap) - 1):
                raise InvariantViolation("shifting over a present ancestor edge")
            nb = (b & ((1 << h) - 1)) | ((b >> (h + gap)) << h)
            counts: dict[int, int] = {}
            for k, n in cat.kids[L]:
                nk = self._shift(k, h + 1, gap)
                counts[nk] = counts.get(nk, 0) + n
            got = cat.label_of(nb, counts)
            self._shift_memo[key] = got
        return got

    def _shift_limb(self, x: VertexId, gap: int) -> int:
        cat = self.catalog
        touched: set = set()

        def walk(y: VertexId, h: int, path: tuple) -> None:
            changed = False
            for d in self._child_drawers(y):
                if cat.mask[d.label] >> (h + 1) == 0:
                    continue
                key = path + (d.label,)
                touched.add(key)
                for z in d.members:
                    walk(z, h + 1, key)
                changed = True
            if changed:
                self._rekey(y, h + 1, gap)

        walk(x, 0, ())
        self.last.cabinets_touched += len(touched)
        return self._shift(self._drawer[x].label, 0, gap)

    def _rekey(self, y: VertexId, h: int, gap: int) -> None:
        """Apply the shift to every child drawer of ``y`` and re-merge them."""
        cat = self.catalog
        public: dict[int, _Drawer] = {}
        counts: dict[int, int] = {}
        for d in list(self._kids[y].values()):
            if cat.mask[d.label] >> h:
                d.label = self._shift(d.label, h, gap)
            into = public.get(d.label)
            if into is None:
                public[d.label] = d
            else:
                for z in d.members:
                    into.members[z] = None
                    self._drawer[z] = into
            counts[d.label] = counts.get(d.label, 0) + len(d.members)
        for d in self._priv[y]:
            if cat.mask[d.label] >> h:
                d.label = self._shift(d.label, h, gap)
            counts[d.label] = counts.get(d.label, 0) + len(d.members)
        self._kids[y] = public
        self._kidcount[y] = counts

    # -- answers -----------------------------------------------------------

    def _refresh_answer(self) -> None:
        self._answer = self.catalog.forest_answer(self._rootcount)

    def query(self) -> Optional[bool]:
        """Cached answer; no traversal of the structure."""
        self.last = Counters()
        return self._answer

    # -- isolated vertices -------------------------------------------------

    def add_isolated_vertex(self, v: Optional[VertexId] = None) -> VertexId:
        self.last = Counters()
        if v is None:
            v = self.graph.add_vertex()
        elif v in self.graph:
            raise VertexExists(v)
        else:
            self.graph.ensure_vertex(v)
        self._records(v)
        self._attach(v, None, self.catalog.label_of(0, {}))
        self.last.cabinets_touched = 1
        self._refresh_answer()
        return v

    def remove_isolated_vertex(self, v: VertexId) -> None:
        self.last = Counters()
        if v not in self.graph:
            raise NotPresent(v)
        if self.graph.degree(v):
            raise NotIsolated(v)
        if self._drawer[v].parent is not None or self.children(v):
            raise InvariantViolation(f"isolated vertex {v} is not a lone root")
        self._detach(v)
        del self._kids[v], self._priv[v], self._kidcount[v]
        self.graph.remove_vertex(v)
        self.last.cabinets_touched = 1
        self._refresh_answer()

    # -- edge deletion -----------------------------------------------------

    def _ordered(self, u: VertexId, v: VertexId) -> tuple[VertexId, VertexId, Optional[int]]:
        """(ancestor, descendant, distance) or (u, v, None) when unrelated."""
        k = self._distance_up(v, u)
        if k is not None:
            return u, v, k
        k = self._distance_up(u, v)
        if k is not None:
            return v, u, k
        return u, v, None

    def _check_pair(self, u: VertexId, v: VertexId) -> None:
        for x in (u, v):
            if x not in self.graph:
                raise NotPresent(x)
        if u == v:
            raise SelfLoop(u)

    def delete_edge(self, u: VertexId, v: VertexId) -> None:
        self.last = Counters()
        self._check_pair(u, v)
        if not self.graph.has_edge(u, v):
            raise NoSuchEdge((u, v))
        u, v, k = self._ordered(u, v)
        if k is None:
            raise InvariantViolation(f"edge {u}-{v} is not covered by the decomposition")
        record = self.extract_path(v)
        self.graph.set_edge(u, v, False)
        self._repair(record.path, {v: self.bits(v) & ~(1 << (k - 1))})
        self.clean_dirty(record)
        self._refresh_answer()

    # -- edge insertion ----------------------------------------------------

    def insert_edge(self, u: VertexId, v: VertexId) -> None:
        self.last = Counters()
        self._check_pair(u, v)
        if self.graph.has_edge(u, v):
            raise EdgeExists((u, v))
        a, b, k = self._ordered(u, v)
        if k is not None:
            record = self.extract_path(b)
            self.graph.set_edge(a, b, True)
            self._repair(record.path, {b: self.bits(b) | 1 << (k - 1)})
            self.clean_dirty(record)
            self._refresh_answer()
            return
        ru, rv = self.root_of(u), self.root_of(v)
        roots = [ru] if ru == rv else sorted((ru, rv))
        try:
            r = self.find_root(roots, u, v, self.D)
        except Infeasible:
            raise DepthWouldExceed(f"inserting {u}-{v} needs depth > {self.D}") from None
        self._rebuild(roots, r, (u, v))
        self._refresh_answer()

    def reroot(self, new_root: VertexId) -> None:
        """Re-root the component of ``new_root`` there, keeping depth <= D."""
        self.last = Counters()
        if new_root not in self.graph:
            raise NotPresent(new_root)
        old = self.root_of(new_root)
        if old == new_root:
            return
        try:
            self._rebuild([old], new_root, None)
        except Infeasible:
            raise NoRootWitness(f"{new_root} cannot root a depth-{self.D} decomposition") from None
        self._refresh_answer()

    def _rebuild(self, roots: list[VertexId], r: VertexId, pending: Optional[tuple]) -> None:
        """Re-plan the trees under ``roots`` with ``r`` on top; the pending edge is
        added only once a plan exists, so failure leaves everything untouched."""
        old_parent: dict = {}
        K: set = set()
        for root in roots:
            for x in self._subtree(root):
                K.add(x)
                old_parent[x] = self._drawer[x].parent
        if pending is not None:
            self.graph.set_edge(*pending, True)
        self._pending = pending
        self._fits_memo = {}
        self._level = 1
        plan: dict = {}
        try:
            ok = self._plan_rec(K, self.D, None, r, plan, old_parent, level=1)
        finally:
            self._pending = None
            self._fits_memo = {}
        if not ok:
            if pending is not None:
                self.graph.set_edge(*pending, False)
                raise InvariantViolation(f"root table chose {r}, which admits no depth-{self.D} plan")
            raise Infeasible(r)
        self.last.reroot_depth = self._level
        for x in K:
            d = self._drawer.pop(x)
            if d.parent is None:
                del self._roots[x]
                _dec(self._rootcount, d.label)
            self._records(x)
        self._materialize(plan)
        self.last.cabinets_touched += sum(1 for c in self.cabinets(roots=[r]))

    # -- planning (static, used for initialisation and insertion) ----------

    def _old_root(self, C: set, t: int, old: Optional[dict]) -> Optional[VertexId]:
        """Root of the old forest restricted to C, if that is one tree of depth <= t."""
        if old is None:
            return None
        top, depth = None, 0
        for x in C:
            n = 0
            p = old[x]
            while p is not None:
                if p in C:
                    n += 1
                p = old[p]
            if n == 0:
                if top is not None:
                    return None
                top = x
            depth = max(depth, n + 1)
        if depth > t:
            return None
        if self._pending is not None:
            u, v = self._pending
            if u in C and v in C and not (_related(old, u, v) or _related(old, v, u)):
                return None
        return top

    def _order(self, C: set, old: Optional[dict]) -> list[VertexId]:
        g = self.graph

        def key(x):
            deg = sum(1 for y in g.neighbors(x) if y in C)
            return (-deg, x)

        return sorted(C, key=key)

    def _fits(self, C: frozenset, t: int) -> bool:
        """Exact test td(G[C]) <= t for connected C."""
        if len(C) <= t:
            return True
        if t <= 1:
            return False
        key = (C, t)
        got = self._fits_memo.get(key)
        if got is None:
            got = any(self._splits_into(C, r, t - 1) for r in self._order(C, None))
            self._fits_memo[key] = got
        return got

    def _splits_into(self, C, r: VertexId, t: int) -> bool:
        rest = set(C)
        rest.discard(r)
        return all(self._fits(frozenset(c), t) for c in self.graph.induced_components(rest))

    def _plan_rec(self, C: set, t: int, parent, forced, out: dict, old: Optional[dict], level: int = 0) -> bool:
        if t <= 0:
            return False
        r = forced
        if r is None:
            r = self._old_root(C, t, old)
        if r is None:
            level += 1
            self._level = max(self._level, level)
            r = next((x for x in self._order(C, old) if self._splits_into(C, x, t - 1)), None)
            if r is None:
                return False
        elif forced is not None and not self._splits_into(C, r, t - 1):
            return False
        out[r] = parent
        rest = set(C)
        rest.discard(r)
        for comp in self.graph.induced_components(rest):
            if not self._plan_rec(comp, t - 1, r, None, out, old, level):
                return False
        return True

    def _materialize(self, parent: dict) -> None:
        cat = self.catalog
        kids: dict = {v: [] for v in parent}
        for v in sorted(parent):
            if parent[v] is not None:
                kids[parent[v]].append(v)
        order: list = []
        anc: dict = {}
        for r in sorted(v for v, p in parent.items() if p is None):
            anc[r] = ()
            stack = [r]
            while stack:
                x = stack.pop()
                order.append(x)
                if len(anc[x]) >= self.D:
                    raise DepthExceeded(f"plan puts {x} below depth {self.D}")
                for c in reversed(kids[x]):
                    anc[c] = (x,) + anc[x]
                    stack.append(c)
        label: dict = {}
        for x in reversed(order):
            b = 0
            for k, a in enumerate(anc[x]):
                if self.graph.has_edge(x, a):
                    b |= 1 << k
            counts: dict = {}
            for c in kids[x]:
                counts[label[c]] = counts.get(label[c], 0) + 1
            label[x] = cat.label_of(b, counts)
        for x in order:
            self._attach(x, parent[x], label[x])

    # -- finding a root ----------------------------------------------------

    def find_root(self, roots, a: Optional[VertexId] = None, b: Optional[VertexId] = None,
                  t: Optional[int] = None) -> VertexId:
        """A vertex that can root the component(s) under ``roots`` (joined by the
        pending edge ab, if given) within depth ``t``; looked up on the kernel."""
        t = self.D if t is None else t
        if isinstance(roots, int):
            roots = [self.root_of(roots)]
        marks: dict = {}
        for name, x in (("a", a), ("b", b)):
            if x is not None:
                if x not in self.graph:
                    raise NotPresent(x)
                marks[x] = marks.get(x, "") + name
        tree, verts = self._kernel(roots, marks)
        key = (tree.key, t)
        memo = self.catalog.root_memo
        if key not in memo:
            memo[key] = _root_index(tree, t)
        idx = memo[key]
        if idx is None:
            raise Infeasible(f"no root of depth <= {t}")
        return verts[idx]

    def _kernel(self, roots: list[VertexId], marks: dict) -> tuple[LabelledTree, list]:
        """Capped copy of the trees: at most S children per label, except that
        children leading to a marked vertex are always kept."""
        cat = self.catalog
        S = cat.S
        onpath: dict = {}
        for m in marks:
            x = m
            p = self._drawer[x].parent
            while p is not None:
                onpath.setdefault(p, set()).add(x)
                x, p = p, self._drawer[p].parent

        def build(x):
            keep = onpath.get(x, set())
            groups: dict = {}
            for d in self._child_drawers(x):
                lst = groups.setdefault(d.label, [])
                for y in d.members:
                    if len(lst) >= S:
                        break
                    if y not in keep:
                        lst.append(y)
            nodes = [build(y) for L in sorted(groups) for y in groups[L]]
            nodes += [build(y) for y in sorted(keep)]
            nodes.sort(key=lambda n: n[0].key)
            bits = cat.bits_tuple(cat.bits[self._drawer[x].label])
            tree = LabelledTree((bits, marks.get(x, "")), tuple(n[0] for n in nodes))
            return tree, x, nodes

        tops = sorted((build(r) for r in roots), key=lambda n: n[0].key)
        if len(tops) == 1:
            top = tops[0]
        else:
            top = (LabelledTree(None, tuple(n[0] for n in tops)), None, tops)
        verts: list = []
        stack = [top]
        while stack:
            _, x, nodes = stack.pop()
            verts.append(x)
            stack.extend(reversed(nodes))
        return top[0], verts

    # -- views and checks --------------------------------------------------

    def decompression(self) -> RootedForest:
        return RootedForest.from_parents({v: d.parent for v, d in self._drawer.items()}, self.D)

    def cabinets(self, roots: Optional[Iterable[VertexId]] = None) -> list[CabinetView]:
        out: list[CabinetView] = []

        def visit(drawers: list[_Drawer], parent: Optional[int]) -> int:
            idx = len(out)
            view = CabinetView(drawers[0].label, [(d.parent, tuple(d.members)) for d in drawers], parent)
            out.append(view)
            groups: dict = {}
            for d in drawers:
                for x in d.members:
                    for cd in self._child_drawers(x):
                        key = (0, cd.label) if cd.public else (1, cd.label, cd.first())
                        groups.setdefault(key, []).append(cd)
            labels = [k[1] for k in groups]
            view.dirty = len(labels) != len(set(labels))
            for key in sorted(groups):
                view.children.append(visit(groups[key], idx))
            return idx

        for r in (self._roots if roots is None else roots):
            visit([self._drawer[r]], None)
        return out

    def num_cabinets(self) -> int:
        return len(self.cabinets())

    def check_invariants(self) -> None:
        """Full recomputation of everything the structure keeps incrementally."""
        g = self.graph
        cat = self.catalog
        if set(self._drawer) != set(g):
            raise InvariantViolation("vertex records differ from the graph")
        forest = self.decompression()
        if not is_valid_decomposition(g, forest, self.D):
            raise InvariantViolation("decompression is not a valid depth-D decomposition")
        for v, d in self._drawer.items():
            if v not in d.members:
                raise InvariantViolation(f"{v} missing from its drawer")
            if d.parent is None:
                if v not in self._roots or len(d.members) != 1:
                    raise InvariantViolation(f"root {v} has a bad drawer")
            elif not d.public or self._kids[d.parent].get(d.label) is not d:
                raise InvariantViolation(f"{v} sits in a dirty or unregistered drawer")
        for p in self._kids:
            if self._priv[p]:
                raise InvariantViolation(f"{p} still has dirty drawers")
            counts: dict = {}
            for L, d in self._kids[p].items():
                if d.label != L or d.parent != p or not d.members:
                    raise InvariantViolation(f"drawer table of {p} is inconsistent")
                counts[L] = len(d.members)
            if counts != self._kidcount[p]:
                raise InvariantViolation(f"child counts of {p} are stale")
        rootcount: dict = {}
        for r in self._roots:
            L = self._drawer[r].label
            rootcount[L] = rootcount.get(L, 0) + 1
        if rootcount != self._rootcount:
            raise InvariantViolation("root counts are stale")
        kids = forest.children()
        want: dict = {}
        for r in forest.roots:
            order, stack = [], [(r, ())]
            while stack:
                x, anc = stack.pop()
                order.append((x, anc))
                stack.extend((c, (x,) + anc) for c in kids[x])
            for x, anc in reversed(order):
                b = sum(1 << k for k, a in enumerate(anc) if g.has_edge(x, a))
                counts = {}
                for c in kids[x]:
                    counts[want[c]] = counts.get(want[c], 0) + 1
                want[x] = cat.label_of(b, counts)
                if want[x] != self._drawer[x].label:
                    raise InvariantViolation(f"label of {x} is stale")
                if anc and not cat.mask[want[x]] & 1:
                    raise InvariantViolation(f"subtree of {x} is not connected to its parent")
        if self._answer != cat.forest_answer(self._rootcount):
            raise InvariantViolation("cached answer is stale")

    def state_digest(self) -> str:
        h = hashlib.sha256()
        for v in sorted(self._drawer):
            d = self._drawer[v]
            h.update(repr((v, d.parent, d.label, d.public)).encode())
        h.update(repr(self.graph.edges()).encode())
        h.update(repr((list(self._roots), self._answer)).encode())
        return h.hexdigest()[:16]

    def label_multiset(self) -> list[tuple]:
        """Sorted (label tree key, cardinality) pairs of every drawer."""
        cat = self.catalog
        seen: dict = {}
        for d in self._drawer.values():
            seen[id(d)] = (cat.kernel(d.label).key, len(d.members))
        return sorted(seen.values())


def _related(old: dict, anc: VertexId, v: VertexId) -> bool:
    p = old[v]
    while p is not None:
        if p == anc:
            return True
        p = old[p]
    return False


def _root_index(tree: LabelledTree, t: int) -> Optional[int]:
    """First preorder position that roots the kernel within depth t."""
    graph = decode(tree, strict=False)
    marked = {}
    for i, (node, _, _) in enumerate(tree.nodes()):
        if node.label is not None:
            for ch in node.label[1]:
                marked[ch] = i
    if "a" in marked and "b" in marked and marked["a"] != marked["b"]:
        graph.set_edge(marked["a"], marked["b"], True)
    if len(graph.components()) > 1:
        return None
    depths = rooted_tree_depths(graph)
    for z in sorted(depths):
        if depths[z] <= t:
            return z
    return None
