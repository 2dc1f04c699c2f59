"""Exact static tree-depth, rooted forests, closures and canonical tree keys.

Everything here is brute force and meant for small inputs; the dynamic
structure uses it to initialise small components and the tests use it as an
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Mapping, Optional

from .errors import VertexSetMismatch
from .graph import DynamicGraph, VertexId


@dataclass
class RootedForest:
    parent: dict[VertexId, Optional[VertexId]]
    roots: list[VertexId] = field(default_factory=list)
    depth_bound: Optional[int] = None

    @classmethod
    def from_parents(cls, parent: Mapping[VertexId, Optional[VertexId]], depth_bound=None) -> RootedForest:
        parent = dict(parent)
        roots = sorted(v for v, p in parent.items() if p is None)
        return cls(parent, roots, depth_bound)

    def vertices(self) -> set[VertexId]:
        return set(self.parent)

    def ancestors(self, v: VertexId) -> list[VertexId]:
        """Strict ancestors of ``v``, nearest first."""
        out = []
        p = self.parent[v]
        while p is not None:
            out.append(p)
            if len(out) > len(self.parent):
                raise ValueError("parent links contain a cycle")
            p = self.parent[p]
        return out

    def vertex_depth(self, v: VertexId) -> int:
        return len(self.ancestors(v)) + 1

    def depth(self) -> int:
        return max((self.vertex_depth(v) for v in self.parent), default=0)

    def children(self) -> dict[VertexId, list[VertexId]]:
        kids: dict[VertexId, list[VertexId]] = {v: [] for v in self.parent}
        for v, p in sorted(self.parent.items()):
            if p is not None:
                kids[p].append(v)
        return kids


def closure(forest: RootedForest) -> set[tuple[VertexId, VertexId]]:
    """All (strict ancestor, descendant) pairs."""
    return {(a, v) for v in forest.parent for a in forest.ancestors(v)}


def is_valid_decomposition(graph: DynamicGraph, forest: RootedForest, D: int) -> bool:
    if forest.vertices() != set(graph):
        raise VertexSetMismatch("forest and graph have different vertex sets")
    anc = {}
    for v in forest.parent:
        chain = forest.ancestors(v)
        if len(chain) + 1 > D:
            return False
        anc[v] = set(chain)
    return all(u in anc[v] or v in anc[u] for u, v in graph.edges())


# -- exact tree-depth ------------------------------------------------------


class _Solver:
    """Memoised td over vertex subsets encoded as bitmasks."""

    def __init__(self, graph: DynamicGraph):
        self.ids = graph.vertices()
        index = {v: i for i, v in enumerate(self.ids)}
        self.nbr = [0] * len(self.ids)
        for u, v in graph.edges():
            self.nbr[index[u]] |= 1 << index[v]
            self.nbr[index[v]] |= 1 << index[u]
        self.index = index
        self.memo: dict[int, int] = {}

    def components(self, mask: int) -> list[int]:
        out = []
        while mask:
            low = mask & -mask
            comp = low
            frontier = low
            while frontier:
                bit = frontier & -frontier
                frontier ^= bit
                new = self.nbr[bit.bit_length() - 1] & mask & ~comp
                comp |= new
                frontier |= new
            out.append(comp)
            mask &= ~comp
        return out

    def td(self, mask: int) -> int:
        if mask == 0:
            return 0
        comps = self.components(mask)
        if len(comps) > 1:
            return max(self.td_connected(c) for c in comps)
        return self.td_connected(mask)

    def td_connected(self, mask: int) -> int:
        got = self.memo.get(mask)
        if got is not None:
            return got
        if mask & (mask - 1) == 0:
            best = 1
        else:
            best = bin(mask).count("1")
            m = mask
            while m:
                bit = m & -m
                m ^= bit
                best = min(best, 1 + self.td(mask & ~bit))
                if best == 2:
                    break  # nothing connected with >= 2 vertices does better
        self.memo[mask] = best
        return best

    def build(self, mask: int, parent: Optional[VertexId], out: dict, forced_root: Optional[int] = None):
        for comp in self.components(mask):
            if forced_root is not None and comp & (1 << forced_root):
                root = forced_root
            else:
                target = self.td_connected(comp)
                root = None
                m = comp
                while m:  # lowest index first == smallest id first
                    bit = m & -m
                    m ^= bit
                    if 1 + self.td(comp & ~bit) == target or comp == bit:
                        root = bit.bit_length() - 1
                        break
            out[self.ids[root]] = parent
            self.build(comp & ~(1 << root), self.ids[root], out)


def tree_depth(graph: DynamicGraph) -> int:
    s = _Solver(graph)
    return s.td((1 << len(s.ids)) - 1)


def rooted_tree_depth(graph: DynamicGraph, root: VertexId) -> int:
    """Least depth of a single tree rooted at ``root`` whose closure contains the graph."""
    s = _Solver(graph)
    full = (1 << len(s.ids)) - 1
    return 1 + s.td(full & ~(1 << s.index[root]))


def rooted_tree_depths(graph: DynamicGraph) -> dict[VertexId, int]:
    """rooted_tree_depth for every vertex, sharing one memo table."""
    s = _Solver(graph)
    full = (1 << len(s.ids)) - 1
    return {v: 1 + s.td(full & ~(1 << i)) for i, v in enumerate(s.ids)}


def optimal_decomposition(graph: DynamicGraph, D: int, root: Optional[VertexId] = None) -> Optional[RootedForest]:
    """Depth-minimal forest, or None when it would need more than ``D`` levels.

    With ``root`` given, the component containing it is rooted there.
    """
    s = _Solver(graph)
    full = (1 << len(s.ids)) - 1
    forced = None
    if root is None:
        need = s.td(full)
    else:
        forced = s.index[root]
        comp = next(c for c in s.components(full) if c >> forced & 1)
        need = max(1 + s.td(comp & ~(1 << forced)), s.td(full & ~comp))
    if need > D:
        return None
    parent: dict = {}
    s.build(full, None, parent, forced)
    return RootedForest.from_parents(parent, D)


# -- labelled trees --------------------------------------------------------


@dataclass(frozen=True)
class LabelledTree:
    label: Hashable
    children: tuple[LabelledTree, ...] = ()

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)

    @cached_property
    def height(self) -> int:
        return 1 + max((c.height for c in self.children), default=0)

    @cached_property
    def key(self) -> bytes:
        return canonical_key(self)

    def nodes(self) -> list[tuple[LabelledTree, int, Optional[int]]]:
        """Preorder list of (subtree, depth-in-tree starting at 0, parent index)."""
        out: list = []
        stack = [(self, 0, None)]
        while stack:
            t, d, p = stack.pop()
            i = len(out)
            out.append((t, d, p))
            for c in reversed(t.children):
                stack.append((c, d + 1, i))
        return out

    def sorted(self) -> LabelledTree:
        """Same tree with children in canonical-key order."""
        kids = sorted((c.sorted() for c in self.children), key=lambda c: c.key)
        return LabelledTree(self.label, tuple(kids))


def _label_bytes(label: Hashable) -> bytes:
    raw = repr(label).encode()
    return len(raw).to_bytes(4, "big") + raw


def canonical_key(tree: LabelledTree) -> bytes:
    """AHU-style encoding: label, then sorted child keys, bracketed."""
    kids = sorted(canonical_key(c) for c in tree.children)
    return b"(" + _label_bytes(tree.label) + b"".join(kids) + b")"


def tree_from_parents(labels: Mapping[int, Hashable], parent: Mapping[int, Optional[int]]) -> LabelledTree:
    kids: dict[int, list[int]] = {v: [] for v in labels}
    root = None
    for v, p in parent.items():
        if p is None:
            root = v
        else:
            kids[p].append(v)
    if root is None:
        raise ValueError("no root")

    def build(v):
        return LabelledTree(labels[v], tuple(build(c) for c in sorted(kids[v])))

    return build(root)


def path_graph(n: int) -> DynamicGraph:
    return DynamicGraph.from_edges(((i, i + 1) for i in range(n - 1)), range(n))


def complete_graph(n: int) -> DynamicGraph:
    return DynamicGraph.from_edges(((i, j) for i in range(n) for j in range(i + 1, n)), range(n))


def cycle_graph(n: int) -> DynamicGraph:
    return DynamicGraph.from_edges(((i, (i + 1) % n) for i in range(n)), range(n))


def star_graph(n: int) -> DynamicGraph:
    """Center 0 with leaves 1..n."""
    return DynamicGraph.from_edges(((0, i) for i in range(1, n + 1)), range(n + 1))
