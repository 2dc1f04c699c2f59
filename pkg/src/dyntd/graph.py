"""Mutable simple undirected graph with stable integer vertex ids."""

from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator

from .errors import NotIsolated, NotPresent, SelfLoop

VertexId = int


class DynamicGraph:
    """Adjacency-set graph. Ids come from a monotone counter and are never reused."""

    def __init__(self) -> None:
        self._adj: dict[VertexId, set[VertexId]] = {}
        self._next = 0
        self._edges = 0

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], vertices: Iterable[int] = ()) -> DynamicGraph:
        """Build a graph whose ids are exactly the integers mentioned."""
        g = cls()
        for v in vertices:
            g.ensure_vertex(v)
        for u, v in edges:
            g.ensure_vertex(u)
            g.ensure_vertex(v)
            if u != v and not g.has_edge(u, v):
                g.set_edge(u, v, True)
        return g

    def copy(self) -> DynamicGraph:
        g = DynamicGraph()
        g._adj = {v: set(n) for v, n in self._adj.items()}
        g._next = self._next
        g._edges = self._edges
        return g

    # -- vertices --------------------------------------------------------

    def add_vertex(self) -> VertexId:
        v = self._next
        self._next += 1
        self._adj[v] = set()
        return v

    def ensure_vertex(self, v: VertexId) -> None:
        """Add ``v`` under an explicit id (used by file loaders)."""
        if v < 0:
            raise ValueError("vertex ids are nonnegative")
        if v not in self._adj:
            self._adj[v] = set()
            self._next = max(self._next, v + 1)

    def remove_vertex(self, v: VertexId) -> None:
        nbrs = self._adj.get(v)
        if nbrs is None:
            raise NotPresent(v)
        if nbrs:
            raise NotIsolated(v)
        del self._adj[v]

    def __contains__(self, v: object) -> bool:
        return v in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    def __iter__(self) -> Iterator[VertexId]:
        return iter(self._adj)

    def vertices(self) -> list[VertexId]:
        return sorted(self._adj)

    @property
    def next_id(self) -> int:
        return self._next

    # -- edges -----------------------------------------------------------

    def set_edge(self, u: VertexId, v: VertexId, present: bool) -> None:
        if u == v:
            raise SelfLoop(u)
        if u not in self._adj:
            raise NotPresent(u)
        if v not in self._adj:
            raise NotPresent(v)
        had = v in self._adj[u]
        if present and not had:
            self._adj[u].add(v)
            self._adj[v].add(u)
            self._edges += 1
        elif not present and had:
            self._adj[u].discard(v)
            self._adj[v].discard(u)
            self._edges -= 1

    def has_edge(self, u: VertexId, v: VertexId) -> bool:
        return v in self._adj.get(u, ())

    def neighbors(self, v: VertexId) -> set[VertexId]:
        try:
            return self._adj[v]
        except KeyError:
            raise NotPresent(v) from None

    def degree(self, v: VertexId) -> int:
        return len(self.neighbors(v))

    def num_edges(self) -> int:
        return self._edges

    def edges(self) -> list[tuple[VertexId, VertexId]]:
        return sorted((u, v) for u, nb in self._adj.items() for v in nb if u < v)

    # -- connectivity ----------------------------------------------------

    def component_of(self, v: VertexId) -> set[VertexId]:
        if v not in self._adj:
            raise NotPresent(v)
        seen = {v}
        todo = deque([v])
        while todo:
            x = todo.popleft()
            for y in self._adj[x]:
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return seen

    def components(self) -> list[set[VertexId]]:
        out: list[set[VertexId]] = []
        seen: set[VertexId] = set()
        for v in sorted(self._adj):
            if v not in seen:
                comp = self.component_of(v)
                seen |= comp
                out.append(comp)
        return out

    def induced_components(self, verts: set[VertexId]) -> list[set[VertexId]]:
        """Components of the subgraph induced by ``verts``."""
        out = []
        left = set(verts)
        for s in sorted(verts):
            if s not in left:
                continue
            left.discard(s)
            comp = {s}
            todo = [s]
            while todo:
                x = todo.pop()
                for y in self._adj[x]:
                    if y in left:
                        left.discard(y)
                        comp.add(y)
                        todo.append(y)
            out.append(comp)
        return out

    def check_symmetric(self) -> bool:
        return all(u in self._adj[v] and u != v for u, nb in self._adj.items() for v in nb)

    def __repr__(self) -> str:
        return f"DynamicGraph(n={len(self)}, m={self._edges})"
