"""Undirected simple graphs, edge subsets and square-lattice constructors.

Vertices are dense integers ``0..n-1``.  Edges are unordered pairs stored as
``(u, v)`` with ``u < v`` and receive dense ids in sorted pair order, so a
sorted tuple of edge ids is a canonical key for any edge subset.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import GraphError

EdgeSubset = tuple[int, ...]


def edge_subset(edges: Iterable[int]) -> EdgeSubset:
    """Canonical (sorted, duplicate-free) form of an edge collection."""
    return tuple(sorted(set(edges)))


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)
    incident: tuple[tuple[int, ...], ...] = field(repr=False)
    edge_index: dict = field(repr=False, compare=False, hash=False)

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[Sequence[int]]) -> "Graph":
        pairs = []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise GraphError(f"self-edge on vertex {u}")
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise GraphError(f"edge ({u}, {v}) references unknown vertex")
            pairs.append((min(u, v), max(u, v)))
        if len(set(pairs)) != len(pairs):
            raise GraphError("duplicate edge")
        pairs.sort()
        adj: list[list[int]] = [[] for _ in range(n_vertices)]
        inc: list[list[int]] = [[] for _ in range(n_vertices)]
        for eid, (u, v) in enumerate(pairs):
            adj[u].append(v)
            adj[v].append(u)
            inc[u].append(eid)
            inc[v].append(eid)
        return cls(
            n_vertices=n_vertices,
            edges=tuple(pairs),
            adjacency=tuple(tuple(sorted(a)) for a in adj),
            incident=tuple(tuple(i) for i in inc),
            edge_index={p: i for i, p in enumerate(pairs)},
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def edge_id(self, u: int, v: int) -> int:
        try:
            return self.edge_index[(min(u, v), max(u, v))]
        except KeyError:
            raise GraphError(f"no edge between {u} and {v}") from None

    def other_end(self, eid: int, v: int) -> int:
        a, b = self.edges[eid]
        return b if a == v else a

    def edge_vertices(self, edges: Iterable[int]) -> set[int]:
        out: set[int] = set()
        for e in edges:
            out.update(self.edges[e])
        return out

    def check_edges(self, edges: Iterable[int]) -> None:
        for e in edges:
            if not 0 <= e < len(self.edges):
                raise GraphError(f"unknown edge id {e}")

    def content_hash(self) -> str:
        """Hash of vertex count plus sorted edge list (independent of file names)."""
        h = hashlib.sha256(str(self.n_vertices).encode())
        for u, v in self.edges:
            h.update(f";{u}-{v}".encode())
        return h.hexdigest()[:16]

    def is_tree(self) -> bool:
        return self.n_edges == self.n_vertices - 1 and _n_components(self) == 1


def _n_components(g: Graph) -> int:
    seen = [False] * g.n_vertices
    count = 0
    for s in range(g.n_vertices):
        if seen[s]:
            continue
        count += 1
        seen[s] = True
        stack = [s]
        while stack:
            u = stack.pop()
            for w in g.adjacency[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return count


@dataclass(frozen=True)
class LatticeSymmetry:
    """Vertex permutations that generate a symmetry group of a graph."""

    generators: tuple[tuple[int, ...], ...]

    def validate(self, g: Graph) -> None:
        for perm in self.generators:
            if sorted(perm) != list(range(g.n_vertices)):
                raise GraphError("generator is not a vertex permutation")
            for u, v in g.edges:
                if (min(perm[u], perm[v]), max(perm[u], perm[v])) not in g.edge_index:
                    raise GraphError("generator is not a graph automorphism")

    def group(self, g: Graph) -> list[tuple[int, ...]]:
        """All elements of the generated group, identity first, in discovery order."""
        self.validate(g)
        identity = tuple(range(g.n_vertices))
        elements = [identity]
        seen = {identity}
        queue = deque([identity])
        while queue:
            p = queue.popleft()
            for gen in self.generators:
                q = tuple(gen[p[i]] for i in range(len(p)))
                if q not in seen:
                    seen.add(q)
                    elements.append(q)
                    queue.append(q)
        return elements

    def edge_maps(self, g: Graph) -> list[tuple[int, ...]]:
        """Group elements acting on edge ids."""
        out = []
        for p in self.group(g):
            out.append(tuple(g.edge_id(p[u], p[v]) for u, v in g.edges))
        return out


def build_square_lattice(L: int, periodic: bool = True, *, point_group: bool = False):
    """L x L square lattice with vertex ``x + L*y``.

    Returns ``(graph, symmetry)``; ``symmetry`` holds the two unit translations
    (plus a 90 degree rotation and a reflection if ``point_group``) when
    periodic and is ``None`` for open boundaries.
    """
    if L < 2 or (periodic and L < 3):
        raise GraphError(f"lattice size L={L} too small (periodic needs L >= 3, open L >= 2)")

    def idx(x, y):
        return (x % L) + L * (y % L)

    edges = []
    for y in range(L):
        for x in range(L):
            if periodic or x + 1 < L:
                edges.append((idx(x, y), idx(x + 1, y)))
            if periodic or y + 1 < L:
                edges.append((idx(x, y), idx(x, y + 1)))
    g = Graph.from_edges(L * L, edges)
    if not periodic:
        return g, None
    coords = [(v % L, v // L) for v in range(L * L)]
    gens = [
        tuple(idx(x + 1, y) for x, y in coords),
        tuple(idx(x, y + 1) for x, y in coords),
    ]
    if point_group:
        gens.append(tuple(idx(-y, x) for x, y in coords))
        gens.append(tuple(idx(-x, y) for x, y in coords))
    return g, LatticeSymmetry(tuple(gens))


def vertex_degrees(g: Graph, s: Iterable[int]) -> dict[int, int]:
    deg: dict[int, int] = {}
    for e in s:
        u, v = g.edges[e]
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    return deg


def is_generalized_loop(g: Graph, s: Iterable[int]) -> bool:
    """True iff ``s`` is nonempty and every vertex it touches has degree >= 2 in it."""
    s = tuple(s)
    g.check_edges(s)
    if not s:
        return False
    return min(vertex_degrees(g, s).values()) >= 2


def is_connected_subgraph(g: Graph, s: Iterable[int]) -> bool:
    s = tuple(s)
    g.check_edges(s)
    if not s:
        raise GraphError("empty edge subset")
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in s:
        u, v = g.edges[e]
        parent[find(u)] = find(v)
    return len({find(x) for x in list(parent)}) == 1


def orbit_canonical(g: Graph, s: Iterable[int], sym: LatticeSymmetry | None) -> EdgeSubset:
    """Lexicographically least image of ``s`` under the group generated by ``sym``."""
    base = edge_subset(s)
    g.check_edges(base)
    if sym is None or not sym.generators:
        return base
    return min(tuple(sorted(m[e] for e in base)) for m in sym.edge_maps(g))


def bfs_distances(g: Graph, source: int) -> list[int]:
    dist = [-1] * g.n_vertices
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in g.adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def read_graph(text: str) -> Graph:
    """Parse ``vertices: N`` followed by ``edge u v`` lines (``#`` comments)."""
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vertices:"):
            n = int(line.split(":", 1)[1])
        elif line.startswith("edge "):
            parts = line.split()
            if len(parts) != 3:
                raise GraphError(f"line {lineno}: expected 'edge u v'")
            edges.append((int(parts[1]), int(parts[2])))
        elif line.startswith("tensor "):
            continue
        else:
            raise GraphError(f"line {lineno}: unrecognised '{line}'")
    if n is None:
        raise GraphError("missing 'vertices: N' header")
    return Graph.from_edges(n, edges)


def format_graph(g: Graph) -> str:
    lines = [f"vertices: {g.n_vertices}"]
    lines += [f"edge {u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"
