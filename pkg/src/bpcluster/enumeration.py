"""Enumeration of connected generalized loops and connected loop clusters."""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .errors import GraphError
from .graph import EdgeSubset, Graph, LatticeSymmetry, is_connected_subgraph, vertex_degrees


# -- loops -------------------------------------------------------------------


def _mask_edges(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def enumerate_loops_at(g: Graph, v: int, m: int) -> list[EdgeSubset]:
    """All connected generalized loops through ``v`` with at most ``m`` edges.

    Breadth-first growth of connected edge sets from the bare vertex ``v``.
    A branch is dropped when the subgraph was already seen or when it has
    more degree-1 vertices than ``2 * (m - weight)`` (each added edge can
    repair at most two of them).
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    found: list[EdgeSubset] = []
    seen: set[int] = set()
    queue: deque[int] = deque([0])
    while queue:
        mask = queue.popleft()
        edges = _mask_edges(mask)
        if edges:
            deg = vertex_degrees(g, edges)
            if min(deg.values()) >= 2:
                found.append(tuple(edges))
            verts = deg.keys()
        else:
            deg = {}
            verts = (v,)
        weight = len(edges)
        if weight == m:
            continue
        budget = 2 * (m - weight - 1)
        leaves = sum(1 for d in deg.values() if d == 1)
        for u in verts:
            for e in g.incident[u]:
                bit = 1 << e
                if mask & bit:
                    continue
                child = mask | bit
                if child in seen:
                    continue
                seen.add(child)
                a, b = g.edges[e]
                new_leaves = leaves
                for x in (a, b):
                    d = deg.get(x, 0)
                    if d == 0:
                        new_leaves += 1
                    elif d == 1:
                        new_leaves -= 1
                if new_leaves > budget:
                    continue
                queue.append(child)
    return sorted(found)


def compatible(g: Graph, l1: EdgeSubset, l2: EdgeSubset) -> bool:
    """True iff the two loops share neither a vertex nor an edge."""
    if set(l1) & set(l2):
        return False
    return not (g.edge_vertices(l1) & g.edge_vertices(l2))


@dataclass
class LoopCatalog:
    graph: Graph = field(repr=False)
    loops: list[EdgeSubset]
    max_weight: int
    by_vertex: dict[int, list[int]] = field(default_factory=dict, repr=False)
    vertex_sets: list[frozenset] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.loops = sorted(self.loops, key=lambda l: (len(l), l))
        self.vertex_sets = [frozenset(self.graph.edge_vertices(l)) for l in self.loops]
        self.by_vertex = {v: [] for v in range(self.graph.n_vertices)}
        for i, vs in enumerate(self.vertex_sets):
            for v in vs:
                self.by_vertex[v].append(i)

    def __len__(self):
        return len(self.loops)

    def weight(self, i: int) -> int:
        return len(self.loops[i])

    def incompatible_with(self, i: int) -> list[int]:
        """Loops sharing a vertex with loop ``i`` (including ``i`` itself)."""
        out: set[int] = set()
        for v in self.vertex_sets[i]:
            out.update(self.by_vertex[v])
        return sorted(out)

    def restricted(self, m: int) -> "LoopCatalog":
        return LoopCatalog(self.graph, [l for l in self.loops if len(l) <= m], m)


def _orbit_representatives(g: Graph, group: list[tuple[int, ...]]) -> list[int]:
    reps = []
    covered: set[int] = set()
    for v in range(g.n_vertices):
        if v in covered:
            continue
        reps.append(v)
        covered.update(p[v] for p in group)
    return reps


def build_loop_catalog(g: Graph, m: int, sym: LatticeSymmetry | None = None) -> LoopCatalog:
    """Every connected generalized loop of weight <= ``m``, deduplicated.

    With ``sym`` the search runs only at one vertex per symmetry orbit and
    the loops found there are mapped by every group element.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    loops: set[EdgeSubset] = set()
    if sym is None or not sym.generators:
        for v in range(g.n_vertices):
            loops.update(enumerate_loops_at(g, v, m))
    else:
        group = sym.group(g)
        edge_maps = sym.edge_maps(g)
        for v in _orbit_representatives(g, group):
            for loop in enumerate_loops_at(g, v, m):
                for emap in edge_maps:
                    loops.add(tuple(sorted(emap[e] for e in loop)))
    return LoopCatalog(g, list(loops), m)


# -- clusters ----------------------------------------------------------------


Cluster = tuple[tuple[int, int], ...]  # sorted (loop index, multiplicity) pairs


def cluster_weight(catalog: LoopCatalog, c: Cluster) -> int:
    return sum(eta * catalog.weight(i) for i, eta in c)


def cluster_size(c: Cluster) -> int:
    return sum(eta for _, eta in c)


def _add_loop(c: Cluster, i: int) -> Cluster:
    d = dict(c)
    d[i] = d.get(i, 0) + 1
    return tuple(sorted(d.items()))


@dataclass(frozen=True)
class InteractionGraph:
    """One vertex per loop instance; edges join incompatible or identical loops."""

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    instance_loops: tuple[int, ...]

    def is_connected(self) -> bool:
        if self.vertex_count <= 1:
            return True
        adj = [[] for _ in range(self.vertex_count)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.vertex_count


def interaction_graph(catalog: LoopCatalog, c: Cluster) -> InteractionGraph:
    inst = tuple(i for i, eta in c for _ in range(eta))
    edges = []
    for a, b in combinations(range(len(inst)), 2):
        la, lb = inst[a], inst[b]
        if la == lb or catalog.vertex_sets[la] & catalog.vertex_sets[lb]:
            edges.append((a, b))
    return InteractionGraph(len(inst), tuple(edges), inst)


def enumerate_clusters(catalog: LoopCatalog, m: int) -> list[Cluster]:
    """All connected clusters of total weight <= ``m``, in canonical order.

    For each vertex, depth-first growth from each loop touching it: a cluster
    is extended by one more copy of any loop adjacent (incompatible or
    identical) to a loop already in it.  A global visited set removes
    clusters reached along different paths or from different sites.
    """
    found: set[Cluster] = set()
    neighbours: dict[int, list[int]] = {}

    def nbrs(i):
        if i not in neighbours:
            neighbours[i] = catalog.incompatible_with(i)
        return neighbours[i]

    for s in range(catalog.graph.n_vertices):
        for seed in catalog.by_vertex[s]:
            w0 = catalog.weight(seed)
            if w0 > m:
                continue
            start: Cluster = ((seed, 1),)
            if start in found:
                continue
            found.add(start)
            stack = [(start, w0)]
            while stack:
                c, w = stack.pop()
                frontier: set[int] = set()
                for i, _ in c:
                    frontier.update(nbrs(i))
                for j in sorted(frontier):
                    wj = w + catalog.weight(j)
                    if wj > m:
                        continue
                    child = _add_loop(c, j)
                    if child in found:
                        continue
                    found.add(child)
                    stack.append((child, wj))
    return sorted(found, key=lambda c: (cluster_weight(catalog, c), c))


def clusters_supported_on(catalog: LoopCatalog, clusters, v: int) -> list[Cluster]:
    return [c for c in clusters if any(v in catalog.vertex_sets[i] for i, _ in c)]


def count_bound_check(catalog: LoopCatalog, clusters, v: int, m: int) -> bool:
    """Connected clusters through ``v`` with weight <= m number at most (D+2)^m."""
    n = sum(
        1
        for c in clusters_supported_on(catalog, clusters, v)
        if cluster_weight(catalog, c) <= m
    )
    return n <= (catalog.graph.max_degree + 2) ** m


def incompatible_count_by_weight(catalog: LoopCatalog, i: int) -> dict[int, int]:
    counts: dict[int, int] = {}
    for j in catalog.incompatible_with(i):
        w = catalog.weight(j)
        counts[w] = counts.get(w, 0) + 1
    return counts


# -- brute-force oracles -----------------------------------------------------


def brute_force_loops(g: Graph, m: int) -> list[EdgeSubset]:
    """Filter every edge subset of size <= m (connected, min degree >= 2)."""
    out = []
    for k in range(1, m + 1):
        for s in combinations(range(g.n_edges), k):
            deg = vertex_degrees(g, s)
            if min(deg.values()) >= 2 and is_connected_subgraph(g, s):
                out.append(s)
    return sorted(out, key=lambda l: (len(l), l))


# -- cache files -------------------------------------------------------------


def _cache_paths(cache_dir, g: Graph, m: int) -> tuple[Path, Path]:
    base = Path(cache_dir) / f"{g.content_hash()}_m{m}"
    return base.with_suffix(".loops"), base.with_suffix(".clusters")


def write_cache(cache_dir, catalog: LoopCatalog, clusters) -> tuple[Path, Path]:
    os.makedirs(cache_dir, exist_ok=True)
    g = catalog.graph
    lpath, cpath = _cache_paths(cache_dir, g, catalog.max_weight)
    header = f"# graph {g.content_hash()} max_weight {catalog.max_weight}\n"
    with open(lpath, "w") as f:
        f.write(header)
        for loop in catalog.loops:
            f.write(" ".join(map(str, loop)) + "\n")
    with open(cpath, "w") as f:
        f.write(header)
        for c in clusters:
            f.write(" ".join(f"{i}:{eta}" for i, eta in c) + "\n")
    return lpath, cpath


def read_cache(cache_dir, g: Graph, m: int):
    """Return ``(catalog, clusters)`` from a cache directory, or ``None`` on a miss."""
    lpath, cpath = _cache_paths(cache_dir, g, m)
    if not (lpath.exists() and cpath.exists()):
        return None
    expected = f"# graph {g.content_hash()} max_weight {m}"
    with open(lpath) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != expected:
        raise GraphError(f"cache file {lpath} does not match graph")
    loops = [tuple(int(x) for x in line.split()) for line in lines[1:] if line.strip()]
    catalog = LoopCatalog(g, loops, m)
    if catalog.loops != loops:
        raise GraphError(f"cache file {lpath} is not in canonical order")
    with open(cpath) as f:
        clines = f.read().splitlines()
    if not clines or clines[0] != expected:
        raise GraphError(f"cache file {cpath} does not match graph")
    clusters = []
    for line in clines[1:]:
        if line.strip():
            clusters.append(
                tuple((int(a), int(b)) for a, b in (tok.split(":") for tok in line.split()))
            )
    return catalog, clusters


def load_or_build(g: Graph, m: int, sym: LatticeSymmetry | None = None, cache_dir=None):
    """Catalog and clusters for ``g`` up to weight ``m``; reuses a cache hit.

    Returns ``(catalog, clusters, hit)``.
    """
    if cache_dir is not None:
        cached = read_cache(cache_dir, g, m)
        if cached is not None:
            return cached[0], cached[1], True
    catalog = build_loop_catalog(g, m, sym)
    clusters = enumerate_clusters(catalog, m)
    if cache_dir is not None:
        write_cache(cache_dir, catalog, clusters)
    return catalog, clusters, False
