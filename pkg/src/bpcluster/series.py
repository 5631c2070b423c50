"""Loop corrections, Ursell functions and the truncated loop/cluster series.

Internally everything is kept in the log-Z convention; free energies
``F = -log Z`` appear only in reporting helpers.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .bp import MessageSet, build_projector
from .enumeration import (
    Cluster,
    InteractionGraph,
    LoopCatalog,
    cluster_size,
    cluster_weight,
    interaction_graph,
)
from .errors import DegenerateFixedPointError
from .graph import EdgeSubset
from .network import ContractionValue, TensorNetwork, normalize_by_bp
from .tensor import LabeledTensor, contract, overlap, principal_sqrt

URSELL_EDGE_CAP = 24


class LoopEvaluator:
    """Evaluates loop corrections on a BP-normalized network.

    Per-vertex effective tensors (vacuum messages absorbed on non-loop legs,
    projectors applied on loop legs owned by the vertex) are cached, so loops
    sharing a vertex and leg pattern reuse the same contraction.
    """

    def __init__(self, tn_normalized: TensorNetwork, msgs: MessageSet):
        self.tn = tn_normalized
        self.msgs = msgs
        g = tn_normalized.graph
        self._vac: dict[tuple[int, int], np.ndarray] = {}
        for e, (a, b) in enumerate(g.edges):
            i_ab = overlap(msgs[(a, b)], msgs[(b, a)])
            if i_ab == 0:
                raise DegenerateFixedPointError(f"vanishing overlap on edge {e}")
            root = principal_sqrt(i_ab)
            self._vac[(a, e)] = msgs[(b, a)] / root
            self._vac[(b, e)] = msgs[(a, b)] / root
        self._proj: dict[int, np.ndarray] = {}
        self._cache: dict[tuple[int, tuple[int, ...]], LabeledTensor] = {}

    def projector(self, e: int) -> np.ndarray:
        if e not in self._proj:
            self._proj[e] = build_projector(self.tn, self.msgs, e).matrix
        return self._proj[e]

    def effective_tensor(self, v: int, loop_legs: tuple[int, ...]) -> LabeledTensor:
        key = (v, loop_legs)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        g = self.tn.graph
        data = self.tn.tensors[v].data
        legs = g.incident[v]
        fresh = len(legs)
        operands = [data, list(range(len(legs)))]
        out = []
        for k, e in enumerate(legs):
            if e not in loop_legs:
                operands += [self._vac[(v, e)], [k]]
            elif g.edges[e][0] == v:
                # projector sits on the lower endpoint: columns meet T_r, rows face T_s
                operands += [self.projector(e), [fresh, k]]
                out.append(fresh)
                fresh += 1
            else:
                out.append(k)
        eff = np.einsum(*operands, out, optimize=False)
        t = LabeledTensor(tuple(e for e in legs if e in loop_legs), eff)
        self._cache[key] = t
        return t

    def correction(self, loop: EdgeSubset) -> complex:
        g = self.tn.graph
        loop_set = set(loop)
        at: dict[int, list[int]] = {}
        for e in loop:
            for x in g.edges[e]:
                at.setdefault(x, []).append(e)
        # walk the loop so the running tensor stays small
        start = min(at)
        order, seen = [], {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            order.append(u)
            for e in at[u]:
                w = g.other_end(e, u)
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        if len(order) != len(at):
            # disconnected generalized loop: walk each component in turn
            order += sorted(set(at) - set(order))
        acc = None
        for u in order:
            t = self.effective_tensor(u, tuple(e for e in g.incident[u] if e in loop_set))
            acc = t if acc is None else contract(acc, t)
        return acc.scalar()


def loop_correction(tn_normalized: TensorNetwork, msgs: MessageSet, loop: EdgeSubset) -> complex:
    """Contraction with projectors on the loop edges and BP vacuum elsewhere."""
    return LoopEvaluator(tn_normalized, msgs).correction(tuple(loop))


def loop_corrections(
    tn_normalized: TensorNetwork, msgs: MessageSet, loops, threads: int = 1
) -> list[complex]:
    ev = LoopEvaluator(tn_normalized, msgs)
    loops = list(loops)
    if threads <= 1 or len(loops) < 256:
        return [ev.correction(l) for l in loops]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(ev.correction, loops, chunksize=64))


# -- Ursell function ---------------------------------------------------------


def connected_spanning_sum(n: int, edges: tuple[tuple[int, int], ...]) -> int:
    """Sum of ``(-1)^|E(C)|`` over connected spanning subgraphs C (exhaustive)."""
    if len(edges) > URSELL_EDGE_CAP:
        raise ValueError(f"interaction graph has {len(edges)} edges (cap {URSELL_EDGE_CAP})")
    return _spanning_sum(n, tuple(sorted(edges)))


@lru_cache(maxsize=None)
def _spanning_sum(n: int, edges: tuple[tuple[int, int], ...]) -> int:
    if n == 1:
        return 1
    total = 0
    k = len(edges)
    for mask in range(1 << k):
        if bin(mask).count("1") < n - 1:
            continue
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = n
        for j in range(k):
            if mask >> j & 1:
                a, b = find(edges[j][0]), find(edges[j][1])
                if a != b:
                    parent[a] = b
                    comps -= 1
        if comps == 1:
            total += -1 if bin(mask).count("1") % 2 else 1
    return total


def ursell(c: Cluster, ig: InteractionGraph) -> Fraction:
    """Ursell coefficient of a connected cluster."""
    if ig.vertex_count != cluster_size(c):
        raise ValueError("interaction graph does not match cluster")
    if ig.vertex_count == 1:
        return Fraction(1)
    if not ig.is_connected():
        raise ValueError("cluster is not connected")
    denom = math.prod(math.factorial(eta) for _, eta in c)
    return Fraction(connected_spanning_sum(ig.vertex_count, ig.edges), denom)


def cluster_correction(corrs, c: Cluster) -> complex:
    """Product of member loop corrections raised to their multiplicities."""
    out = 1.0 + 0j
    for i, eta in c:
        if i not in corrs:
            raise KeyError(f"no correction for loop {i}")
        out *= complex(corrs[i]) ** eta
    return out


def _csum(values) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


# -- expansions --------------------------------------------------------------


@dataclass
class LoopStats:
    count: int
    max_abs: float
    mean_abs: float
    mean: complex


@dataclass
class ExpansionLedger:
    n_vertices: int
    max_weight: int
    log_z0: complex
    per_weight: dict[int, tuple[complex, int]]
    cumulative: dict[int, complex]
    loop_stats: dict[int, LoopStats] = field(default_factory=dict)
    loop_series: dict[int, ContractionValue] = field(default_factory=dict)
    residual: float | None = None

    @property
    def F0(self) -> float:
        return -self.log_z0.real

    def log_z(self, m: int) -> complex:
        """Cluster-corrected estimate of ``log Z`` at truncation weight ``m``."""
        return self.log_z0 + self.cumulative[m]

    def free_energy(self, m: int) -> float:
        return -self.log_z(m).real

    def loop_series_free_energy(self, m: int) -> float:
        return self.loop_series[m].free_energy

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "F0", "F_cluster_m", "Z_loopseries_m", "n_clusters_m", "max_abs_Zl_at_w"])
        running = 0
        for m in range(self.max_weight + 1):
            running += self.per_weight.get(m, (0j, 0))[1]
            ls = self.loop_series.get(m)
            stats = self.loop_stats.get(m)
            w.writerow([
                m,
                _fmt(self.F0),
                _fmt(self.free_energy(m)),
                _fmt(ls.log_magnitude) if ls is not None else "",
                running,
                _fmt(stats.max_abs) if stats is not None else "",
            ])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _loop_stats(catalog: LoopCatalog, values: list[complex], m: int) -> dict[int, LoopStats]:
    by_w: dict[int, list[complex]] = {}
    for i, z in enumerate(values):
        by_w.setdefault(catalog.weight(i), []).append(z)
    out = {}
    for w, zs in sorted(by_w.items()):
        if w > m:
            continue
        mags = [abs(z) for z in zs]
        out[w] = LoopStats(len(zs), max(mags), math.fsum(mags) / len(zs), _csum(zs) / len(zs))
    return out


def prepare(tn: TensorNetwork, msgs: MessageSet):
    """BP-normalize ``tn``; returns ``(normalized network, log Z0)``."""
    return normalize_by_bp(tn, msgs)


def cluster_expansion(
    tn: TensorNetwork,
    msgs: MessageSet,
    catalog: LoopCatalog,
    clusters,
    m: int,
    *,
    with_loop_series: bool = False,
    threads: int = 1,
) -> ExpansionLedger:
    """Truncated cluster expansion of ``log Z`` up to cluster weight ``m``."""
    tn_norm, log_z0 = prepare(tn, msgs)
    n_loops = sum(1 for l in catalog.loops if len(l) <= m)
    values = loop_corrections(tn_norm, msgs, catalog.loops[:n_loops], threads=threads)
    corrs = dict(enumerate(values))

    terms: dict[int, list[complex]] = {}
    for c in clusters:
        w = cluster_weight(catalog, c)
        if w > m:
            continue
        phi = ursell(c, interaction_graph(catalog, c))
        terms.setdefault(w, []).append(float(phi) * cluster_correction(corrs, c))
    per_weight = {w: (_csum(ts), len(ts)) for w, ts in sorted(terms.items())}
    cumulative = {}
    acc = []
    for mm in range(m + 1):
        if mm in per_weight:
            acc.append(per_weight[mm][0])
        cumulative[mm] = _csum(acc)
    ledger = ExpansionLedger(
        n_vertices=tn.graph.n_vertices,
        max_weight=m,
        log_z0=log_z0,
        per_weight=per_weight,
        cumulative=cumulative,
        loop_stats=_loop_stats(catalog, values, m),
    )
    if with_loop_series:
        ledger.loop_series = _loop_series_from_values(catalog, values, log_z0, m)
    return ledger


def compatible_set_sums(catalog: LoopCatalog, values, m: int) -> dict[int, complex]:
    """Sum of ``prod Z_l`` over compatible sets of connected loops, by total weight."""
    n = sum(1 for l in catalog.loops if len(l) <= m)
    weights = [catalog.weight(i) for i in range(n)]
    vsets = catalog.vertex_sets
    buckets: dict[int, list[complex]] = {}
    min_w = min(weights, default=m + 1)

    def rec(start, budget, blocked, prod, weight):
        for b in range(start, n):
            wb = weights[b]
            if wb > budget:
                break  # catalog is sorted by weight
            if blocked & vsets[b]:
                continue
            p = prod * values[b]
            buckets.setdefault(weight + wb, []).append(p)
            if budget - wb >= min_w:
                rec(b + 1, budget - wb, blocked | vsets[b], p, weight + wb)

    rec(0, m, frozenset(), 1.0 + 0j, 0)
    return {w: _csum(v) for w, v in sorted(buckets.items())}


def _loop_series_from_values(catalog, values, log_z0, m) -> dict[int, ContractionValue]:
    sums = compatible_set_sums(catalog, values, m)
    out = {}
    acc = [1.0 + 0j]
    for mm in range(m + 1):
        if mm in sums:
            acc.append(sums[mm])
        total = _csum(acc)
        if total == 0:
            out[mm] = ContractionValue(-math.inf, 1.0 + 0j)
        else:
            out[mm] = ContractionValue.from_log(log_z0 + cmath.log(total))
    return out


def loop_series(
    tn: TensorNetwork, msgs: MessageSet, catalog: LoopCatalog, m: int
) -> dict[int, ContractionValue]:
    """Truncated loop series ``Z0 (1 + sum_{|l| <= m} Z_l)`` for every cutoff up to ``m``.

    Disconnected generalized loops are built as compatible sets of catalog
    loops; their corrections are products over components.
    """
    tn_norm, log_z0 = prepare(tn, msgs)
    n_loops = sum(1 for l in catalog.loops if len(l) <= m)
    values = loop_corrections(tn_norm, msgs, catalog.loops[:n_loops])
    return _loop_series_from_values(catalog, values, log_z0, m)


def ursell_for_catalog_cluster(catalog: LoopCatalog, c: Cluster) -> Fraction:
    return ursell(c, interaction_graph(catalog, c))


def complete_graph_edges(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(combinations(range(n), 2))
