"""Closed tensor networks, exact contraction oracles and BP normalization."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BudgetExceededError, DegenerateFixedPointError, TensorError
from .graph import Graph, read_graph
from .tensor import LabeledTensor, contract

DEFAULT_BUDGET = 2**24


@dataclass(frozen=True)
class ContractionValue:
    """A complex scalar stored as ``exp(log_magnitude) * phase``."""

    log_magnitude: float
    phase: complex

    @classmethod
    def from_complex(cls, z: complex) -> "ContractionValue":
        z = complex(z)
        if z == 0:
            return cls(-math.inf, 1.0 + 0j)
        return cls(math.log(abs(z)), z / abs(z))

    @classmethod
    def from_log(cls, logz: complex) -> "ContractionValue":
        logz = complex(logz)
        return cls(logz.real, cmath.exp(1j * logz.imag))

    @property
    def value(self) -> complex:
        return math.exp(self.log_magnitude) * self.phase

    @property
    def log(self) -> complex:
        """Principal-branch logarithm."""
        return complex(self.log_magnitude, cmath.phase(self.phase))

    @property
    def free_energy(self) -> float:
        """``-log |Z|``; the phase is carried separately."""
        return -self.log_magnitude


class TensorNetwork:
    """A graph plus one tensor per vertex, with one leg per incident edge."""

    def __init__(self, graph: Graph, tensors: Mapping[int, LabeledTensor]):
        self.graph = graph
        self.tensors: dict[int, LabeledTensor] = {}
        bond_dims: dict[int, int] = {}
        for v in range(graph.n_vertices):
            if v not in tensors:
                raise TensorError(f"vertex {v} has no tensor")
            t = tensors[v]
            if sorted(t.legs) != sorted(graph.incident[v]):
                raise TensorError(
                    f"vertex {v}: legs {t.legs} != incident edges {graph.incident[v]}"
                )
            if not np.any(t.data):
                raise TensorError(f"vertex {v}: zero tensor")
            for e, d in zip(t.legs, t.dims):
                if bond_dims.setdefault(e, d) != d:
                    raise TensorError(f"edge {e}: inconsistent bond dimension")
            # canonical leg order: incident-edge order
            self.tensors[v] = t.transpose(graph.incident[v])
        self.bond_dims = bond_dims

    def __repr__(self):
        return (
            f"TensorNetwork(n_vertices={self.graph.n_vertices}, "
            f"n_edges={self.graph.n_edges}, max_bond={max(self.bond_dims.values(), default=1)})"
        )

    def with_tensors(self, tensors: Mapping[int, LabeledTensor]) -> "TensorNetwork":
        merged = dict(self.tensors)
        merged.update(tensors)
        return TensorNetwork(self.graph, merged)

    def scaled(self, v: int, c: complex) -> "TensorNetwork":
        return self.with_tensors({v: self.tensors[v] * c})


def _elimination_order(tn: TensorNetwork) -> list[int]:
    """Greedy vertex order keeping the number of open legs of the blob small."""
    g = tn.graph
    remaining = set(range(g.n_vertices))
    order: list[int] = []
    open_legs: set[int] = set()
    while remaining:
        if not open_legs:
            start = min(remaining, key=lambda v: (g.degree(v), v))
            candidates = [start]
        else:
            candidates = sorted({g.other_end(e, v) for e in open_legs for v in g.edges[e]} & remaining)

        def cost(v):
            legs = set(g.incident[v])
            new = (open_legs ^ legs)
            return (math.prod(tn.bond_dims[e] for e in new), v)

        best = min(candidates, key=cost)
        order.append(best)
        remaining.discard(best)
        open_legs ^= set(g.incident[best])
    return order


def exact_contract(tn: TensorNetwork, budget: int = DEFAULT_BUDGET) -> ContractionValue:
    """Exact value of the fully contracted network.

    Vertices are absorbed one at a time (variable elimination); the running
    tensor is rescaled after every step and the scale accumulated in log form.
    ``budget`` caps the number of entries of any intermediate tensor.
    """
    log_scale = 0.0
    blob = LabeledTensor((), np.asarray(1.0 + 0j))
    for v in _elimination_order(tn):
        t = tn.tensors[v]
        new_legs = set(blob.legs) ^ set(t.legs)
        size = math.prod(tn.bond_dims[e] for e in new_legs)
        if size > budget:
            raise BudgetExceededError(
                f"intermediate tensor with {size} entries exceeds budget {budget}"
            )
        blob = contract(blob, t)
        peak = float(np.max(np.abs(blob.data)))
        if peak == 0.0:
            return ContractionValue(-math.inf, 1.0 + 0j)
        log_scale += math.log(peak)
        blob = LabeledTensor(blob.legs, blob.data / peak)
    z = blob.scalar()
    return ContractionValue(log_scale + math.log(abs(z)), z / abs(z))


def brute_force_contract(tn: TensorNetwork, budget: int = 2**20) -> complex:
    """Literal sum over every bond-index assignment (small networks only)."""
    g = tn.graph
    dims = [tn.bond_dims[e] for e in range(g.n_edges)]
    total = math.prod(dims)
    if total > budget:
        raise BudgetExceededError(f"{total} bond configurations exceed budget {budget}")
    acc = 0j
    for config in itertools.product(*(range(d) for d in dims)):
        term = 1.0 + 0j
        for v in range(g.n_vertices):
            term *= tn.tensors[v].data[tuple(config[e] for e in g.incident[v])]
            if term == 0:
                break
        acc += term
    return acc


def normalize_by_bp(tn: TensorNetwork, msgs) -> tuple[TensorNetwork, complex]:
    """Divide every tensor by its local BP contribution.

    Returns the normalized network and ``offset = sum_v log Z_v`` so that
    ``log Z(T) = log Z(T_normalized) + offset``.
    """
    from .bp import local_contribution

    new = {}
    offset = 0j
    for v in range(tn.graph.n_vertices):
        zv = local_contribution(tn, msgs, v)
        if zv == 0:
            raise DegenerateFixedPointError(f"local contribution vanishes at vertex {v}")
        new[v] = tn.tensors[v] / zv
        offset += cmath.log(zv)
    return TensorNetwork(tn.graph, new), offset


# -- network files -----------------------------------------------------------


def read_network(text: str) -> TensorNetwork:
    """Parse a graph section plus ``tensor v legs e:d ... data re im ...`` lines."""
    g = read_graph(text)
    tensors = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line.startswith("tensor "):
            continue
        head, _, rest = line.partition(" legs ")
        legs_part, _, data_part = rest.partition(" data ")
        v = int(head.split()[1])
        legs, dims = [], []
        for tok in legs_part.split():
            e, d = tok.split(":")
            legs.append(int(e))
            dims.append(int(d))
        nums = [float(x) for x in data_part.split()]
        if len(nums) != 2 * math.prod(dims):
            raise TensorError(f"line {lineno}: expected {2 * math.prod(dims)} numbers")
        arr = np.array(nums[0::2]) + 1j * np.array(nums[1::2])
        if v in tensors:
            raise TensorError(f"line {lineno}: duplicate tensor for vertex {v}")
        tensors[v] = LabeledTensor(tuple(legs), arr.reshape(dims))
    return TensorNetwork(g, tensors)


def format_network(tn: TensorNetwork) -> str:
    from .graph import format_graph

    lines = [format_graph(tn.graph).rstrip("\n")]
    for v in range(tn.graph.n_vertices):
        t = tn.tensors[v]
        legs = " ".join(f"{e}:{d}" for e, d in zip(t.legs, t.dims))
        flat = t.data.reshape(-1)
        data = " ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in flat)
        lines.append(f"tensor {v} legs {legs} data {data}")
    return "\n".join(lines) + "\n"
