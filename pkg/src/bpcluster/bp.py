"""Belief propagation on closed tensor networks.

Messages live in a plain dict keyed by directed edge ``(v, w)`` (message
from ``v`` to ``w``) holding complex vectors of unit two-norm.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateFixedPointError, NonFiniteMessageError
from .network import TensorNetwork
from .tensor import overlap, principal_sqrt

MessageSet = dict  # (v, w) -> np.ndarray

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def directed_edges(tn: TensorNetwork) -> list[tuple[int, int]]:
    out = []
    for u, v in tn.graph.edges:
        out.append((u, v))
        out.append((v, u))
    return out


def normalize_message(vec: np.ndarray) -> np.ndarray:
    """Unit two-norm with a fixed global phase.

    The phase is chosen so the entry sum is real positive (or, if the sum
    vanishes, the first largest-magnitude entry).  Overall factors cancel in
    every BP quantity; fixing them only lets complex runs converge.
    """
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm):
        raise NonFiniteMessageError("non-finite message")
    if norm < 1e-300:
        raise DegenerateFixedPointError("message vanished")
    vec = vec / norm
    s = vec.sum()
    if abs(s) < 1e-12:
        s = vec[int(np.argmax(np.abs(vec)))]
    return vec * (abs(s) / s)


def _raw_update(tn: TensorNetwork, msgs: MessageSet, v: int, s: int) -> np.ndarray:
    g = tn.graph
    data = tn.tensors[v].data
    nbrs = [g.other_end(e, v) for e in g.incident[v]]
    out_axis = nbrs.index(s)
    operands = [data, list(range(len(nbrs)))]
    for k, n in enumerate(nbrs):
        if k != out_axis:
            operands += [msgs[(n, v)], [k]]
    return np.einsum(*operands, [out_axis], optimize=False)


def update_message(tn: TensorNetwork, msgs: MessageSet, v: int, s: int) -> np.ndarray:
    """Contract ``T_v`` with every incoming message except the one from ``s``."""
    return normalize_message(_raw_update(tn, msgs, v, s))


def uniform_messages(tn: TensorNetwork) -> MessageSet:
    msgs = {}
    for u, v in directed_edges(tn):
        chi = tn.bond_dims[tn.graph.edge_id(u, v)]
        msgs[(u, v)] = np.full(chi, 1.0 / math.sqrt(chi), dtype=np.complex128)
    return msgs


def _edge_rng(seed: int, index: int, salt: int) -> np.random.Generator:
    # one independent stream per directed edge, reproducible from the seed
    return np.random.default_rng([seed, salt, index])


def random_messages(tn: TensorNetwork, seed: int) -> MessageSet:
    msgs = {}
    for k, (u, v) in enumerate(directed_edges(tn)):
        chi = tn.bond_dims[tn.graph.edge_id(u, v)]
        vec = _edge_rng(seed, k, 0).standard_normal(chi)
        msgs[(u, v)] = normalize_message(vec.astype(np.complex128))
    return msgs


@dataclass
class BpSchedule:
    damping: float = 0.0
    noise: float = 0.0
    tol: float = 1e-10
    max_iters: int = 1000
    seed: int = 0
    init: str = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.init not in ("uniform", "random"):
            raise ValueError(f"unknown init '{self.init}'")


@dataclass
class BpReport:
    converged: bool
    iterations: int
    residual: float
    F0: float
    phase: complex
    local_Z: dict = field(repr=False)

    @property
    def log_Z0(self) -> complex:
        return complex(-self.F0, cmath.phase(self.phase))

    def to_json(self) -> str:
        d = asdict(self)
        d["phase"] = [self.phase.real, self.phase.imag]
        d["local_Z"] = {str(v): [z.real, z.imag] for v, z in self.local_Z.items()}
        return json.dumps(d, indent=2)


def self_consistency_residual(tn: TensorNetwork, msgs: MessageSet) -> float:
    """Max two-norm defect between each message and its recomputed update."""
    worst = 0.0
    for v, s in directed_edges(tn):
        worst = max(worst, float(np.linalg.norm(update_message(tn, msgs, v, s) - msgs[(v, s)])))
    return worst


def run_bp(
    tn: TensorNetwork,
    schedule: BpSchedule | None = None,
    messages: MessageSet | None = None,
) -> tuple[MessageSet, BpReport]:
    """Synchronous damped message passing until the residual drops below ``tol``.

    ``messages`` overrides ``schedule.init`` as the starting point.
    """
    sched = schedule or BpSchedule()
    edges = directed_edges(tn)
    if messages is not None:
        msgs = {d: normalize_message(np.asarray(messages[d], dtype=np.complex128)) for d in edges}
    elif sched.init == "random":
        msgs = random_messages(tn, sched.seed)
    else:
        msgs = uniform_messages(tn)

    noise_rngs = (
        [_edge_rng(sched.seed, k, 1) for k in range(len(edges))] if sched.noise > 0 else None
    )
    iterations = 0
    residual = math.inf
    while True:
        proposed = {d: update_message(tn, msgs, *d) for d in edges}
        residual = max(
            (float(np.linalg.norm(proposed[d] - msgs[d])) for d in edges), default=0.0
        )
        if residual < sched.tol or iterations >= sched.max_iters:
            break
        new = {}
        for k, d in enumerate(edges):
            vec = (1.0 - sched.damping) * proposed[d] + sched.damping * msgs[d]
            if noise_rngs is not None:
                vec = vec + sched.noise * noise_rngs[k].standard_normal(vec.shape)
            new[d] = normalize_message(vec)
        msgs = new
        iterations += 1

    local = {v: local_contribution(tn, msgs, v) for v in range(tn.graph.n_vertices)}
    log_z0 = sum((cmath.log(z) for z in local.values()), 0j)
    report = BpReport(
        converged=residual < sched.tol,
        iterations=iterations,
        residual=residual,
        F0=-log_z0.real,
        phase=cmath.exp(1j * log_z0.imag),
        local_Z=local,
    )
    return msgs, report


def local_contribution(tn: TensorNetwork, msgs: MessageSet, v: int) -> complex:
    """``Z_v``: ``T_v`` contracted with ``mu_{n->v} / sqrt(I_vn)`` on every leg."""
    g = tn.graph
    data = tn.tensors[v].data
    operands = [data, list(range(data.ndim))]
    for k, e in enumerate(g.incident[v]):
        n = g.other_end(e, v)
        i_vn = overlap(msgs[(v, n)], msgs[(n, v)])
        operands += [msgs[(n, v)] / principal_sqrt(i_vn), [k]]
    return complex(np.einsum(*operands, [], optimize=False))


def bp_log_z0(tn: TensorNetwork, msgs: MessageSet) -> complex:
    return sum((cmath.log(local_contribution(tn, msgs, v)) for v in range(tn.graph.n_vertices)), 0j)


@dataclass(frozen=True, eq=False)
class Projector:
    """``1 - |mu_{r->s}><mu_{s->r}| / I_rs`` on edge ``(r, s)``, ``r < s``.

    Row index attaches to ``s`` and column index to ``r``.
    """

    edge: int
    matrix: np.ndarray


def build_projector(tn: TensorNetwork, msgs: MessageSet, edge: int) -> Projector:
    r, s = tn.graph.edges[edge]
    fwd, bwd = msgs[(r, s)], msgs[(s, r)]
    i_rs = overlap(fwd, bwd)
    if abs(i_rs) < 1e-14:
        raise DegenerateFixedPointError(f"vanishing overlap on edge {edge}")
    chi = fwd.shape[0]
    return Projector(edge, np.eye(chi, dtype=np.complex128) - np.outer(fwd, bwd) / i_rs)
