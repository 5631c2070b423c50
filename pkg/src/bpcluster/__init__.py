"""Belief propagation for closed tensor networks, with loop and cluster corrections."""

__version__ = "0.1.0"

from .bp import BpReport, BpSchedule, run_bp
from .enumeration import LoopCatalog, build_loop_catalog, enumerate_clusters, load_or_build
from .errors import (
    BPClusterError,
    BPNotConvergedError,
    BudgetExceededError,
    DegenerateFixedPointError,
    GraphError,
    NonFiniteMessageError,
    QuadratureError,
    TensorError,
)
from .graph import Graph, LatticeSymmetry, build_square_lattice
from .network import ContractionValue, TensorNetwork, exact_contract, normalize_by_bp
from .series import ExpansionLedger, cluster_expansion, loop_series
from .tensor import LabeledTensor

__all__ = [
    "__version__",
    "BPClusterError",
    "BPNotConvergedError",
    "BpReport",
    "BpSchedule",
    "BudgetExceededError",
    "ContractionValue",
    "DegenerateFixedPointError",
    "ExpansionLedger",
    "Graph",
    "GraphError",
    "LabeledTensor",
    "LatticeSymmetry",
    "LoopCatalog",
    "NonFiniteMessageError",
    "QuadratureError",
    "TensorError",
    "TensorNetwork",
    "build_loop_catalog",
    "build_square_lattice",
    "cluster_expansion",
    "enumerate_clusters",
    "exact_contract",
    "load_or_build",
    "loop_series",
    "normalize_by_bp",
    "run_bp",
]
