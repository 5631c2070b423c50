"""Dense complex tensors whose legs are labelled by edge ids."""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFixedPointError, TensorError


@dataclass(frozen=True, eq=False)
class LabeledTensor:
    legs: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        legs = tuple(int(e) for e in self.legs)
        if data.ndim != len(legs):
            raise TensorError(f"{len(legs)} legs but data has {data.ndim} axes")
        if len(set(legs)) != len(legs):
            raise TensorError(f"repeated leg label in {legs}")
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    def dim(self, leg: int) -> int:
        return self.data.shape[self.legs.index(leg)]

    def scalar(self) -> complex:
        if self.legs:
            raise TensorError(f"tensor still has legs {self.legs}")
        return complex(self.data)

    def transpose(self, legs: Sequence[int]) -> "LabeledTensor":
        legs = tuple(legs)
        if sorted(legs) != sorted(self.legs):
            raise TensorError(f"cannot reorder {self.legs} as {legs}")
        perm = [self.legs.index(e) for e in legs]
        return LabeledTensor(legs, self.data.transpose(perm))

    def relabel(self, mapping: dict[int, int]) -> "LabeledTensor":
        return LabeledTensor(tuple(mapping.get(e, e) for e in self.legs), self.data)

    def __mul__(self, c) -> "LabeledTensor":
        return LabeledTensor(self.legs, self.data * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "LabeledTensor":
        return LabeledTensor(self.legs, self.data / c)


def scalar_tensor(value: complex) -> LabeledTensor:
    return LabeledTensor((), np.asarray(value, dtype=np.complex128))


def contract(a: LabeledTensor, b: LabeledTensor) -> LabeledTensor:
    """Sum over all shared legs; result legs are a's survivors then b's."""
    shared = [e for e in a.legs if e in b.legs]
    ia = [a.legs.index(e) for e in shared]
    ib = [b.legs.index(e) for e in shared]
    for e, i, j in zip(shared, ia, ib):
        if a.data.shape[i] != b.data.shape[j]:
            raise TensorError(
                f"leg {e}: dimension {a.data.shape[i]} != {b.data.shape[j]}"
            )
    data = np.tensordot(a.data, b.data, axes=(ia, ib))
    legs = tuple(e for e in a.legs if e not in shared) + tuple(
        e for e in b.legs if e not in shared
    )
    return LabeledTensor(legs, data)


def contract_all(tensors: Iterable[LabeledTensor]) -> LabeledTensor:
    """Fold :func:`contract` left to right in the given order."""
    return reduce(contract, tensors, scalar_tensor(1.0))


@dataclass(frozen=True, eq=False)
class MessageVector:
    direction: tuple[int, int]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim != 1:
            raise TensorError("message must be a vector")
        if not np.all(np.isfinite(vals)):
            raise TensorError("message has non-finite entries")
        object.__setattr__(self, "values", vals)


def _values(mu) -> np.ndarray:
    return mu.values if isinstance(mu, MessageVector) else np.asarray(mu)


def overlap(mu_fwd, mu_bwd) -> complex:
    """Bilinear overlap ``sum_i a_i b_i`` (no complex conjugation)."""
    if isinstance(mu_fwd, MessageVector) and isinstance(mu_bwd, MessageVector):
        if mu_fwd.direction != mu_bwd.direction[::-1]:
            raise TensorError(
                f"messages {mu_fwd.direction} and {mu_bwd.direction} are not a pair"
            )
    a, b = _values(mu_fwd), _values(mu_bwd)
    if a.shape != b.shape:
        raise TensorError(f"length mismatch {a.shape} vs {b.shape}")
    return complex(np.dot(a, b))


def principal_sqrt(z: complex) -> complex:
    """Principal square root, branch cut on the negative real axis."""
    if z == 0:
        raise DegenerateFixedPointError("square root of a vanishing overlap")
    z = complex(z)
    # -0.0 imaginary part would put a negative real z below the cut
    return cmath.sqrt(complex(z.real, z.imag + 0.0))
