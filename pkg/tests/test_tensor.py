import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpcluster.errors import DegenerateFixedPointError, TensorError
from bpcluster.tensor import (
    LabeledTensor,
    MessageVector,
    contract,
    contract_all,
    overlap,
    principal_sqrt,
    scalar_tensor,
)


def test_labeled_tensor_validation():
    with pytest.raises(TensorError):
        LabeledTensor((0, 1), np.zeros(3))
    with pytest.raises(TensorError):
        LabeledTensor((0, 0), np.zeros((2, 2)))
    t = LabeledTensor((3, 7), np.arange(6).reshape(2, 3))
    assert t.dims == (2, 3) and t.dim(7) == 3
    assert t.data.dtype == np.complex128


def test_contract_matches_einsum(rng):
    a = LabeledTensor((0, 1, 2), rng.standard_normal((2, 3, 4)))
    b = LabeledTensor((2, 5, 1), rng.standard_normal((4, 2, 3)))
    c = contract(a, b)
    assert c.legs == (0, 5)
    np.testing.assert_allclose(c.data, np.einsum("abc,cdb->ad", a.data, b.data), atol=1e-13)


def test_contract_dimension_mismatch():
    with pytest.raises(TensorError):
        contract(LabeledTensor((0,), np.ones(2)), LabeledTensor((0,), np.ones(3)))


def test_identity_contraction_relabels(rng):
    t = LabeledTensor((0, 1), rng.standard_normal((3, 2)))
    eye = LabeledTensor((1, 9), np.eye(2))
    out = contract(t, eye)
    assert out.legs == (0, 9)
    np.testing.assert_array_equal(out.data, t.data)


def test_contract_all_and_scalar():
    vs = [LabeledTensor((0,), [1.0, 2.0]), LabeledTensor((0, 1), np.eye(2)), LabeledTensor((1,), [3.0, 4.0])]
    assert contract_all(vs).scalar() == 11.0
    assert contract_all([]).scalar() == 1.0
    assert scalar_tensor(2 + 1j).scalar() == 2 + 1j
    with pytest.raises(TensorError):
        vs[0].scalar()


def test_transpose_and_relabel():
    t = LabeledTensor((4, 5), np.arange(6).reshape(2, 3))
    assert t.transpose((5, 4)).data.shape == (3, 2)
    assert t.relabel({4: 0}).legs == (0, 5)
    with pytest.raises(TensorError):
        t.transpose((4, 6))


def test_overlap_is_bilinear_and_checks_direction():
    a = MessageVector((0, 1), [1j, 1.0])
    b = MessageVector((1, 0), [1j, 2.0])
    assert overlap(a, b) == -1 + 2
    assert overlap(a, b) == overlap(b, a)
    with pytest.raises(TensorError):
        overlap(a, MessageVector((0, 1), [1.0, 0.0]))
    with pytest.raises(TensorError):
        overlap(np.ones(2), np.ones(3))
    with pytest.raises(TensorError):
        MessageVector((0, 1), [np.nan, 1.0])


def test_principal_sqrt_branch():
    assert principal_sqrt(-4 + 0j) == 2j
    assert principal_sqrt(complex(-4.0, -0.0)) == 2j
    assert abs(principal_sqrt(-1 - 1e-12j) - (-1j)) < 1e-9
    with pytest.raises(DegenerateFixedPointError):
        principal_sqrt(0)


@settings(max_examples=60, deadline=None)
@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_principal_sqrt_squares_back(z):
    r = principal_sqrt(z)
    assert abs(r * r - z) <= 1e-12 * abs(z)
    assert r.real >= 0 or (r.real == 0 and r.imag >= 0) or abs(cmath.phase(r)) <= cmath.pi / 2 + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_contract_associative(d0, d1, d2, seed):
    r = np.random.default_rng(seed)
    a = LabeledTensor((0, 1), r.standard_normal((d0, d1)))
    b = LabeledTensor((1, 2), r.standard_normal((d1, d2)))
    c = LabeledTensor((2, 0), r.standard_normal((d2, d0)))
    x = contract(contract(a, b), c).scalar()
    y = contract(a, contract(b, c)).scalar()
    assert abs(x - y) <= 1e-12 * max(1.0, abs(x))
