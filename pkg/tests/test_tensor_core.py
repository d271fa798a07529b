#!/usr/bin/env python3
"""
Test script for the tensor core

Checks mode-n products, unfoldings, the dispersive shift and the
vectorization order against hand-computed values.

Usage:
python tests/test_tensor_core.py
"""

import os
import sys

import numpy as np
import pytest

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.errors import ArgumentError, ShapeError
from src.tensors.tensor_core import (Matrix, Tensor3, devectorize, mode_product, shift_slice,
                                     unfold, vectorize)


def random_tensor(dims, seed=0):
    return Tensor3(np.random.default_rng(seed).standard_normal(dims))


def test_identity_product_is_exact():
    t = random_tensor((3, 4, 2))
    for mode, extent in zip((1, 2, 3), t.dims):
        assert np.array_equal(mode_product(t, Matrix.identity(extent), mode).values, t.values)


def test_mode1_product_by_hand():
    t = Tensor3(np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None])
    out = mode_product(t, Matrix([[1.0, 1.0], [0.0, 1.0]]), 1)
    assert np.array_equal(out.band(0), [[4.0, 6.0], [3.0, 4.0]])


def test_products_on_distinct_modes_commute():
    rng = np.random.default_rng(1)
    t = random_tensor((3, 4, 2))
    a, b = Matrix(rng.standard_normal((5, 3))), Matrix(rng.standard_normal((2, 4)))
    first = mode_product(mode_product(t, a, 1), b, 2).values
    second = mode_product(mode_product(t, b, 2), a, 1).values
    assert np.allclose(first, second, rtol=1e-12, atol=1e-12)


def test_product_is_linear_in_the_matrix():
    rng = np.random.default_rng(2)
    t = random_tensor((3, 4, 2))
    a, b = rng.standard_normal((6, 2)), rng.standard_normal((6, 2))
    lhs = mode_product(t, Matrix(2.0 * a - 0.5 * b), 3).values
    rhs = 2.0 * mode_product(t, Matrix(a), 3).values - 0.5 * mode_product(t, Matrix(b), 3).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_product_shape_error_names_mode_and_extents():
    t = random_tensor((3, 4, 2))
    with pytest.raises(ShapeError, match="mode-2.*4.*3"):
        mode_product(t, Matrix(np.ones((2, 3))), 2)


def test_unfold_column_order():
    t = Tensor3(np.arange(12, dtype=float).reshape(2, 3, 2))
    u = unfold(t, 1)
    assert u.values.shape == (2, 6)
    # column n + N * ell
    for m in range(2):
        for n in range(3):
            for ell in range(2):
                assert u.values[m, n + 3 * ell] == t.values[m, n, ell]
    assert unfold(Tensor3([[[7.0]]]), 2).values.tolist() == [[7.0]]


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_unfold_matches_mode_product(mode):
    rng = np.random.default_rng(mode)
    t = random_tensor((3, 4, 2), seed=mode)
    a = Matrix(rng.standard_normal((5, t.dims[mode - 1])))
    assert np.allclose(unfold(mode_product(t, a, mode), mode).values, a.values @ unfold(t, mode).values,
                       rtol=1e-12, atol=1e-12)


def test_shift_slice():
    x = Matrix([[1.0, 2.0], [3.0, 4.0]])
    assert shift_slice(x, 0, 2).values.tolist() == [[1, 2, 0], [3, 4, 0]]
    assert shift_slice(x, 1, 2).values.tolist() == [[0, 1, 2], [0, 3, 4]]
    assert shift_slice(x, 1, 3).values.sum() == x.values.sum()
    with pytest.raises(ArgumentError):
        shift_slice(x, 2, 2)


def test_vectorize_order_and_inverse():
    assert vectorize(Tensor3(np.array([5.0, 7.0]).reshape(1, 1, 2))).tolist() == [5.0, 7.0]
    t = random_tensor((3, 4, 2))
    v = vectorize(t)
    # first plane is band 0, row-major
    assert np.array_equal(v[:12], t.band(0).reshape(-1))
    assert np.array_equal(devectorize(v, t.dims).values, t.values)
    assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(t.values), rel=1e-15)
    with pytest.raises(ShapeError):
        devectorize(v[:-1], t.dims)


def test_values_are_read_only():
    t = random_tensor((2, 2, 2))
    with pytest.raises(ValueError):
        t.values[0, 0, 0] = 1.0
    with pytest.raises(ShapeError):
        Tensor3(np.zeros((2, 0, 1)))


def main():
    """Run all tests"""
    print("Tensor Core - Test Suite")
    print("=" * 50)
    return pytest.main([__file__, "-v"])


if __name__ == "__main__":
    sys.exit(main())
