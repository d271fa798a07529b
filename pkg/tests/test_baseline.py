#!/usr/bin/env python3
"""
Test script for the reference reconstructions

Usage:
python tests/test_baseline.py
"""

import os
import sys

import numpy as np
import pytest

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.errors import ArgumentError
from src.sensing.cassi_model import (BINARY, CodedApertureSet, MeasurementSet, build_dense_oracle, forward,
                                     generate_aperture)
from src.solvers.baseline import (LIPSCHITZ_MARGIN, FistaDCTSolver, back_projection, dct_matrix, fista_dct,
                                  sensing_weights, soft_threshold)
from src.storage.phantom import make_phantom
from src.tensors.tensor_core import Tensor3, vectorize


def test_back_projection_recovers_identity_sensing():
    scene = make_phantom(5, 6, 1, blobs=2, seed=0)
    aperture = CodedApertureSet(BINARY, np.ones((1, 5, 6)))
    assert np.allclose(back_projection(forward(scene, aperture), aperture, scene.dims).values, scene.values,
                       rtol=0, atol=1e-15)


def test_back_projection_of_zero_and_linearity():
    dims = (6, 6, 3)
    aperture = generate_aperture(BINARY, *dims, 2, seed=1)
    zero = MeasurementSet(np.zeros((2, 6, 8)))
    assert not back_projection(zero, aperture, dims).values.any()
    rng = np.random.default_rng(0)
    a, b = MeasurementSet(rng.standard_normal((2, 6, 8))), MeasurementSet(rng.standard_normal((2, 6, 8)))
    combined = MeasurementSet(3.0 * a.images - b.images)
    expected = 3.0 * back_projection(a, aperture, dims).values - back_projection(b, aperture, dims).values
    assert np.allclose(back_projection(combined, aperture, dims).values, expected, rtol=1e-12, atol=1e-12)


def test_sensing_weights_match_oracle_row_sums():
    dims = (6, 6, 3)
    aperture = generate_aperture(BINARY, *dims, 2, seed=2)
    H = build_dense_oracle(aperture, dims).values
    assert np.allclose(vectorize(Tensor3(sensing_weights(aperture, dims))), H.T.sum(axis=1), rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 8, 32])
def test_dct_basis_is_orthogonal(n):
    d = dct_matrix(n)
    assert np.abs(d.T @ d - np.eye(n)).max() <= 1e-12


def test_soft_threshold():
    assert soft_threshold(1.5, 1.0) == 0.5
    assert soft_threshold(-0.3, 1.0) == 0.0
    assert soft_threshold(-2.0, 0.5) == -1.5


def test_large_lambda_gives_zero_solution():
    scene = make_phantom(8, 8, 4, seed=1)
    aperture = generate_aperture(BINARY, 8, 8, 4, 1, seed=3)
    measurements = forward(scene, aperture)
    solver = FistaDCTSolver(measurements, aperture, scene.dims)
    lam = solver.default_lambda() / 0.01
    assert not solver.solve(lam, iterations=10).values.any()


def test_objective_is_monotone_and_improves_on_zero():
    scene = make_phantom(16, 16, 6, seed=4)
    aperture = generate_aperture(BINARY, 16, 16, 6, 2, seed=5)
    measurements = forward(scene, aperture)
    solver = FistaDCTSolver(measurements, aperture, scene.dims)
    solver.solve(iterations=60)
    history = np.array(solver.objective_history)
    assert len(history) == 61
    assert np.all(np.diff(history) <= 0.0)
    assert history[-1] < history[0]


def test_lipschitz_estimate_matches_oracle():
    dims = (6, 6, 3)
    aperture = generate_aperture(BINARY, *dims, 2, seed=6)
    H = build_dense_oracle(aperture, dims).values
    solver = FistaDCTSolver(forward(Tensor3(np.ones(dims)), aperture), aperture, dims)
    largest = np.linalg.norm(H, 2) ** 2
    estimate = solver.estimate_lipschitz()
    assert estimate <= largest * (1 + 1e-9)
    assert estimate >= 0.75 * largest

    solver.solve(lam=1e-3, iterations=3)
    assert solver.step_size == pytest.approx(1.0 / (LIPSCHITZ_MARGIN * estimate), rel=1e-15)
    assert solver.step_size * estimate < 1.0


def test_invalid_arguments():
    scene = make_phantom(6, 6, 3)
    aperture = generate_aperture(BINARY, 6, 6, 3, 1)
    measurements = forward(scene, aperture)
    with pytest.raises(ArgumentError):
        fista_dct(measurements, aperture, scene.dims, lam=0.0)
    with pytest.raises(ArgumentError):
        fista_dct(measurements, aperture, scene.dims, iterations=0)


def main():
    """Run all tests"""
    print("Baselines - Test Suite")
    print("=" * 50)
    return pytest.main([__file__, "-v"])


if __name__ == "__main__":
    sys.exit(main())
