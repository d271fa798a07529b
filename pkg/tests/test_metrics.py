#!/usr/bin/env python3
"""
Test script for the quality metrics

Usage:
python tests/test_metrics.py
"""

import os
import sys

import numpy as np
import pytest

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.errors import ArgumentError, ShapeError
from src.evaluation.metrics import (PSNR_CAP_DB, band_psnr, metrics_row, metrics_table, psnr, sam,
                                    spectral_angles, ssim)
from src.storage.phantom import make_phantom
from src.tensors.tensor_core import Tensor3


@pytest.fixture
def scene():
    return make_phantom(16, 16, 5, seed=3)


def test_psnr_cap_and_known_value(scene):
    assert psnr(scene, scene) == PSNR_CAP_DB
    ones = Tensor3(np.ones((4, 3, 2)))
    assert psnr(ones, Tensor3(np.full((4, 3, 2), 0.9))) == pytest.approx(20.0, abs=1e-9)


def test_psnr_band_average():
    ref = Tensor3(np.zeros((4, 4, 3)))
    rec = np.zeros((4, 4, 3))
    rec[:, :, 0] = 0.1
    bands = band_psnr(ref, Tensor3(rec))
    assert bands[0] == pytest.approx(20.0)
    assert bands[1] == bands[2] == PSNR_CAP_DB
    assert psnr(ref, Tensor3(rec)) == pytest.approx((20.0 + 200.0) / 3)


def test_psnr_decreases_with_noise(scene):
    levels = [0.01, 0.05, 0.2]
    medians = []
    for sigma in levels:
        values = [psnr(scene, Tensor3(scene.values + sigma * np.random.default_rng(seed).standard_normal(scene.dims)))
                  for seed in range(5)]
        medians.append(np.median(values))
    assert medians[0] > medians[1] > medians[2]


def test_ssim_identity_symmetry_and_inversion(scene):
    assert ssim(scene, scene) == 1.0
    noisy = Tensor3(np.clip(scene.values + 0.1 * np.random.default_rng(0).standard_normal(scene.dims), 0, 1))
    assert ssim(scene, noisy) == pytest.approx(ssim(noisy, scene), abs=1e-12)
    checker = (np.indices((16, 16)).sum(axis=0) // 2 % 2).astype(float)
    pattern = Tensor3(np.repeat(checker[:, :, None], 2, axis=2))
    assert ssim(pattern, Tensor3(1.0 - pattern.values)) < 0.3


def test_ssim_needs_a_full_window():
    small = Tensor3(np.ones((10, 16, 2)))
    with pytest.raises(ArgumentError):
        ssim(small, small)


def test_sam_cases(scene):
    assert sam(scene, scene) == 0.0
    assert sam(scene, Tensor3(3.0 * scene.values)) == pytest.approx(0.0, abs=1e-12)
    values = np.random.default_rng(8).uniform(0.01, 1.0, (9, 7, 31))
    angles, _ = spectral_angles(Tensor3(values), Tensor3(values.copy()))
    assert np.all(angles == 0.0)
    ref = np.zeros((3, 3, 2))
    rec = np.zeros((3, 3, 2))
    ref[:, :, 0] = 1.0
    rec[:, :, 1] = 2.0
    assert sam(Tensor3(ref), Tensor3(rec)) == pytest.approx(np.pi / 2)


def test_sam_skips_zero_spectra():
    ref = np.ones((2, 2, 3))
    rec = np.ones((2, 2, 3))
    rec[0, 0, :] = 0.0
    angles, skipped = spectral_angles(Tensor3(ref), Tensor3(rec))
    assert skipped == 1 and angles.size == 3
    assert sam(Tensor3(np.zeros((2, 2, 3))), Tensor3(rec)) == 0.0


def test_band_permutation_equivariance(scene):
    rec = Tensor3(np.clip(scene.values * 0.8 + 0.05, 0, 1))
    order = [3, 0, 4, 1, 2]
    permuted_ref, permuted_rec = Tensor3(scene.values[:, :, order]), Tensor3(rec.values[:, :, order])
    assert psnr(permuted_ref, permuted_rec) == pytest.approx(psnr(scene, rec), abs=1e-12)
    assert ssim(permuted_ref, permuted_rec) == pytest.approx(ssim(scene, rec), abs=1e-12)
    assert sam(permuted_ref, permuted_rec) == pytest.approx(sam(scene, rec), abs=1e-12)


def test_dims_mismatch(scene):
    other = Tensor3(np.zeros((16, 16, 4)))
    for metric in (psnr, ssim, sam):
        with pytest.raises(ShapeError):
            metric(scene, other)


def test_metrics_table_columns(scene):
    table = metrics_table([metrics_row("same", scene, scene)])
    assert list(table.columns) == ["name", "psnr_db", "ssim", "sam_rad"]
    assert table.loc[0, "psnr_db"] == PSNR_CAP_DB


def main():
    """Run all tests"""
    print("Quality Metrics - Test Suite")
    print("=" * 50)
    return pytest.main([__file__, "-v"])


if __name__ == "__main__":
    sys.exit(main())
