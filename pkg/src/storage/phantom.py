"""
Synthetic spectral scenes for desk-scale experiments

A phantom is a sum of spatial Gaussian blobs. Every blob carries a smooth
nonnegative spectral signature made of three Gaussian spectral profiles over a
constant floor, and the resulting cube is scaled so its maximum is exactly 1.
"""

import numpy as np

from src.errors import ArgumentError
from src.tensors.tensor_core import Tensor3

SPECTRAL_PROFILES = 3
MIN_WIDTH_BANDS = 6.0
SIGNATURE_FLOOR = 0.4


def spectral_signature(L: int, rng: np.random.Generator) -> np.ndarray:
    """
    Random mixture of Gaussian spectral profiles on a floor, peak 1

    Profile widths are measured in band steps and never fall below
    MIN_WIDTH_BANDS, so the step between adjacent bands stays under half
    of the signature's minimum for any L. A phantom built from such
    signatures changes by less than half its maximum between bands.
    """
    bands = np.arange(L, dtype=float)
    span = max(L - 1, 1)
    centers = rng.uniform(0.0, span, SPECTRAL_PROFILES)
    widths = np.maximum(rng.uniform(0.35, 0.7, SPECTRAL_PROFILES) * span, MIN_WIDTH_BANDS)
    weights = rng.uniform(0.2, 1.0, SPECTRAL_PROFILES)
    profile = np.sum(weights[:, None] * np.exp(-0.5 * ((bands[None, :] - centers[:, None]) / widths[:, None]) ** 2),
                     axis=0)
    signature = SIGNATURE_FLOOR + (1.0 - SIGNATURE_FLOOR) * profile / profile.max()
    return signature / signature.max()


def make_phantom(M: int, N: int, L: int, blobs: int = 6, seed: int = 0) -> Tensor3:
    """
    Build a blob phantom

    Args:
        M, N, L (int): cube extents
        blobs (int): number of Gaussian blobs, >= 1
        seed (int): generator seed

    Returns:
        Tensor3: cube in [0, 1] with maximum exactly 1
    """
    if min(M, N, L) < 1:
        raise ArgumentError(f"phantom extents must be >= 1, got {(M, N, L)}")
    if blobs < 1:
        raise ArgumentError(f"blob count must be >= 1, got {blobs}")
    rng = np.random.default_rng(seed)
    rows, cols = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
    scale = min(M, N)
    cube = np.zeros((M, N, L))
    for _ in range(blobs):
        center_m, center_n = rng.uniform(0, M), rng.uniform(0, N)
        sigma = rng.uniform(0.1, 0.25) * scale
        amplitude = rng.uniform(0.5, 1.0)
        spatial = amplitude * np.exp(-((rows - center_m) ** 2 + (cols - center_n) ** 2) / (2.0 * sigma ** 2))
        cube += spatial[:, :, None] * spectral_signature(L, rng)[None, None, :]
    return Tensor3(cube / cube.max())
