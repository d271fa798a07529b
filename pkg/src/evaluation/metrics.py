"""
Reconstruction quality metrics for spectral cubes

PSNR and SSIM are computed per band and averaged over bands; SAM is the
spectral angle averaged over spatial positions. Cubes are assumed to be
normalized to [0, 1], so the PSNR peak and SSIM dynamic range are both 1.
"""

import logging
from typing import Tuple

import numpy as np
import pandas as pd
from skimage.metrics import structural_similarity

from src.errors import ArgumentError, ShapeError
from src.tensors.tensor_core import Tensor3

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_dims(ref: Tensor3, rec: Tensor3) -> None:
    if ref.dims != rec.dims:
        raise ShapeError(f"reference {ref.dims} and reconstruction {rec.dims} differ in shape")


def band_psnr(ref: Tensor3, rec: Tensor3) -> np.ndarray:
    """PSNR of every band in dB, zero-MSE bands capped"""
    _check_dims(ref, rec)
    mse = np.mean((ref.values - rec.values) ** 2, axis=(0, 1))
    with np.errstate(divide="ignore"):
        values = 10.0 * np.log10(1.0 / mse)
    return np.where(mse == 0.0, PSNR_CAP_DB, np.minimum(values, PSNR_CAP_DB))


def psnr(ref: Tensor3, rec: Tensor3) -> float:
    """Band-averaged PSNR with peak 1.0"""
    return float(np.mean(band_psnr(ref, rec)))


def ssim(ref: Tensor3, rec: Tensor3) -> float:
    """
    Band-averaged SSIM

    Gaussian 11x11 window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.
    """
    _check_dims(ref, rec)
    M, N, L = ref.dims
    if min(M, N) < SSIM_WINDOW:
        raise ArgumentError(f"SSIM needs spatial extents >= {SSIM_WINDOW}, got {M}x{N}")
    scores = [
        structural_similarity(
            ref.band(ell), rec.band(ell),
            data_range=1.0, gaussian_weights=True, sigma=SSIM_SIGMA,
            use_sample_covariance=False, K1=SSIM_K1, K2=SSIM_K2,
        )
        for ell in range(L)
    ]
    return float(np.mean(scores))


def spectral_angles(ref: Tensor3, rec: Tensor3) -> Tuple[np.ndarray, int]:
    """
    Spectral angle at every pixel where both spectra are nonzero

    Returns:
        tuple: (angles in radians of the kept pixels, number of skipped pixels)
    """
    _check_dims(ref, rec)
    L = ref.dims[2]
    r = ref.values.reshape(-1, L)
    x = rec.values.reshape(-1, L)
    norm_r = np.linalg.norm(r, axis=1)
    norm_x = np.linalg.norm(x, axis=1)
    keep = (norm_r > 0.0) & (norm_x > 0.0)
    # angle between unit vectors as 2*atan2(|a-b|, |a+b|); exactly 0 for equal spectra
    unit_r = r[keep] / norm_r[keep, None]
    unit_x = x[keep] / norm_x[keep, None]
    angles = 2.0 * np.arctan2(np.linalg.norm(unit_r - unit_x, axis=1), np.linalg.norm(unit_r + unit_x, axis=1))
    return angles, int(np.count_nonzero(~keep))


def sam(ref: Tensor3, rec: Tensor3) -> float:
    """Mean spectral angle in radians"""
    angles, skipped = spectral_angles(ref, rec)
    if skipped:
        logger.info(f"SAM skipped {skipped} pixel(s) with a zero spectrum")
    if angles.size == 0:
        logger.warning("SAM undefined: every pixel has a zero spectrum; reporting 0")
        return 0.0
    return float(np.mean(angles))


def metrics_row(name: str, ref: Tensor3, rec: Tensor3) -> dict:
    return {"name": name, "psnr_db": psnr(ref, rec), "ssim": ssim(ref, rec), "sam_rad": sam(ref, rec)}


def metrics_table(rows) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=["name", "psnr_db", "ssim", "sam_rad"])
