"""
Experiment protocols driven by the CLI

- rank-factor sweep: PSNR/SSIM/SAM over rho values and random trials for
  one or more generator architectures (box-plot data)
- noise/shot grid: proposed method, DIP ablation and baselines over shot
  counts and SNR levels, summarized as one row per (shots, snr, metric)

Every cell is independent and seeded from (seed, cell keys), so cells can run
in a thread pool; rows are always emitted in cell order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import ArgumentError
from src.evaluation.metrics import metrics_row
from src.sensing.cassi_model import (CodedApertureSet, MeasurementSet, Provenance,
                                     add_noise, check_compression, forward, generate_aperture)
from src.solvers.baseline import back_projection, fista_dct
from src.solvers.deep_prior_solver import DIP_FIXED_INPUT, FULL, FitConfig, derive_seed, fit
from src.tensors.tensor_core import Tensor3

logger = logging.getLogger(__name__)

METHODS = ("prop", "dip", "bp", "fista-dct")
METRIC_LABELS = {"psnr_db": "PSNR", "ssim": "SSIM", "sam_rad": "SAM"}


def snr_label(snr_db: float) -> str:
    return "inf" if np.isinf(snr_db) else f"{snr_db:g}"


def simulate(scene: Tensor3, shots: int, snr_db: float, kind: str, transmittance: float,
             aperture_seed: int, noise_seed: int) -> Tuple[CodedApertureSet, MeasurementSet]:
    """Draw apertures, sense the scene and add noise"""
    M, N, L = scene.dims
    check_compression(shots, scene.dims)
    aperture = generate_aperture(kind, M, N, L, shots, transmittance, aperture_seed)
    clean = forward(scene, aperture)
    clean = MeasurementSet(clean.images, Provenance(seed=aperture_seed, aperture_kind=kind))
    return aperture, add_noise(clean, snr_db, noise_seed)


@dataclass(frozen=True)
class BaselineOptions:
    lam: Optional[float] = None
    iterations: int = 300


def reconstruct_with(method: str, measurements: MeasurementSet, aperture: CodedApertureSet,
                     dims, cfg: FitConfig, baseline: BaselineOptions) -> Tuple[Tensor3, Optional[float]]:
    """Run one method; returns (reconstruction, final data loss or None)"""
    if method == "prop":
        result = fit(measurements, aperture, dims, replace(cfg, mode=FULL))
        return result.reconstruction, result.final_loss
    if method == "dip":
        result = fit(measurements, aperture, dims, replace(cfg, mode=DIP_FIXED_INPUT))
        return result.reconstruction, result.final_loss
    if method == "bp":
        return back_projection(measurements, aperture, dims), None
    if method == "fista-dct":
        return fista_dct(measurements, aperture, dims, baseline.lam, baseline.iterations), None
    raise ArgumentError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _run_cells(cells: Sequence, run: Callable, workers: int) -> List:
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, cells))
    return [run(cell) for cell in cells]


def sweep_rho(scene: Tensor3, rhos: Sequence[float], trials: int, cfg: FitConfig,
              nets: Sequence[str] = ("resnet",), shots: int = 1, snr_db: float = float("inf"),
              kind: str = "binary-spatial", transmittance: float = 0.5, workers: int = 1) -> pd.DataFrame:
    """
    Rank-factor sweep on one simulated measurement

    One coded aperture is drawn for the whole sweep; trials differ in the
    random initialization of the generator and latent.

    Returns:
        DataFrame: one row per (net, rho, trial)
    """
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    aperture, measurements = simulate(scene, shots, snr_db, kind, transmittance,
                                      derive_seed(cfg.seed, 0), derive_seed(cfg.seed, 1))
    cells = [(net, rho, trial) for net in nets for rho in rhos for trial in range(trials)]

    def run(cell):
        net, rho, trial = cell
        trial_cfg = replace(cfg, arch=net, rho=rho, width=None if net != cfg.arch else cfg.width,
                            seed=derive_seed(cfg.seed, 2, trial), workers=1)
        result = fit(measurements, aperture, scene.dims, trial_cfg)
        row = {"net": net, "rho": rho, "trial": trial}
        row.update(metrics_row(f"{net}-rho{rho:g}-t{trial}", scene, result.reconstruction))
        row["final_loss"] = result.final_loss
        logger.info(f"sweep {net} rho={rho:g} trial {trial}: {row['psnr_db']:.2f} dB")
        return row

    rows = _run_cells(cells, run, workers)
    return pd.DataFrame(rows, columns=["net", "rho", "trial", "name", "psnr_db", "ssim", "sam_rad", "final_loss"])


def noise_shot_grid(scene: Tensor3, shots_list: Sequence[int], snrs: Sequence[float], trials: int,
                    cfg: FitConfig, methods: Sequence[str] = ("prop",), kind: str = "binary-spatial",
                    transmittance: float = 0.5, baseline: BaselineOptions = BaselineOptions(),
                    workers: int = 1) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Methods x shots x noise comparison

    For a given (shots, trial) every SNR level shares the aperture and the
    solver initialization, so rows differ only in the noise.

    Returns:
        tuple: (summary with one row per (shots, snr, metric) and a column
                per method holding the mean over trials, per-trial rows)
    """
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ArgumentError(f"unknown method(s) {', '.join(sorted(unknown))}")
    cells = [(shots, snr_index, trial) for shots in shots_list
             for snr_index in range(len(snrs)) for trial in range(trials)]

    def run(cell):
        shots, snr_index, trial = cell
        snr_db = snrs[snr_index]
        aperture, measurements = simulate(
            scene, shots, snr_db, kind, transmittance,
            derive_seed(cfg.seed, 3, shots, trial), derive_seed(cfg.seed, 4, shots, snr_index, trial))
        trial_cfg = replace(cfg, seed=derive_seed(cfg.seed, 5, shots, trial), workers=1)
        rows = []
        for method in methods:
            reconstruction, final_loss = reconstruct_with(method, measurements, aperture, scene.dims,
                                                          trial_cfg, baseline)
            row = {"shots": shots, "snr": snr_label(snr_db), "trial": trial, "method": method}
            row.update(metrics_row(method, scene, reconstruction))
            row["final_loss"] = final_loss
            rows.append(row)
        logger.info(f"grid cell shots={shots} snr={snr_label(snr_db)} trial {trial} done")
        return rows

    raw = pd.DataFrame([row for rows in _run_cells(cells, run, workers) for row in rows])
    return summarize_grid(raw, shots_list, snrs, methods), raw


def summarize_grid(raw: pd.DataFrame, shots_list: Sequence[int], snrs: Sequence[float],
                   methods: Sequence[str]) -> pd.DataFrame:
    means = raw.groupby(["shots", "snr", "method"], sort=False)[list(METRIC_LABELS)].mean()
    rows = []
    for shots in shots_list:
        for snr_db in snrs:
            label = snr_label(snr_db)
            for metric, metric_label in METRIC_LABELS.items():
                row = {"shots": shots, "snr": label, "metric": metric_label}
                for method in methods:
                    row[method] = means.loc[(shots, label, method), metric]
                rows.append(row)
    return pd.DataFrame(rows, columns=["shots", "snr", "metric", *methods])
