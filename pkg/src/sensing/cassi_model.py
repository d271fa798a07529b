"""
CASSI sensing model

Each shot codes the scene with a transmission mask, shifts band ell by ell
columns (the prism) and integrates all bands on the detector:

    Y(s) = sum_ell shift_ell( X_ell * C(s)_ell )

so every detector image is M x (N + L - 1). Shots are stacked shot-major into
the measurement vector y. The adjoint un-shifts, masks and sums over shots.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from src.config import load_settings
from src.errors import ArgumentError, OracleRefusalError, ShapeError
from src.tensors.tensor_core import Dims, Matrix, Tensor3

logger = logging.getLogger(__name__)

BINARY = "binary-spatial"
COLORED = "colored-spectral"
APERTURE_KINDS = (BINARY, COLORED)


@dataclass(frozen=True, eq=False)
class CodedApertureSet:
    """
    Coded apertures for S shots

    codes has shape (S, M, N) for the binary kind and (S, M, N, L) for the
    colored kind, where plane [..., ell] is the per-pixel response in band ell.
    """

    kind: str
    codes: np.ndarray

    def __post_init__(self):
        if self.kind not in APERTURE_KINDS:
            raise ArgumentError(f"unknown aperture kind {self.kind!r}")
        codes = np.array(self.codes, dtype=np.float64)
        expected_ndim = 3 if self.kind == BINARY else 4
        if codes.ndim != expected_ndim:
            raise ShapeError(f"{self.kind} codes need {expected_ndim} axes, got {codes.ndim}")
        if codes.shape[0] < 1:
            raise ShapeError("an aperture set needs at least one shot")
        if self.kind == BINARY:
            if not np.all((codes == 0.0) | (codes == 1.0)):
                raise ArgumentError("binary code entries must be 0 or 1")
        elif np.any(codes < 0.0) or np.any(codes > 1.0):
            raise ArgumentError("colored code entries must lie in [0, 1]")
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)

    @property
    def shots(self) -> int:
        return self.codes.shape[0]

    @property
    def spatial_dims(self) -> Tuple[int, int]:
        return self.codes.shape[1], self.codes.shape[2]

    def shot_code(self, s: int) -> np.ndarray:
        return self.codes[s]

    def shot_mask(self, s: int, L: int) -> np.ndarray:
        """Per-band M x N x L mask of shot s"""
        return _as_mask(self.codes[s], L)

    def check_dims(self, dims: Dims) -> None:
        M, N, L = dims
        if self.spatial_dims != (M, N):
            raise ShapeError(f"aperture is {self.spatial_dims}, scene is {(M, N)}")
        if self.kind == COLORED and self.codes.shape[3] != L:
            raise ShapeError(f"colored aperture has {self.codes.shape[3]} bands, scene has {L}")


@dataclass(frozen=True)
class Provenance:
    seed: Optional[int] = None
    snr_db: float = float("inf")
    aperture_kind: str = BINARY


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Detector images of every shot, shape (S, M, N + L - 1)"""

    images: np.ndarray
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        images = np.array(self.images, dtype=np.float64)
        if images.ndim != 3:
            raise ShapeError(f"measurement images need 3 axes (S, M, cols), got {images.ndim}")
        images.flags.writeable = False
        object.__setattr__(self, "images", images)

    @property
    def shots(self) -> int:
        return self.images.shape[0]

    @property
    def cols(self) -> int:
        return self.images.shape[2]

    @property
    def y(self) -> np.ndarray:
        """Stacked vector [vect(Y1), ..., vect(YS)], each image row-major"""
        return self.images.reshape(-1)

    def check_consistent(self, aperture: CodedApertureSet, dims: Dims) -> None:
        M, N, L = dims
        aperture.check_dims(dims)
        if self.images.shape != (aperture.shots, M, N + L - 1):
            raise ShapeError(
                f"measurements {self.images.shape} do not match {aperture.shots} shots of "
                f"{M}x{N + L - 1} detector images"
            )

    @classmethod
    def from_vector(cls, y: np.ndarray, shots: int, M: int, cols: int,
                    provenance: Optional[Provenance] = None) -> "MeasurementSet":
        y = np.asarray(y, dtype=np.float64)
        if y.size != shots * M * cols:
            raise ShapeError(f"vector of length {y.size} cannot hold {shots}x{M}x{cols} images")
        return cls(y.reshape(shots, M, cols), provenance or Provenance())


def _as_mask(code: np.ndarray, L: int) -> np.ndarray:
    code = np.asarray(code, dtype=np.float64)
    if code.ndim == 2:
        return np.repeat(code[:, :, None], L, axis=2)
    if code.ndim == 3 and code.shape[2] == L:
        return code
    raise ShapeError(f"code of shape {code.shape} cannot mask {L} bands")


def generate_aperture(kind: str, M: int, N: int, L: int, S: int,
                      transmittance: float = 0.5, seed: int = 0) -> CodedApertureSet:
    """
    Draw random coded apertures

    Binary codes are i.i.d. Bernoulli(transmittance) per pixel; colored codes
    are i.i.d. Bernoulli(transmittance) per (pixel, band), i.e. a random
    pass/block filter at every pixel.

    Args:
        kind (str): "binary-spatial" or "colored-spectral"
        M, N, L (int): scene extents (L only shapes colored codes)
        S (int): number of shots
        transmittance (float): pass probability, strictly inside (0, 1)
        seed (int): generator seed

    Returns:
        CodedApertureSet: codes deterministic in (seed, dims)
    """
    if not 0.0 < transmittance < 1.0:
        raise ArgumentError(f"transmittance must lie in (0, 1), got {transmittance}")
    if S < 1:
        raise ArgumentError(f"shot count must be >= 1, got {S}")
    if kind not in APERTURE_KINDS:
        raise ArgumentError(f"unknown aperture kind {kind!r}")
    rng = np.random.default_rng(seed)
    shape = (S, M, N) if kind == BINARY else (S, M, N, L)
    codes = (rng.random(shape) < transmittance).astype(np.float64)
    return CodedApertureSet(kind, codes)


def forward_shot(x: Tensor3, code: np.ndarray) -> Matrix:
    """Detector image of one shot"""
    M, N, L = x.dims
    mask = _as_mask(code, L)
    if mask.shape != x.dims:
        raise ShapeError(f"code {mask.shape[:2]} does not match scene {(M, N)}")
    coded = x.values * mask
    image = np.zeros((M, N + L - 1))
    for ell in range(L):
        image[:, ell:ell + N] += coded[:, :, ell]
    return Matrix(image)


def forward(x: Tensor3, aperture: CodedApertureSet) -> MeasurementSet:
    """Apply H: one detector image per shot, stacked in shot order"""
    aperture.check_dims(x.dims)
    images = np.stack([forward_shot(x, aperture.shot_code(s)).values
                       for s in range(aperture.shots)])
    return MeasurementSet(images, Provenance(aperture_kind=aperture.kind))


def adjoint(measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims) -> Tensor3:
    """Apply H^T to the stacked measurements"""
    measurements.check_consistent(aperture, dims)
    M, N, L = dims
    result = np.zeros(dims)
    for s in range(aperture.shots):
        image = measurements.images[s]
        mask = aperture.shot_mask(s, L)
        for ell in range(L):
            result[:, :, ell] += image[:, ell:ell + N] * mask[:, :, ell]
    return Tensor3(result)


def build_dense_oracle(aperture: CodedApertureSet, dims: Dims,
                       max_columns: Optional[int] = None) -> Matrix:
    """
    Materialize H as an S*M*(N+L-1) x M*N*L matrix

    Rows follow the stacked measurement vector, columns follow vectorize().
    Only meant for small test instances.
    """
    if max_columns is None:
        max_columns = load_settings().oracle_max_columns
    M, N, L = dims
    columns = M * N * L
    if columns > max_columns:
        raise OracleRefusalError(
            f"dense oracle would have {columns} columns (cap {max_columns}); "
            "use forward()/adjoint() instead"
        )
    aperture.check_dims(dims)
    cols = N + L - 1
    H = np.zeros((aperture.shots * M * cols, columns))
    m, n, ell = np.meshgrid(np.arange(M), np.arange(N), np.arange(L), indexing="ij")
    col_index = ell * M * N + m * N + n
    for s in range(aperture.shots):
        mask = aperture.shot_mask(s, L)
        row_index = s * M * cols + m * cols + (n + ell)
        H[row_index.ravel(), col_index.ravel()] = mask.ravel()
    return Matrix(H)


def add_noise(measurements: MeasurementSet, snr_db: float, seed: int = 0) -> MeasurementSet:
    """
    Add white Gaussian noise at a given signal-to-noise ratio

    The noise variance is ||y||^2 / (len(y) * 10^(snr_db / 10)), computed on
    the stacked vector. An infinite SNR returns the input unchanged.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return measurements
    if not np.isfinite(snr_db):
        raise ArgumentError(f"SNR must be finite or +inf, got {snr_db}")
    y = measurements.y
    energy = float(np.dot(y, y))
    if energy == 0.0:
        raise ArgumentError("cannot set a finite SNR on zero-energy measurements")
    sigma = np.sqrt(energy / (y.size * 10.0 ** (snr_db / 10.0)))
    rng = np.random.default_rng(seed)
    noisy = y + sigma * rng.standard_normal(y.size)
    provenance = replace(measurements.provenance, seed=seed, snr_db=float(snr_db))
    logger.debug(f"Added noise at {snr_db} dB (sigma={sigma:.3e})")
    return MeasurementSet(noisy.reshape(measurements.images.shape), provenance)


def measurement_count(shots: int, dims: Dims) -> int:
    M, N, L = dims
    return shots * M * (N + L - 1)


def check_compression(shots: int, dims: Dims) -> bool:
    """
    Check that the measurements are fewer than the voxels

    S < L with N >= L is compressive only when S*(N+L-1) < N*L, which fails
    for e.g. S=3, L=4, N=4, so a non-compressive setting is logged rather
    than treated as fatal.

    Returns:
        bool: True when S*M*(N+L-1) < M*N*L
    """
    M, N, L = dims
    compressive = measurement_count(shots, dims) < M * N * L
    if not compressive:
        logger.warning(
            f"{shots} shot(s) give {measurement_count(shots, dims)} measurements for "
            f"{M * N * L} voxels: not a compressive setting"
        )
    return compressive
