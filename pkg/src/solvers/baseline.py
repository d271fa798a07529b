"""
Reference reconstructions

- back_projection: H^T y normalized by the per-voxel sensing weight H^T 1
- fista_dct: l1-sparse recovery in a separable orthonormal 3-D DCT basis,
  solved with monotone FISTA

The DCT synthesis model is X = C x1 U' x2 V' x3 W' with U', V', W' the
inverse 1-D DCT matrices of each mode, and the objective

    1/2 || y - H vect(X) ||^2 + lambda || C ||_1
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.fft import dct

from src.errors import ArgumentError, NumericalError
from src.sensing.cassi_model import CodedApertureSet, MeasurementSet, adjoint, forward
from src.tensors.tensor_core import Dims, Matrix, Tensor3, mode_product

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 30
DEFAULT_LAMBDA_FRACTION = 0.01
# power iteration approaches the top eigenvalue from below
LIPSCHITZ_MARGIN = 1.02


def back_projection(measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims) -> Tensor3:
    """Weighted H^T y; voxels no detector pixel sees are set to zero"""
    back = adjoint(measurements, aperture, dims).values
    ones = MeasurementSet(np.ones_like(measurements.images))
    weights = sensing_weights(aperture, dims, ones)
    out = np.zeros(dims)
    seen = weights > 0
    out[seen] = back[seen] / weights[seen]
    return Tensor3(out)


def sensing_weights(aperture: CodedApertureSet, dims: Dims,
                    ones: Optional[MeasurementSet] = None) -> np.ndarray:
    """Per-voxel H^T 1, the column sums of H"""
    if ones is None:
        M, N, L = dims
        ones = MeasurementSet(np.ones((aperture.shots, M, N + L - 1)))
    return adjoint(ones, aperture, dims).values


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II analysis matrix D (coefficients = D @ signal)"""
    return dct(np.eye(n), type=2, norm="ortho", axis=0)


def soft_threshold(x, threshold: float):
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


class FistaDCTSolver:
    """Monotone FISTA for l1-regularized recovery in the 3-D DCT basis"""

    def __init__(self, measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims):
        measurements.check_consistent(aperture, dims)
        self.measurements = measurements
        self.aperture = aperture
        self.dims = dims
        self.logger = logging.getLogger(__name__)
        # analysis matrices; synthesis uses their transposes
        self.analysis = [Matrix(dct_matrix(n)) for n in dims]
        self.synthesis = [d.T for d in self.analysis]
        self.objective_history: List[float] = []
        self.lipschitz: Optional[float] = None
        self.step_size: Optional[float] = None

    def synthesize(self, coefficients: np.ndarray) -> Tensor3:
        x = Tensor3(coefficients)
        for mode, basis in enumerate(self.synthesis, start=1):
            x = mode_product(x, basis, mode)
        return x

    def analyze(self, x: Tensor3) -> np.ndarray:
        for mode, basis in enumerate(self.analysis, start=1):
            x = mode_product(x, basis, mode)
        return x.values

    def residual(self, coefficients: np.ndarray) -> np.ndarray:
        return forward(self.synthesize(coefficients), self.aperture).y - self.measurements.y

    def gradient(self, coefficients: np.ndarray) -> Tuple[np.ndarray, float]:
        r = self.residual(coefficients)
        residual_set = MeasurementSet(r.reshape(self.measurements.images.shape))
        g = self.analyze(adjoint(residual_set, self.aperture, self.dims))
        return g, 0.5 * float(np.dot(r, r))

    def objective(self, coefficients: np.ndarray, lam: float) -> float:
        r = self.residual(coefficients)
        return 0.5 * float(np.dot(r, r)) + lam * float(np.abs(coefficients).sum())

    def estimate_lipschitz(self, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
        """Largest eigenvalue of H^T H by power iteration"""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dims)
        v /= np.linalg.norm(v)
        estimate = 0.0
        for _ in range(iterations):
            hv = forward(Tensor3(v), self.aperture)
            w = adjoint(hv, self.aperture, self.dims).values
            estimate = float(np.linalg.norm(w))
            if estimate == 0.0:
                break
            v = w / estimate
        self.lipschitz = estimate
        self.logger.debug(f"Lipschitz estimate after {iterations} power iterations: {estimate:.6e}")
        return estimate

    def default_lambda(self) -> float:
        """0.01 * ||analysis(H^T y)||_inf"""
        back = self.analyze(adjoint(self.measurements, self.aperture, self.dims))
        return DEFAULT_LAMBDA_FRACTION * float(np.abs(back).max())

    def solve(self, lam: Optional[float] = None, iterations: int = 300) -> Tensor3:
        """
        Run monotone FISTA from zero coefficients

        Args:
            lam (float): l1 weight, > 0; defaults to default_lambda()
            iterations (int): number of iterations, >= 1

        Returns:
            Tensor3: reconstruction in the voxel domain
        """
        if lam is None:
            lam = self.default_lambda()
        if not lam > 0:
            raise ArgumentError(f"lambda must be > 0, got {lam}")
        if iterations < 1:
            raise ArgumentError(f"iterations must be >= 1, got {iterations}")
        lipschitz = self.lipschitz or self.estimate_lipschitz()
        if lipschitz == 0.0:
            self.logger.warning("sensing operator is identically zero; returning zero cube")
            return Tensor3.zeros(self.dims)
        step_size = 1.0 / (LIPSCHITZ_MARGIN * lipschitz)
        self.step_size = step_size

        x = np.zeros(self.dims)
        y = x.copy()
        t = 1.0
        best_objective = self.objective(x, lam)
        self.objective_history = [best_objective]
        for k in range(iterations):
            g, _ = self.gradient(y)
            z = soft_threshold(y - step_size * g, lam * step_size)
            if not np.all(np.isfinite(z)):
                raise NumericalError(f"non-finite FISTA iterate at iteration {k + 1}")
            z_objective = self.objective(z, lam)
            x_prev = x
            if z_objective <= best_objective:
                x, best_objective = z, z_objective
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next
            self.objective_history.append(best_objective)
        self.logger.info(f"FISTA-DCT finished: objective {best_objective:.6e} after {iterations} iterations")
        return self.synthesize(x)


def fista_dct(measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims,
              lam: Optional[float] = None, iterations: int = 300) -> Tensor3:
    """Sparse DCT-domain reconstruction; see FistaDCTSolver"""
    return FistaDCTSolver(measurements, aperture, dims).solve(lam, iterations)
