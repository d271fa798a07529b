"""
Deep-prior reconstruction solver

Fits the generator weights theta and the Tucker latent (Z0, U, V, W) to the
measurements by minimizing

    1/2 || y - H vect( M_theta( Z0 x1 U x2 V x3 W ) ) ||^2

with adaptive-moment gradient descent. No training data is involved: the
prior comes from the architecture alone. The reconstruction is the generator
output, taken before the sensing layer.

Modes:
    full              optimize theta, Z0, U, V, W
    dip-fixed-input   optimize theta only; the latent stays at its random draw
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import ArgumentError, NumericalError
from src.evaluation.metrics import psnr
from src.priors import generator_net
from src.priors.generator_net import GeneratorParams
from src.priors.tucker_prior import TuckerLatent, backprop_latent, expand, init_latent
from src.sensing.cassi_model import CodedApertureSet, MeasurementSet, adjoint, forward
from src.tensors.tensor_core import Dims, Matrix, Tensor3

logger = logging.getLogger(__name__)

FULL = "full"
DIP_FIXED_INPUT = "dip-fixed-input"
MODES = (FULL, DIP_FIXED_INPUT)
OPTIMIZERS = ("adam", "sgd")

LATENT_KEYS = ("core", "u", "v", "w")


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit seed for a (seed, keys...) stream"""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


@dataclass(frozen=True)
class FitConfig:
    iterations: int = 3000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    rho: float = 0.5
    arch: str = "resnet"
    width: Optional[int] = None
    restarts: int = 5
    seed: int = 0
    mode: str = FULL
    log_stride: int = 10
    optimizer: str = "adam"
    early_stop_tol: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ArgumentError(f"iterations must be >= 1, got {self.iterations}")
        if not self.learning_rate > 0:
            raise ArgumentError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.restarts < 1:
            raise ArgumentError(f"restarts must be >= 1, got {self.restarts}")
        if self.mode not in MODES:
            raise ArgumentError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ArgumentError(f"optimizer must be one of {', '.join(OPTIMIZERS)}")
        if self.log_stride < 1:
            raise ArgumentError("log stride must be >= 1")
        if self.width is None:
            object.__setattr__(self, "width", generator_net.DEFAULT_WIDTHS.get(self.arch, 7))

    def learnable_keys(self, generator: GeneratorParams) -> List[str]:
        keys = [f"theta{i}" for i in range(len(generator.arrays()))]
        if self.mode == FULL:
            keys.extend(LATENT_KEYS)
        return keys


@dataclass(frozen=True, eq=False)
class FitState:
    """Snapshot of every variable of one trajectory plus optimizer moments"""

    generator: GeneratorParams
    latent: TuckerLatent
    moments: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def named_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {f"theta{i}": a for i, a in enumerate(self.generator.arrays())}
        arrays.update(zip(LATENT_KEYS, self.latent.components()))
        return arrays

    def with_arrays(self, arrays: Dict[str, np.ndarray], moments) -> "FitState":
        count = len(self.generator.arrays())
        generator = self.generator.with_arrays([arrays[f"theta{i}"] for i in range(count)])
        latent = TuckerLatent(Tensor3(arrays["core"]), Matrix(arrays["u"]), Matrix(arrays["v"]),
                              Matrix(arrays["w"]), self.latent.rank_factor)
        return FitState(generator, latent, moments)

    def reconstruct(self) -> Tensor3:
        x, _ = generator_net.forward(self.generator, expand(self.latent))
        return x


def initial_state(dims: Dims, cfg: FitConfig, seed: int) -> FitState:
    M, N, L = dims
    latent = init_latent(M, N, L, cfg.rho, seed=derive_seed(seed, 0))
    generator = generator_net.build(cfg.arch, L, cfg.width, seed=derive_seed(seed, 1))
    return FitState(generator, latent)


class Gradients(NamedTuple):
    arrays: Dict[str, np.ndarray]
    residual: np.ndarray
    reconstruction: Tensor3
    reconstruction_grad: Tensor3


def loss_and_grad(state: FitState, measurements: MeasurementSet, aperture: CodedApertureSet,
                  z: Optional[Tensor3] = None) -> Tuple[float, Gradients]:
    """
    Data-fidelity loss and its gradient with respect to every variable

    Args:
        state (FitState): current variables
        measurements (MeasurementSet): observed y
        aperture (CodedApertureSet): sensing codes
        z (Tensor3): expand(state.latent) for a latent held fixed; latent
            gradients are then left out

    Returns:
        tuple: (1/2 ||H vect(x) - y||^2, Gradients)
    """
    latent_fixed = z is not None
    if z is None:
        z = expand(state.latent)
    x, tape = generator_net.forward(state.generator, z)
    predicted = forward(x, aperture)
    residual = predicted.y - measurements.y
    loss = 0.5 * float(np.dot(residual, residual))

    residual_set = MeasurementSet(residual.reshape(predicted.images.shape))
    g_x = adjoint(residual_set, aperture, x.dims)
    g_theta, g_z = generator_net.backward(tape, g_x)

    arrays = {f"theta{i}": g for i, g in enumerate(g_theta)}
    if not latent_fixed:
        arrays.update(zip(LATENT_KEYS, backprop_latent(state.latent, g_z)))
    return loss, Gradients(arrays, residual, x, g_x)


def step(state: FitState, gradients: Gradients, cfg: FitConfig, iteration: int) -> FitState:
    """
    One optimizer update (iteration counts from 1)

    Only the variables of the configured mode move; the latent is left
    untouched in dip-fixed-input mode.
    """
    keys = cfg.learnable_keys(state.generator)
    for key in keys:
        if not np.all(np.isfinite(gradients.arrays[key])):
            raise NumericalError(f"non-finite gradient for {key} at iteration {iteration}")

    arrays = state.named_arrays()
    moments = dict(state.moments)
    for key in keys:
        g = gradients.arrays[key]
        if cfg.optimizer == "sgd":
            arrays[key] = arrays[key] - cfg.learning_rate * g
            continue
        m, v = moments.get(key, (np.zeros_like(g), np.zeros_like(g)))
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1 ** iteration)
        v_hat = v / (1.0 - cfg.beta2 ** iteration)
        arrays[key] = arrays[key] - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        moments[key] = (m, v)
    return state.with_arrays(arrays, moments)


@dataclass
class RestartOutcome:
    restart: int
    seed: int
    final_loss: float
    state: Optional[FitState]
    reconstruction: Optional[Tensor3]
    trace: pd.DataFrame
    error: Optional[str] = None


@dataclass
class FitResult:
    reconstruction: Tensor3
    best_restart: int
    best_state: FitState
    restart_losses: List[float]
    traces: List[pd.DataFrame]
    wall_time: float
    config: dict

    @property
    def trace(self) -> pd.DataFrame:
        """Residual trace of the best restart"""
        return self.traces[self.best_restart]

    @property
    def final_loss(self) -> float:
        return self.restart_losses[self.best_restart]

    def restart_summary(self) -> pd.DataFrame:
        losses = pd.Series(self.restart_losses, name="final_loss")
        return pd.DataFrame({"restart": range(len(losses)), "final_loss": losses})


class DeepPriorSolver:
    """Runs seeded trajectories of the deep-prior fit and keeps the best one"""

    def __init__(self, cfg: FitConfig):
        self.cfg = cfg
        self.logger = logging.getLogger(__name__)

    def run_trajectory(self, measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims,
                       restart: int, reference: Optional[Tensor3] = None) -> RestartOutcome:
        cfg = self.cfg
        seed = derive_seed(cfg.seed, restart)
        state = initial_state(dims, cfg, seed)
        self.logger.info(
            f"Restart {restart}: {cfg.arch} generator with {state.generator.parameter_count()} parameters, "
            f"Tucker latent {state.latent.ranks} with {state.latent.parameter_count()} parameters"
        )
        fixed_z = expand(state.latent) if cfg.mode == DIP_FIXED_INPUT else None

        # trace rows are labelled by the number of updates applied so far
        rows = []
        first_loss = None
        updates = 0
        try:
            while updates < cfg.iterations:
                loss, grads = loss_and_grad(state, measurements, aperture, z=fixed_z)
                if not np.isfinite(loss):
                    raise NumericalError(f"non-finite loss after {updates} updates")
                if first_loss is None:
                    first_loss = loss
                if updates % cfg.log_stride == 0:
                    rows.append(self._trace_row(updates, loss, grads.reconstruction, reference))
                if cfg.early_stop_tol is not None and loss <= cfg.early_stop_tol * first_loss:
                    self.logger.info(f"Restart {restart}: early stop after {updates} updates")
                    break
                state = step(state, grads, cfg, updates + 1)
                updates += 1
        except NumericalError as e:
            self.logger.error(f"Restart {restart} aborted: {e}")
            return RestartOutcome(restart, seed, float("inf"), None, None, pd.DataFrame(rows), str(e))

        reconstruction = state.reconstruct()
        residual = forward(reconstruction, aperture).y - measurements.y
        final_loss = 0.5 * float(np.dot(residual, residual))
        if not rows or rows[-1]["iteration"] != updates:
            rows.append(self._trace_row(updates, final_loss, reconstruction, reference))
        self.logger.info(f"Restart {restart}: final loss {final_loss:.6e} (initial {first_loss:.6e})")
        return RestartOutcome(restart, seed, final_loss, state, reconstruction, pd.DataFrame(rows))

    @staticmethod
    def _trace_row(iteration: int, loss: float, x: Tensor3, reference: Optional[Tensor3]) -> dict:
        row = {"iteration": iteration, "loss": loss}
        if reference is not None:
            row["psnr"] = psnr(reference, x)
        return row

    def fit(self, measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims,
            reference: Optional[Tensor3] = None) -> FitResult:
        cfg = self.cfg
        measurements.check_consistent(aperture, dims)
        start = time.perf_counter()

        restarts = range(cfg.restarts)
        if cfg.workers > 1 and cfg.restarts > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                outcomes = list(pool.map(
                    lambda r: self.run_trajectory(measurements, aperture, dims, r, reference), restarts))
        else:
            outcomes = [self.run_trajectory(measurements, aperture, dims, r, reference) for r in restarts]

        losses = [o.final_loss for o in outcomes]
        best = int(np.argmin(losses))
        if outcomes[best].state is None:
            raise NumericalError(f"all {cfg.restarts} restarts failed: {outcomes[best].error}")
        wall_time = time.perf_counter() - start
        self.logger.info(f"Best restart {best} of {cfg.restarts}, loss {losses[best]:.6e}, {wall_time:.1f}s")
        return FitResult(
            reconstruction=outcomes[best].reconstruction,
            best_restart=best,
            best_state=outcomes[best].state,
            restart_losses=losses,
            traces=[o.trace for o in outcomes],
            wall_time=wall_time,
            config=asdict(cfg),
        )


def fit(measurements: MeasurementSet, aperture: CodedApertureSet, dims: Dims, cfg: FitConfig,
        reference: Optional[Tensor3] = None) -> FitResult:
    """
    Reconstruct a spectral cube from CASSI measurements

    Args:
        measurements (MeasurementSet): observed detector images
        aperture (CodedApertureSet): codes used to take them
        dims (tuple): (M, N, L) of the scene
        cfg (FitConfig): solver configuration
        reference (Tensor3): optional ground truth, adds PSNR to the trace

    Returns:
        FitResult: best reconstruction over restarts with all traces
    """
    return DeepPriorSolver(cfg).fit(measurements, aperture, dims, reference)
