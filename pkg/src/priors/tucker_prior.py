"""
Low-rank Tucker latent: the learnable first layer of the generator

The feature tensor fed to the convolutional generator is

    Z = Z0 x1 U x2 V x3 W

with a small core Z0 of extents (Mr, Nr, Lr) = round(rho * (M, N, L)) and
unconstrained factor matrices. All four components are optimized.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from src.errors import ArgumentError, InvariantError, ShapeError
from src.tensors.tensor_core import Dims, Matrix, Tensor3, mode_product, unfold

logger = logging.getLogger(__name__)


def dims_from_rho(M: int, N: int, L: int, rho: float) -> Dims:
    """
    Core extents for a rank factor

    Args:
        M, N, L (int): full extents
        rho (float): rank factor in (0, 1]

    Returns:
        tuple: (Mr, Nr, Lr), each max(1, round-half-up(rho * extent))
    """
    if not 0.0 < rho <= 1.0:
        raise ArgumentError(f"rank factor must lie in (0, 1], got {rho}")
    return tuple(min(extent, max(1, math.floor(rho * extent + 0.5))) for extent in (M, N, L))


@dataclass(frozen=True, eq=False)
class TuckerLatent:
    core: Tensor3
    u: Matrix
    v: Matrix
    w: Matrix
    rank_factor: float

    def __post_init__(self):
        ranks = self.core.dims
        for name, factor, rank in (("U", self.u, ranks[0]), ("V", self.v, ranks[1]), ("W", self.w, ranks[2])):
            if factor.cols != rank:
                raise ShapeError(f"factor {name} has {factor.cols} columns, core extent is {rank}")
            if rank > factor.rows:
                raise ShapeError(f"core extent {rank} exceeds factor {name} row count {factor.rows}")

    @property
    def dims(self) -> Dims:
        return self.u.rows, self.v.rows, self.w.rows

    @property
    def ranks(self) -> Dims:
        return self.core.dims

    def components(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.core.values, self.u.values, self.v.values, self.w.values

    def parameter_count(self) -> int:
        (M, N, L), (Mr, Nr, Lr) = self.dims, self.ranks
        return Mr * Nr * Lr + M * Mr + N * Nr + L * Lr

    def scaled(self, alpha: float, component: str = "u") -> "TuckerLatent":
        """Copy with one component multiplied by alpha"""
        parts = {"core": self.core, "u": self.u, "v": self.v, "w": self.w}
        target = parts[component]
        parts[component] = type(target)(target.values * alpha)
        return TuckerLatent(rank_factor=self.rank_factor, **parts)


class LatentGradients(NamedTuple):
    core: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


def init_latent(M: int, N: int, L: int, rho: float, seed: int = 0) -> TuckerLatent:
    """
    Random Tucker latent

    Core entries are N(0, 1); factor entries are N(0, 1/cols) so the expanded
    tensor has entries of order one.
    """
    Mr, Nr, Lr = dims_from_rho(M, N, L, rho)
    rng = np.random.default_rng(seed)
    core = rng.standard_normal((Mr, Nr, Lr))
    u = rng.standard_normal((M, Mr)) / np.sqrt(Mr)
    v = rng.standard_normal((N, Nr)) / np.sqrt(Nr)
    w = rng.standard_normal((L, Lr)) / np.sqrt(Lr)
    latent = TuckerLatent(Tensor3(core), Matrix(u), Matrix(v), Matrix(w), rho)
    if latent.parameter_count() >= M * N * L:
        logger.warning(
            f"Tucker latent at rho={rho} has {latent.parameter_count()} parameters, "
            f"not fewer than the {M * N * L} voxels it expands to"
        )
    return latent


def expand(latent: TuckerLatent) -> Tensor3:
    """Full-size feature tensor Z0 x1 U x2 V x3 W"""
    z = mode_product(latent.core, latent.u, 1)
    z = mode_product(z, latent.v, 2)
    z = mode_product(z, latent.w, 3)
    if z.dims != latent.dims:
        raise InvariantError(f"expanded latent has dims {z.dims}, expected {latent.dims}")
    return z


def backprop_latent(latent: TuckerLatent, g: Tensor3) -> LatentGradients:
    """
    Gradients of a scalar loss with respect to the latent components

    Args:
        latent (TuckerLatent): point of evaluation
        g (Tensor3): gradient of the loss with respect to expand(latent)

    Returns:
        LatentGradients: (core, U, V, W) gradients as arrays
    """
    if g.dims != latent.dims:
        raise ShapeError(f"gradient dims {g.dims} do not match latent dims {latent.dims}")
    core, u, v, w = latent.core, latent.u, latent.v, latent.w

    g_core = mode_product(mode_product(mode_product(g, u.T, 1), v.T, 2), w.T, 3)

    partial_u = mode_product(mode_product(core, v, 2), w, 3)
    g_u = unfold(g, 1).values @ unfold(partial_u, 1).values.T

    partial_v = mode_product(mode_product(core, u, 1), w, 3)
    g_v = unfold(g, 2).values @ unfold(partial_v, 2).values.T

    partial_w = mode_product(mode_product(core, u, 1), v, 2)
    g_w = unfold(g, 3).values @ unfold(partial_w, 3).values.T

    return LatentGradients(g_core.values, g_u, g_v, g_w)
