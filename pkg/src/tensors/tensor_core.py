"""
Dense third-order tensors and the multilinear algebra the rest of the toolkit
is written against.

A Tensor3 is indexed as (m, n, band) with extents (M, N, L). Its linear
storage order is band-major: each band is one M x N plane, planes are stored
one after another and every plane is row-major. vectorize() and the SCB1 file
format both follow that order.

Unfoldings use the Kolda-Bader convention: the mode-k unfolding of an
M x N x L tensor keeps mode k as rows and orders the remaining indices by
ascending mode number with the lowest one varying fastest.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.errors import ArgumentError, ShapeError

Dims = Tuple[int, int, int]


def _frozen(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class Tensor3:
    """Immutable M x N x L array of float64 values"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ShapeError(f"Tensor3 needs 3 axes, got {values.ndim}")
        if min(values.shape) < 1:
            raise ShapeError(f"Tensor3 extents must be >= 1, got {values.shape}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def dims(self) -> Dims:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def band(self, ell: int) -> np.ndarray:
        """Return the M x N plane of band `ell` (0-based)"""
        return self.values[:, :, ell]

    def planes(self) -> np.ndarray:
        """Channel-first L x M x N view used by the convolutional generator"""
        return self.values.transpose(2, 0, 1)

    @classmethod
    def from_planes(cls, planes: np.ndarray) -> "Tensor3":
        return cls(np.asarray(planes).transpose(1, 2, 0))

    @classmethod
    def zeros(cls, dims: Dims) -> "Tensor3":
        return cls(np.zeros(dims))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __repr__(self):
        return f"Tensor3(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class Matrix:
    """Immutable rows x cols array of float64 values"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"Matrix needs 2 axes, got {values.ndim}")
        if min(values.shape) < 1:
            raise ShapeError(f"Matrix extents must be >= 1, got {values.shape}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> "Matrix":
        return Matrix(self.values.T)

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(np.eye(n))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols})"


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise ArgumentError(f"mode must be 1, 2 or 3, got {mode}")
    return mode - 1


def mode_product(t: Tensor3, m: Matrix, mode: int) -> Tensor3:
    """
    Mode-n product t x_mode m

    Args:
        t (Tensor3): input tensor
        m (Matrix): matrix whose column count equals t's extent along `mode`
        mode (int): 1, 2 or 3

    Returns:
        Tensor3: tensor with the `mode` extent replaced by m.rows
    """
    axis = _check_mode(mode)
    extent = t.dims[axis]
    if m.cols != extent:
        raise ShapeError(
            f"mode-{mode} product: tensor extent {extent} does not match matrix column count {m.cols}"
        )
    product = np.tensordot(m.values, t.values, axes=([1], [axis]))
    return Tensor3(np.moveaxis(product, 0, axis))


def unfold(t: Tensor3, mode: int) -> Matrix:
    """Mode-k unfolding; column index runs over the other modes, lowest first"""
    axis = _check_mode(mode)
    moved = np.moveaxis(t.values, axis, 0)
    return Matrix(moved.reshape(t.dims[axis], -1, order="F"))


def shift_slice(x: Matrix, ell: int, L: int) -> Matrix:
    """
    Dispersive shift of one band plane

    Output column (ell + j) holds input column j; the remaining L - 1
    columns are zero.

    Args:
        x (Matrix): M x N plane
        ell (int): 0-based band index, 0 <= ell <= L - 1
        L (int): number of bands

    Returns:
        Matrix: M x (N + L - 1) shifted plane
    """
    if not 0 <= ell <= L - 1:
        raise ArgumentError(f"shift {ell} outside [0, {L - 1}]")
    rows, cols = x.values.shape
    shifted = np.zeros((rows, cols + L - 1))
    shifted[:, ell:ell + cols] = x.values
    return Matrix(shifted)


def vectorize(t: Tensor3) -> np.ndarray:
    """Flatten in storage order (band-major planes, row-major within a plane)"""
    return t.values.transpose(2, 0, 1).reshape(-1)


def devectorize(v: np.ndarray, dims: Dims) -> Tensor3:
    v = np.asarray(v, dtype=np.float64)
    M, N, L = dims
    if v.ndim != 1 or v.size != M * N * L:
        raise ShapeError(f"vector of length {v.size} cannot hold a {M}x{N}x{L} tensor")
    return Tensor3(v.reshape(L, M, N).transpose(1, 2, 0))
