"""
Untrained convolutional generator with exact reverse-mode gradients

Two architectures are supported, both mapping an M x N x L feature tensor to
an M x N x L image in (0, 1), with the spectral bands as convolution channels:

- resnet: four 3x3 convolutions with ReLUs, a skip connection from the
  network input and a final sigmoid
- autoencoder: six 3x3 convolutions with two 2x average-pool downsamplings
  and two nearest-neighbour upsamplings, final sigmoid

The network is a flat list of LayerSpec entries. forward() records what each
layer needs on a Tape; backward() walks the tape in reverse once.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from src.errors import ArgumentError, ShapeError, UsageError
from src.tensors.tensor_core import Tensor3

logger = logging.getLogger(__name__)

CONV2D = "conv2d"
RELU = "relu"
SIGMOID = "sigmoid"
SKIP_ADD = "skip-add"
DOWNSAMPLE2 = "downsample2"
UPSAMPLE2 = "upsample2"

ARCHITECTURES = ("resnet", "autoencoder")
DEFAULT_WIDTHS = {"resnet": 7, "autoencoder": 16}


@dataclass(frozen=True)
class LayerSpec:
    op: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 3
    bias: bool = True

    def __post_init__(self):
        if self.op == CONV2D:
            if self.kernel < 1 or self.kernel % 2 == 0:
                raise ArgumentError(f"conv kernels need an odd size, got {self.kernel}")
            if self.in_channels < 1 or self.out_channels < 1:
                raise ArgumentError("conv channel counts must be positive")


def _conv(cin: int, cout: int) -> LayerSpec:
    return LayerSpec(CONV2D, cin, cout)


def architecture_specs(arch: str, L: int, width: int) -> List[LayerSpec]:
    if width < 1:
        raise ArgumentError(f"width must be >= 1, got {width}")
    if arch == "resnet":
        return [
            _conv(L, width), LayerSpec(RELU),
            _conv(width, width), LayerSpec(RELU),
            _conv(width, width), LayerSpec(RELU),
            _conv(width, L),
            LayerSpec(SKIP_ADD),
            LayerSpec(SIGMOID),
        ]
    if arch == "autoencoder":
        return [
            _conv(L, width), LayerSpec(RELU), LayerSpec(DOWNSAMPLE2),
            _conv(width, 2 * width), LayerSpec(RELU), LayerSpec(DOWNSAMPLE2),
            _conv(2 * width, 2 * width), LayerSpec(RELU), LayerSpec(UPSAMPLE2),
            _conv(2 * width, width), LayerSpec(RELU), LayerSpec(UPSAMPLE2),
            _conv(width, width), LayerSpec(RELU),
            _conv(width, L),
            LayerSpec(SIGMOID),
        ]
    raise ArgumentError(f"unknown architecture {arch!r}; choose from {', '.join(ARCHITECTURES)}")


@dataclass(frozen=True, eq=False)
class GeneratorParams:
    """
    Weights of one generator

    kernels[i] has shape (out, in, k, k) and biases[i] shape (out,) for the
    i-th conv2d entry of `layers`.
    """

    arch: str
    layers: Tuple[LayerSpec, ...]
    kernels: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        convs = self.conv_layers()
        if len(convs) != len(self.kernels) or len(convs) != len(self.biases):
            raise ShapeError(f"{len(convs)} conv layers but {len(self.kernels)} kernels / {len(self.biases)} biases")
        for layer, kernel, bias in zip(convs, self.kernels, self.biases):
            expected = (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)
            if kernel.shape != expected or bias.shape != (layer.out_channels,):
                raise ShapeError(f"parameter shapes {kernel.shape}/{bias.shape} do not match layer {expected}")

    def conv_layers(self) -> List[LayerSpec]:
        return [layer for layer in self.layers if layer.op == CONV2D]

    @property
    def channels(self) -> int:
        return self.conv_layers()[0].in_channels

    def arrays(self) -> List[np.ndarray]:
        """Kernels and biases interleaved, layer by layer"""
        out = []
        for kernel, bias in zip(self.kernels, self.biases):
            out.extend((kernel, bias))
        return out

    def with_arrays(self, arrays: List[np.ndarray]) -> "GeneratorParams":
        return GeneratorParams(self.arch, self.layers, tuple(arrays[0::2]), tuple(arrays[1::2]), self.seed)

    def parameter_count(self) -> int:
        return int(sum(a.size for a in self.arrays()))


def build(arch: str, L: int, width: int, seed: int = 0) -> GeneratorParams:
    """
    Build a generator with He-initialized kernels and zero biases

    Args:
        arch (str): "resnet" or "autoencoder"
        L (int): number of spectral bands (input and output channels)
        width (int): hidden channel width
        seed (int): initialization seed

    Returns:
        GeneratorParams: freshly initialized parameters
    """
    layers = tuple(architecture_specs(arch, L, width))
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    for layer in layers:
        if layer.op != CONV2D:
            continue
        fan_in = layer.in_channels * layer.kernel * layer.kernel
        shape = (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)
        kernels.append(rng.standard_normal(shape) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(layer.out_channels))
    params = GeneratorParams(arch, layers, tuple(kernels), tuple(biases), seed)
    logger.debug(f"Built {arch} generator (L={L}, width={width}) with {params.parameter_count()} parameters")
    return params


# Layer kernels on channel-first (C, H, W) arrays

def conv2d_forward(h: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stride-1, zero same-padded cross-correlation; also returns the input windows"""
    pad = kernel.shape[-1] // 2
    padded = np.pad(h, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, kernel.shape[-2:], axis=(1, 2))
    out = np.tensordot(kernel, windows, axes=([1, 2, 3], [0, 3, 4]))
    return out + bias[:, None, None], windows


def conv2d_backward(g: np.ndarray, windows: np.ndarray,
                    kernel: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (input, kernel, bias); the input gradient correlates with the flipped kernel"""
    g_kernel = np.tensordot(g, windows, axes=([1, 2], [1, 2]))
    g_bias = g.sum(axis=(1, 2))
    pad = kernel.shape[-1] // 2
    g_padded = np.pad(g, ((0, 0), (pad, pad), (pad, pad)))
    g_windows = sliding_window_view(g_padded, kernel.shape[-2:], axis=(1, 2))
    flipped = kernel[:, :, ::-1, ::-1]
    g_input = np.tensordot(flipped, g_windows, axes=([0, 2, 3], [0, 3, 4]))
    return g_input, g_kernel, g_bias


def downsample2(h: np.ndarray) -> np.ndarray:
    C, H, W = h.shape
    return h.reshape(C, H // 2, 2, W // 2, 2).mean(axis=(2, 4))


def downsample2_transpose(g: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) / 4.0


def upsample2(h: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(h, 2, axis=1), 2, axis=2)


def upsample2_transpose(g: np.ndarray) -> np.ndarray:
    C, H, W = g.shape
    return g.reshape(C, H // 2, 2, W // 2, 2).sum(axis=(2, 4))


@dataclass
class Tape:
    """Forward intermediates of one generator evaluation"""

    params: GeneratorParams
    records: List[object] = field(default_factory=list)
    consumed: bool = False


def required_multiple(params: GeneratorParams) -> int:
    return 2 ** sum(1 for layer in params.layers if layer.op == DOWNSAMPLE2)


def forward(params: GeneratorParams, z: Tensor3) -> Tuple[Tensor3, Tape]:
    """
    Evaluate the generator on a feature tensor

    Args:
        params (GeneratorParams): network weights
        z (Tensor3): M x N x L input with L matching the network channels

    Returns:
        tuple: (output tensor of the same dims, tape for one backward pass)
    """
    M, N, L = z.dims
    if L != params.channels:
        raise ShapeError(f"input has {L} channels, generator expects {params.channels}")
    multiple = required_multiple(params)
    if M % multiple or N % multiple:
        raise ArgumentError(f"{params.arch} needs M and N divisible by {multiple}, got {M}x{N}")

    tape = Tape(params)
    x0 = np.ascontiguousarray(z.planes())
    h = x0
    conv_index = 0
    for layer in params.layers:
        if layer.op == CONV2D:
            kernel, bias = params.kernels[conv_index], params.biases[conv_index]
            h, windows = conv2d_forward(h, kernel, bias)
            tape.records.append((conv_index, windows))
            conv_index += 1
        elif layer.op == RELU:
            tape.records.append(h > 0)
            h = np.maximum(h, 0.0)
        elif layer.op == SIGMOID:
            h = expit(h)
            tape.records.append(h)
        elif layer.op == SKIP_ADD:
            if h.shape != x0.shape:
                raise ShapeError(f"skip connection joins {h.shape} with input {x0.shape}")
            h = h + x0
            tape.records.append(None)
        elif layer.op == DOWNSAMPLE2:
            h = downsample2(h)
            tape.records.append(None)
        elif layer.op == UPSAMPLE2:
            h = upsample2(h)
            tape.records.append(None)
        else:
            raise ArgumentError(f"unknown layer op {layer.op!r}")
    return Tensor3.from_planes(h), tape


def backward(tape: Tape, g_out: Tensor3) -> Tuple[List[np.ndarray], Tensor3]:
    """
    Reverse pass over a tape

    Args:
        tape (Tape): tape returned by forward(); consumed by this call
        g_out (Tensor3): gradient of the loss with respect to the output

    Returns:
        tuple: (parameter gradients in GeneratorParams.arrays() order,
                gradient with respect to the input tensor)
    """
    if tape.consumed:
        raise UsageError("tape already consumed by a previous backward pass")
    tape.consumed = True
    params = tape.params

    g = np.ascontiguousarray(g_out.planes())
    g_input = np.zeros_like(g)
    g_kernels = [None] * len(params.kernels)
    g_biases = [None] * len(params.biases)
    for layer, record in zip(reversed(params.layers), reversed(tape.records)):
        if layer.op == CONV2D:
            conv_index, windows = record
            g, g_kernels[conv_index], g_biases[conv_index] = conv2d_backward(
                g, windows, params.kernels[conv_index])
        elif layer.op == RELU:
            g = g * record
        elif layer.op == SIGMOID:
            g = g * record * (1.0 - record)
        elif layer.op == SKIP_ADD:
            g_input = g_input + g
        elif layer.op == DOWNSAMPLE2:
            g = downsample2_transpose(g)
        elif layer.op == UPSAMPLE2:
            g = upsample2_transpose(g)
    g_input = g_input + g
    tape.records.clear()

    g_params = []
    for g_kernel, g_bias in zip(g_kernels, g_biases):
        g_params.extend((g_kernel, g_bias))
    return g_params, Tensor3.from_planes(g_input)
