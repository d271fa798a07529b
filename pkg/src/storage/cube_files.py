"""
Binary file formats for scenes, measurements and coded apertures

All integers and floats are little-endian.

SCB1 (spectral cube)
    "SCB1", M, N, L (u32) then M*N*L float32 in Tensor3 storage order
SME1 (measurements)
    "SME1", S, M, cols (u32), snr (float64, +inf when noiseless),
    seed (u64), aperture kind (u8), then S*M*cols float32, shot-major,
    each detector image row-major
SCA1 (coded apertures)
    "SCA1", kind (u8), S, M, N, L (u32) then float64 codes, shot-major;
    binary codes are S*M*N row-major, colored codes S*L*M*N band-major

Also here: scene ingestion with normalization sidecar, 16-bit PGM band
export and a flat-CSV converter.
"""

import logging
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from src.errors import ArgumentError, FormatError
from src.sensing.cassi_model import (APERTURE_KINDS, BINARY, CodedApertureSet,
                                     MeasurementSet, Provenance)
from src.tensors.tensor_core import Tensor3, devectorize, vectorize

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCUBE_MAGIC = b"SCB1"
SMEA_MAGIC = b"SME1"
SCA_MAGIC = b"SCA1"
SCUBE_HEADER = struct.Struct("<4sIII")
SMEA_HEADER = struct.Struct("<4sIIIdQB")
SCA_HEADER = struct.Struct("<4sBIIII")
KIND_CODES = {kind: code for code, kind in enumerate(APERTURE_KINDS)}


def _read_header(raw: bytes, header: struct.Struct, magic: bytes, path: PathLike) -> tuple:
    if len(raw) < len(magic) or raw[:len(magic)] != magic:
        raise FormatError(f"{path}: bad magic {raw[:len(magic)]!r}, expected {magic!r}", offset=0)
    if len(raw) < header.size:
        raise FormatError(f"{path}: truncated header", offset=len(raw))
    return header.unpack_from(raw, 0)


def _read_payload(raw: bytes, offset: int, count: int, dtype: str, path: PathLike) -> np.ndarray:
    itemsize = np.dtype(dtype).itemsize
    expected = offset + count * itemsize
    if len(raw) < expected:
        raise FormatError(f"{path}: truncated payload, expected {expected} bytes, got {len(raw)}",
                          offset=len(raw))
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes after payload", offset=expected)
    values = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError(f"{path}: non-finite value in payload", offset=offset + int(bad[0]) * itemsize)
    return values.astype(np.float64)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise FormatError(f"refusing to write non-finite values to {what}")


def write_scube(path: PathLike, cube: Tensor3) -> None:
    """Write a cube as SCB1"""
    M, N, L = cube.dims
    payload = vectorize(cube).astype("<f4")
    _check_finite(payload, str(path))
    with open(path, "wb") as f:
        f.write(SCUBE_HEADER.pack(SCUBE_MAGIC, M, N, L))
        f.write(payload.tobytes())


def read_scube(path: PathLike) -> Tensor3:
    """Read an SCB1 cube exactly as stored"""
    raw = Path(path).read_bytes()
    _, M, N, L = _read_header(raw, SCUBE_HEADER, SCUBE_MAGIC, path)
    if min(M, N, L) < 1:
        raise FormatError(f"{path}: zero extent in header {(M, N, L)}", offset=4)
    values = _read_payload(raw, SCUBE_HEADER.size, M * N * L, "<f4", path)
    return devectorize(values, (M, N, L))


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".scale.txt")


def load_scene(path: PathLike, normalize: bool = True) -> Tuple[Tensor3, float]:
    """
    Read a scene for processing

    With normalize on, the cube is divided by its global maximum and the
    factor is recorded in a `<file>.scale.txt` sidecar.

    Returns:
        tuple: (cube, scale factor applied)
    """
    cube = read_scube(path)
    if not normalize:
        return cube, 1.0
    peak = float(cube.values.max())
    if peak <= 0.0:
        logger.warning(f"{path}: non-positive maximum {peak}; leaving cube unnormalized")
        return cube, 1.0
    scale = 1.0 / peak
    sidecar_path(path).write_text(f"scale={scale!r}\npeak={peak!r}\n", encoding="utf-8")
    return Tensor3(cube.values * scale), scale


def write_smea(path: PathLike, measurements: MeasurementSet) -> None:
    """Write measurements as SME1"""
    S, M, cols = measurements.images.shape
    provenance = measurements.provenance
    payload = measurements.y.astype("<f4")
    _check_finite(payload, str(path))
    seed = provenance.seed if provenance.seed is not None else 0
    with open(path, "wb") as f:
        f.write(SMEA_HEADER.pack(SMEA_MAGIC, S, M, cols, float(provenance.snr_db), seed,
                                 KIND_CODES[provenance.aperture_kind]))
        f.write(payload.tobytes())


def read_smea(path: PathLike) -> MeasurementSet:
    raw = Path(path).read_bytes()
    _, S, M, cols, snr_db, seed, kind = _read_header(raw, SMEA_HEADER, SMEA_MAGIC, path)
    if kind >= len(APERTURE_KINDS):
        raise FormatError(f"{path}: unknown aperture kind byte {kind}", offset=SMEA_HEADER.size - 1)
    if np.isnan(snr_db) or snr_db == float("-inf"):
        raise FormatError(f"{path}: invalid SNR field {snr_db}", offset=16)
    values = _read_payload(raw, SMEA_HEADER.size, S * M * cols, "<f4", path)
    provenance = Provenance(seed=seed, snr_db=snr_db, aperture_kind=APERTURE_KINDS[kind])
    return MeasurementSet.from_vector(values, S, M, cols, provenance)


def write_aperture(path: PathLike, aperture: CodedApertureSet) -> None:
    codes = aperture.codes
    S, M, N = codes.shape[:3]
    L = codes.shape[3] if codes.ndim == 4 else 1
    if codes.ndim == 4:
        codes = codes.transpose(0, 3, 1, 2)
    with open(path, "wb") as f:
        f.write(SCA_HEADER.pack(SCA_MAGIC, KIND_CODES[aperture.kind], S, M, N, L))
        f.write(codes.astype("<f8").tobytes())


def read_aperture(path: PathLike) -> CodedApertureSet:
    raw = Path(path).read_bytes()
    _, kind, S, M, N, L = _read_header(raw, SCA_HEADER, SCA_MAGIC, path)
    if kind >= len(APERTURE_KINDS):
        raise FormatError(f"{path}: unknown aperture kind byte {kind}", offset=4)
    kind = APERTURE_KINDS[kind]
    planes = 1 if kind == BINARY else L
    values = _read_payload(raw, SCA_HEADER.size, S * planes * M * N, "<f8", path)
    if kind == BINARY:
        codes = values.reshape(S, M, N)
    else:
        codes = values.reshape(S, L, M, N).transpose(0, 2, 3, 1)
    try:
        return CodedApertureSet(kind, codes)
    except ArgumentError as e:
        raise FormatError(f"{path}: {e}", offset=SCA_HEADER.size) from e


def export_band(path: PathLike, cube: Tensor3, band: int) -> None:
    """Write one band as a 16-bit binary PGM (values clipped to [0, 1])"""
    L = cube.dims[2]
    if not 0 <= band < L:
        raise ArgumentError(f"band {band} outside [0, {L - 1}]")
    levels = np.rint(np.clip(cube.band(band), 0.0, 1.0) * 65535.0).astype(np.int32)
    Image.fromarray(levels).save(path, format="PPM")


def convert_csv(csv_path: PathLike) -> Tensor3:
    """
    Build a cube from a flat CSV with columns m, n, band, value (0-based)

    Every voxel of the bounding box must appear exactly once.
    """
    try:
        table = pd.read_csv(csv_path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise FormatError(f"{csv_path}: unreadable CSV ({e})", offset=0) from e
    missing = {"m", "n", "band", "value"} - set(table.columns)
    if missing:
        raise FormatError(f"{csv_path}: missing column(s) {', '.join(sorted(missing))}", offset=0)
    index = table[["m", "n", "band"]].to_numpy()
    if (index < 0).any():
        raise FormatError(f"{csv_path}: negative voxel index")
    dims = tuple(int(d) + 1 for d in index.max(axis=0))
    if len(table) != int(np.prod(dims)) or table.duplicated(["m", "n", "band"]).any():
        raise FormatError(f"{csv_path}: expected each of the {int(np.prod(dims))} voxels of {dims} exactly once")
    values = table["value"].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{csv_path}: non-finite voxel value")
    cube = np.zeros(dims)
    cube[index[:, 0], index[:, 1], index[:, 2]] = values
    return Tensor3(cube)
