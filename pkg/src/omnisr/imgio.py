"""Image and tensor file I/O.

PNG (8- or 16-bit, values mapped linearly to [0, 1]) is the interchange
format; a small binary tensor container holds lossless float intermediates.

Tensor container layout (integers little-endian):

    magic   4 bytes  "OSST"
    version u16
    rank    u8
    dims    rank * u32
    dtype   u8       0=f32 1=f64
    data    raw little-endian samples

The declared size must match the payload size exactly; anything else is
rejected as corrupt.
"""

from __future__ import annotations

import struct
from pathlib import Path

import cv2
import numpy as np

from .errors import ConfigError, FileFormatError

TENSOR_MAGIC = b"OSST"
TENSOR_VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def read_image(path: str) -> np.ndarray:
    """Load a PNG as float64 in [0, 1]; colour images come back RGB."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileFormatError(f"cannot read image {path!r}")
    if raw.dtype == np.uint8:
        img = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        img = raw.astype(np.float64) / 65535.0
    else:
        raise FileFormatError(f"unsupported sample type {raw.dtype} in {path!r}")
    if img.ndim == 3 and img.shape[2] >= 3:
        img = img[:, :, :3][:, :, ::-1].copy()  # BGR -> RGB, drop alpha
    return img


def write_image(path: str, img, bit_depth: int = 16):
    """Write a [0, 1] raster as PNG (16-bit by default to limit quantization)."""
    img = np.asarray(img, dtype=np.float64)
    if bit_depth not in (8, 16):
        raise ConfigError(f"bit depth must be 8 or 16, got {bit_depth}")
    scale = 255.0 if bit_depth == 8 else 65535.0
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    quant = np.round(np.clip(img, 0.0, 1.0) * scale).astype(dtype)
    if quant.ndim == 3 and quant.shape[2] == 3:
        quant = quant[:, :, ::-1]  # RGB -> BGR
    elif quant.ndim == 3 and quant.shape[2] == 1:
        quant = quant[:, :, 0]
    if not cv2.imwrite(str(path), quant):
        raise FileFormatError(f"cannot write image {path!r}")


def save_tensor(path: str, arr):
    arr = np.asarray(arr)
    if arr.dtype not in _DTYPE_CODES:
        arr = arr.astype(np.float64)
    code = _DTYPE_CODES[arr.dtype]
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<H", TENSOR_VERSION))
        fh.write(bytes([arr.ndim]))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(bytes([code]))
        fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def load_tensor(path: str) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != TENSOR_MAGIC:
        raise FileFormatError(f"{path!r} is not a tensor file (bad magic)")
    try:
        (version,) = struct.unpack_from("<H", blob, 4)
        if version != TENSOR_VERSION:
            raise FileFormatError(f"unsupported tensor file version {version}")
        rank = blob[6]
        dims = struct.unpack_from(f"<{rank}I", blob, 7)
        offset = 7 + 4 * rank
        code = blob[offset]
        offset += 1
    except (struct.error, IndexError) as exc:
        raise FileFormatError(f"truncated tensor file {path!r}") from exc
    if code not in _DTYPES:
        raise FileFormatError(f"unknown dtype code {code} in {path!r}")
    dtype = _DTYPES[code]
    count = int(np.prod(dims)) if rank else 0
    expected = count * dtype.itemsize
    if len(blob) - offset != expected:
        raise FileFormatError(
            f"tensor file {path!r}: declared {expected} data bytes, found {len(blob) - offset}"
        )
    arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    return arr.reshape(dims).astype(dtype.newbyteorder("="), copy=True)


def load_raster(path: str) -> np.ndarray:
    """Read either format by extension: .osst tensors, anything else PNG."""
    if str(path).endswith(".osst"):
        return load_tensor(path)
    return read_image(path)
