"""Grayscale PNG rendering of pixel-metric maps.

The mapping is fixed so any consumer can reproduce it bit-for-bit:
pixel = round(255 * clip(value / vmax, 0, 1)), round half away from
zero. The encoder is written against the PNG spec directly (zlib +
struct) rather than an imaging library, which keeps library decoders
available as independent checks on the output.
"""

from __future__ import annotations

import math
import struct
import zlib

import numpy as np

from .errors import DataError
from .uncertainty import ENTROPY_MAX, VARIANCE_MAX

# fixed display ceilings per metric, chosen at each metric's upper bound
DEFAULT_VMAX = {
    "mean_prob": 1.0,
    "entropy": ENTROPY_MAX,
    "variance": VARIANCE_MAX,
    "mutual_info": ENTROPY_MAX,
}

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + tag
        + data
        + struct.pack(">I", zlib.crc32(tag + data))
    )


def quantize(values: np.ndarray, vmax: float) -> np.ndarray:
    """Map a finite H x W array onto 8-bit gray levels."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"heatmap input must be nonempty H x W, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError("heatmap input must be finite")
    if not (math.isfinite(vmax) and vmax > 0):
        raise DataError(f"vmax must be a positive finite number, got {vmax}")
    scaled = np.clip(arr / vmax, 0.0, 1.0)
    return np.floor(255.0 * scaled + 0.5).astype(np.uint8)


def render_heatmap_png(values: np.ndarray, vmax: float) -> bytes:
    """Encode the quantized map as an 8-bit grayscale PNG byte stream."""
    gray = quantize(values, vmax)
    height, width = gray.shape
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    # every scanline gets filter type 0 (None)
    raw = b"".join(b"\x00" + gray[row].tobytes() for row in range(height))
    return (
        _PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, level=9))
        + _chunk(b"IEND", b"")
    )
