"""Binary tensor files.

Framing: 4 magic bytes ``SHRT``, 1 version byte (=1), 1 dtype code byte,
1 ndim byte, then ndim little-endian u64 dims, then the payload in
row-major order, little-endian. Dtype codes: 1=f32, 2=f64, 3=u8.

Writes go to a temp file in the target directory and are renamed into
place, so readers never observe a half-written file.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    NonFiniteValuesError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

MAGIC = b"SHRT"
VERSION = 1

_DTYPE_BY_CODE = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("u1")}
_CODE_BY_KIND = {("f", 4): 1, ("f", 8): 2, ("u", 1): 3}


def _dtype_code(dtype: np.dtype) -> int:
    code = _CODE_BY_KIND.get((dtype.kind, dtype.itemsize))
    if code is None:
        raise TensorFormatError(f"unsupported dtype {dtype}; use f32, f64 or u8")
    return code


def write_tensor(array: np.ndarray, path: str | Path) -> None:
    """Write *array* to *path* in SHRT framing, atomically.

    The array must have at least one dimension and every dim >= 1.
    """
    array = np.asarray(array)
    if array.ndim == 0:
        raise TensorFormatError("0-d arrays are not representable; reshape to (1,)")
    if any(d < 1 for d in array.shape):
        raise TensorFormatError(f"all dims must be >= 1, got shape {array.shape}")
    code = _dtype_code(array.dtype)

    header = MAGIC + struct.pack("<BBB", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    payload = np.ascontiguousarray(array, dtype=_DTYPE_BY_CODE[code]).tobytes()

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tensor(path: str | Path, require_finite: bool = False) -> np.ndarray:
    """Read an SHRT tensor file back into a numpy array.

    With ``require_finite=True``, NaN/inf in a float payload raises
    NonFiniteValuesError.
    """
    data = Path(path).read_bytes()
    if len(data) < 7 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an SHRT tensor file")
    version, code, ndim = data[4], data[5], data[6]
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, expected {VERSION}")
    dtype = _DTYPE_BY_CODE.get(code)
    if dtype is None:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    if ndim < 1:
        raise TensorFormatError(f"{path}: ndim must be >= 1")

    dims_end = 7 + 8 * ndim
    if len(data) < dims_end:
        raise TruncatedPayloadError(f"{path}: header truncated")
    dims = struct.unpack(f"<{ndim}Q", data[7:dims_end])
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"{path}: zero-sized dim in {dims}")

    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[dims_end:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}"
        )
    array = np.frombuffer(payload, dtype=dtype).reshape(dims)
    if require_finite and dtype.kind == "f" and not np.isfinite(array).all():
        raise NonFiniteValuesError(f"{path}: non-finite values in payload")
    return array.copy()
