"""Tensor file framing: round-trips, hand-computed sizes, corruption."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segrel.errors import (
    BadMagicError,
    NonFiniteValuesError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from segrel.tensorfile import read_tensor, write_tensor


def test_single_f32_value_round_trip_and_exact_size(tmp_path):
    # header: 4 magic + 1 version + 1 dtype + 1 ndim + 2*8 dims = 23 bytes,
    # payload 4 bytes -> 27 total
    path = tmp_path / "t.shrt"
    write_tensor(np.array([[0.5]], dtype=np.float32), path)
    raw = path.read_bytes()
    assert len(raw) == 27
    assert raw[:4] == b"SHRT"
    assert raw[4] == 1  # version
    assert raw[5] == 1  # dtype code f32
    assert raw[6] == 2  # ndim
    assert struct.unpack("<2Q", raw[7:23]) == (1, 1)
    assert struct.unpack("<f", raw[23:]) == (0.5,)
    back = read_tensor(path)
    assert back.dtype == np.dtype("<f4")
    assert back.shape == (1, 1)
    assert back[0, 0] == 0.5


def test_2x3_f32_payload_is_24_bytes(tmp_path):
    path = tmp_path / "t.shrt"
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    write_tensor(arr, path)
    raw = path.read_bytes()
    assert len(raw) == 23 + 24
    np.testing.assert_array_equal(read_tensor(path), arr)


def test_row_major_little_endian_payload(tmp_path):
    path = tmp_path / "t.shrt"
    arr = np.array([[1, 2, 3], [4, 5, 6]], dtype=np.uint8)
    write_tensor(arr, path)
    assert path.read_bytes()[-6:] == bytes([1, 2, 3, 4, 5, 6])


@st.composite
def _arrays(draw):
    dtype = draw(st.sampled_from([np.float32, np.float64, np.uint8]))
    shape = draw(st.lists(st.integers(1, 5), min_size=1, max_size=4))
    n = int(np.prod(shape))
    if dtype is np.uint8:
        flat = draw(
            st.lists(st.integers(0, 255), min_size=n, max_size=n)
        )
        return np.array(flat, dtype=dtype).reshape(shape)
    flat = draw(
        st.lists(
            st.floats(-1e6, 1e6, allow_nan=False, width=32),
            min_size=n,
            max_size=n,
        )
    )
    return np.array(flat, dtype=dtype).reshape(shape)


@settings(max_examples=60, deadline=None)
@given(arr=_arrays())
def test_round_trip_preserves_dtype_shape_values(arr, tmp_path_factory):
    path = tmp_path_factory.mktemp("rt") / "t.shrt"
    write_tensor(arr, path)
    back = read_tensor(path)
    assert back.dtype == arr.dtype
    assert back.shape == arr.shape
    np.testing.assert_array_equal(back, arr)


def test_rejects_zero_dim_and_0d():
    with pytest.raises(TensorFormatError):
        write_tensor(np.float64(3.0), "unused")
    with pytest.raises(TensorFormatError):
        write_tensor(np.empty((2, 0)), "unused")


def test_rejects_unsupported_dtype():
    with pytest.raises(TensorFormatError):
        write_tensor(np.array([1, 2], dtype=np.int64), "unused")


def test_bad_magic(tmp_path):
    path = tmp_path / "t.shrt"
    path.write_bytes(b"NOPE" + bytes(23))
    with pytest.raises(BadMagicError):
        read_tensor(path)


def test_too_short_for_magic(tmp_path):
    path = tmp_path / "t.shrt"
    path.write_bytes(b"SH")
    with pytest.raises(BadMagicError):
        read_tensor(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.zeros((1, 1), dtype=np.float32), path)
    raw = bytearray(path.read_bytes())
    raw[4] = 2
    path.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersionError):
        read_tensor(path)


def test_unknown_dtype_code(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.zeros((1, 1), dtype=np.float32), path)
    raw = bytearray(path.read_bytes())
    raw[5] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError):
        read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.zeros((2, 3), dtype=np.float32), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])  # drop one f32
    with pytest.raises(TruncatedPayloadError):
        read_tensor(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.zeros((2, 3), dtype=np.float32), path)
    path.write_bytes(path.read_bytes()[:12])  # mid-dims
    with pytest.raises(TruncatedPayloadError):
        read_tensor(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.zeros((2, 3), dtype=np.float32), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(TruncatedPayloadError):
        read_tensor(path)


def test_require_finite(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.array([[np.nan, 1.0]]), path)
    # readable without the flag, rejected with it
    assert np.isnan(read_tensor(path)[0, 0])
    with pytest.raises(NonFiniteValuesError):
        read_tensor(path, require_finite=True)


def test_write_replaces_existing_file_atomically(tmp_path):
    path = tmp_path / "t.shrt"
    write_tensor(np.zeros((4, 4)), path)
    write_tensor(np.ones((2, 2), dtype=np.float32), path)
    back = read_tensor(path)
    assert back.shape == (2, 2)
    assert not list(tmp_path.glob("*.tmp"))
