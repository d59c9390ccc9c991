"""Bit-exact NPY v1.0 serialization for float32 C-order tensors.

Only little-endian float32, C-order arrays are supported in either
direction; that is the one dtype this toolkit emits, and the narrow scope
keeps the byte layout fully pinned down. Payload bytes round trip verbatim,
NaN bit patterns included.

Layout: 6 magic bytes (0x93 'NUMPY'), version 1.0, a little-endian u16
header length, then an ASCII header dict padded with spaces so the whole
preamble is a multiple of 64 bytes and ends in a newline, then the raw
little-endian float32 payload.
"""

from __future__ import annotations

import ast
import struct
from typing import BinaryIO

import numpy as np

from .errors import BadMagic, TruncatedPayload, UnsupportedDtype, UnsupportedOrder

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
ALIGN = 64


def _header_bytes(shape: tuple[int, ...]) -> bytes:
    header = ("{'descr': '<f4', 'fortran_order': False, 'shape': "
              f"{tuple(int(s) for s in shape)!r}, }}")
    base = len(MAGIC) + len(VERSION) + 2  # preamble before the dict text
    pad = ALIGN - (base + len(header) + 1) % ALIGN
    if pad == ALIGN:
        pad = 0
    return (header + " " * pad + "\n").encode("ascii")


def write_npy(arr: np.ndarray, sink: BinaryIO) -> None:
    """Write a float32 array to ``sink`` as NPY v1.0.

    The array is converted to C order if needed; dtype must already be
    float32 (no silent casts of actual values).
    """
    a = np.asarray(arr)
    if a.dtype != np.float32:
        raise UnsupportedDtype(f"write_npy only emits float32, got {a.dtype}")
    shape = a.shape
    a = np.ascontiguousarray(a)  # promotes 0-d to (1,); header keeps the true shape
    header = _header_bytes(shape)
    sink.write(MAGIC)
    sink.write(VERSION)
    sink.write(struct.pack("<H", len(header)))
    sink.write(header)
    sink.write(a.tobytes(order="C"))


def write_npy_file(arr: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        write_npy(arr, f)


def read_npy(source: BinaryIO) -> np.ndarray:
    """Read an NPY v1.0 float32 C-order array from ``source``.

    Raises:
        BadMagic: wrong magic bytes, wrong version, or a malformed header.
        UnsupportedDtype: descr other than '<f4'.
        UnsupportedOrder: fortran_order true.
        TruncatedPayload: fewer payload bytes than the shape requires.
    """
    magic = source.read(len(MAGIC))
    if magic != MAGIC:
        raise BadMagic(f"bad magic bytes {magic!r}")
    version = source.read(2)
    if version != VERSION:
        raise BadMagic(f"unsupported version bytes {version!r}, expected 1.0")
    raw_len = source.read(2)
    if len(raw_len) != 2:
        raise BadMagic("preamble ends before header length")
    (hlen,) = struct.unpack("<H", raw_len)
    header = source.read(hlen)
    if len(header) != hlen:
        raise BadMagic(f"header truncated: expected {hlen} bytes, got {len(header)}")
    try:
        meta = ast.literal_eval(header.decode("ascii").strip())
    except (ValueError, SyntaxError, UnicodeDecodeError) as e:
        raise BadMagic(f"malformed header dict: {e}") from None
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise BadMagic(f"header keys {sorted(meta) if isinstance(meta, dict) else meta}")
    if meta["descr"] != "<f4":
        raise UnsupportedDtype(f"descr {meta['descr']!r}, only '<f4' supported")
    if meta["fortran_order"] is not False:
        raise UnsupportedOrder(f"fortran_order {meta['fortran_order']!r} not supported")
    shape = meta["shape"]
    if (not isinstance(shape, tuple)
            or not all(isinstance(s, int) and s >= 0 for s in shape)):
        raise BadMagic(f"invalid shape {shape!r}")
    count = 1
    for s in shape:
        count *= s
    expected = count * 4
    payload = source.read(expected)
    if len(payload) != expected:
        raise TruncatedPayload(expected, len(payload))
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return arr.copy()  # own the memory; frombuffer views the read-only bytes


def read_npy_file(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_npy(f)
