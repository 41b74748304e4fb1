"""Bit-vector helpers.

Bit vectors are numpy uint8 arrays holding 0/1 values.  Packed byte
serialization is most-significant-bit first throughout the package.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def as_bits(values) -> np.ndarray:
    """Coerce an iterable of 0/1 values to the canonical bit array."""
    bits = np.asarray(values, dtype=np.uint8)
    if bits.ndim != 1:
        raise ParameterError("bit vector must be one-dimensional")
    if bits.size and bits.max() > 1:
        raise ParameterError("bit vector entries must be 0 or 1")
    return bits


def pack_bits(bits) -> bytes:
    """Pack a bit vector into bytes, MSB first, zero-padded at the tail."""
    return np.packbits(as_bits(bits)).tobytes()


def unpack_bits(data: bytes, nbits: int) -> np.ndarray:
    """Unpack `nbits` bits from MSB-first packed bytes."""
    if nbits < 0 or len(data) * 8 < nbits:
        raise ParameterError(f"need {nbits} bits, got {len(data) * 8}")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=nbits)


def bits_to_hex(bits) -> str:
    return pack_bits(bits).hex()


def hex_to_bits(text: str, nbits: int | None = None) -> np.ndarray:
    """Decode a hex string to bits; `nbits` defaults to the full length."""
    try:
        data = bytes.fromhex(text.strip())
    except ValueError as exc:
        raise ParameterError(f"invalid hex: {exc}") from exc
    if nbits is None:
        nbits = len(data) * 8
    return unpack_bits(data, nbits)


def bits_to_file(bits, path) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_bits(bits))


def bits_from_file(path, nbits: int | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    return unpack_bits(data, len(data) * 8 if nbits is None else nbits)
