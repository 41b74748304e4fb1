"""Shared-secret lifecycle and one-time-pad key consumption.

Key hygiene rules: the initial secret is loaded once per session and
mutable source buffers are wiped; distilled key bits are consumed
strictly monotonically and erased as they are used, so no bit can ever
pad two messages.
"""

from __future__ import annotations

from dataclasses import dataclass

import os

import numpy as np

from .bitutils import as_bits, hex_to_bits, pack_bits, unpack_bits
from .errors import ParameterError
from .params import SystemParams


@dataclass
class SharedSecret:
    """Initial pool contents c0, exactly m*s bits."""

    bits: np.ndarray
    length: int

    def __post_init__(self):
        self.bits = as_bits(self.bits)
        if self.bits.size != self.length:
            raise ParameterError(
                f"secret holds {self.bits.size} bits, declared {self.length}")


def load_secret(source, params: SystemParams,
                zeroize_file: bool = False) -> SharedSecret:
    """Load c0 from hex text, raw bytes, a mutable buffer or a file path.

    The decoded length must be exactly m*s bits.  Mutable byte buffers
    are wiped after decoding; pass `zeroize_file=True` to overwrite a
    file source with zeros once loaded (off by default so fixtures
    survive repeated runs).
    """
    need = params.m * params.s
    if isinstance(source, (bytes, bytearray, memoryview)):
        data = bytes(source)
        bits = unpack_bits(data, len(data) * 8)
        if isinstance(source, (bytearray, memoryview)):
            source[:] = bytes(len(source))
    elif isinstance(source, str) and os.path.exists(source):
        with open(source, "rb") as fh:
            data = fh.read()
        try:
            bits = hex_to_bits(data.decode("ascii"))
        except (UnicodeDecodeError, ParameterError):
            bits = unpack_bits(data, len(data) * 8)
        if zeroize_file:
            with open(source, "r+b") as fh:
                fh.write(bytes(len(data)))
    elif isinstance(source, str):
        bits = hex_to_bits(source)
    else:
        bits = as_bits(source)
    if bits.size < need or bits.size - need >= 8:
        raise ParameterError(
            f"secret must decode to m*s = {need} bits, got {bits.size}")
    if bits.size != need:
        # Byte-oriented sources carry up to 7 bits of padding.
        if bits[need:].any():
            raise ParameterError("nonzero padding past m*s bits")
        bits = bits[:need]
    return SharedSecret(bits=bits, length=need)


class KeyStream:
    """Append-only distilled key material with destructive consumption.

    Bits enter via append() and leave, once only, via consume(); the
    consumed storage is zeroed immediately.  The consumption offset is
    strictly monotone, which is asserted on every call.
    """

    def __init__(self, bits=None):
        self._bits = as_bits(bits).copy() if bits is not None \
            else np.zeros(0, dtype=np.uint8)
        self._offset = 0

    @property
    def consumed_offset(self) -> int:
        return self._offset

    @property
    def available(self) -> int:
        return int(self._bits.size - self._offset)

    def append(self, bits) -> None:
        self._bits = np.concatenate([self._bits, as_bits(bits)])

    def consume(self, nbits: int) -> np.ndarray:
        if nbits < 0:
            raise ParameterError("cannot consume a negative bit count")
        if nbits > self.available:
            raise ParameterError(
                f"key exhausted: need {nbits} bits, have {self.available}; "
                "key material is never reused")
        start = self._offset
        out = self._bits[start:start + nbits].copy()
        self._bits[start:start + nbits] = 0
        self._offset = start + nbits
        assert self._offset >= start
        return out


def otp_encrypt(key: KeyStream, plaintext: bytes) -> bytes:
    """XOR the plaintext with fresh key bits (consumed, never reusable)."""
    if len(plaintext) == 0:
        return b""
    pad = pack_bits(key.consume(8 * len(plaintext)))
    data = np.frombuffer(plaintext, dtype=np.uint8)
    mask = np.frombuffer(pad, dtype=np.uint8)
    return (data ^ mask).tobytes()


def otp_decrypt(key: KeyStream, ciphertext: bytes) -> bytes:
    """Symmetric to otp_encrypt: the peer consumes the same key range."""
    return otp_encrypt(key, ciphertext)
