"""Privacy amplification: Toeplitz hashing over GF(2) and pool rounds.

The hash family is the binary Toeplitz matrices, parametrized by
in_len + out_len - 1 seed bits laid out along the diagonals:
T[i][j] = seed[(j - i) mod (in_len + out_len - 1)], so seed index d
is the d-th superdiagonal and index L-d the d-th subdiagonal.  The
family is GF(2)-linear and universal_2, which is what the leftover-hash
reduction of the pool requires.

Application is a cyclic cross-correlation, computed by FFT convolution
for large inputs (values stay far below 2**53, so rounding back to
integers is exact; an explicit guard enforces this) and by direct
integer convolution for small ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import struct

import numpy as np
import scipy.fft

from .bitutils import as_bits, pack_bits, unpack_bits
from .errors import ComputationError, InsufficientEntropyError, ParameterError

_DIRECT_LIMIT = 4096  # below this total size, plain integer convolution wins


@dataclass(frozen=True)
class UniversalHash:
    """One instance of the Toeplitz hash family."""

    seed: np.ndarray
    in_len: int
    out_len: int


def make_hash(seed, in_len: int, out_len: int) -> UniversalHash:
    """Build a hash instance from its seed bits.

    The seed must hold exactly in_len + out_len - 1 bits and the hash
    may only compress (out_len <= in_len).
    """
    seed = as_bits(seed)
    if out_len < 1 or in_len < 1:
        raise ParameterError("hash lengths must be >= 1")
    if out_len > in_len:
        raise ParameterError("hash must not expand: out_len <= in_len")
    if seed.size != in_len + out_len - 1:
        raise ParameterError(
            f"seed must have {in_len + out_len - 1} bits, got {seed.size}")
    seed = seed.copy()
    seed.setflags(write=False)
    return UniversalHash(seed=seed, in_len=in_len, out_len=out_len)


def toeplitz_matrix(h: UniversalHash) -> np.ndarray:
    """Dense 0/1 matrix of the hash; intended for small sizes and tests."""
    i = np.arange(h.out_len)[:, None]
    j = np.arange(h.in_len)[None, :]
    return h.seed[(j - i) % h.seed.size]


def _correlate(x: np.ndarray, h: UniversalHash) -> np.ndarray:
    # y[i] = sum_j seed[(j - i) mod L] x[j]; realized as a linear
    # convolution of x with the reversed diagonal layout of the seed.
    u = np.concatenate([h.seed[h.in_len:], h.seed[:h.in_len]])
    v = u[::-1]
    if x.size + v.size <= _DIRECT_LIMIT:
        conv = np.convolve(x.astype(np.int64), v.astype(np.int64))
        return (conv[h.in_len - 1:h.in_len - 1 + h.out_len] & 1).astype(np.uint8)
    nfft = scipy.fft.next_fast_len(x.size + v.size - 1, real=True)
    conv = scipy.fft.irfft(scipy.fft.rfft(x.astype(np.float64), nfft)
                           * scipy.fft.rfft(v.astype(np.float64), nfft), nfft)
    window = conv[h.in_len - 1:h.in_len - 1 + h.out_len]
    rounded = np.rint(window)
    if float(np.max(np.abs(window - rounded), initial=0.0)) > 0.25:
        raise ComputationError("FFT convolution lost integer exactness")
    return (rounded.astype(np.int64) & 1).astype(np.uint8)


def apply_hash(h: UniversalHash, bits) -> np.ndarray:
    """Hash an in_len bit vector down to out_len bits (GF(2)-linear)."""
    x = as_bits(bits)
    if x.size != h.in_len:
        raise ParameterError(f"input must have {h.in_len} bits, got {x.size}")
    return _correlate(x, h)


def apply_hash_many(h: UniversalHash, rows) -> np.ndarray:
    """Hash each row of a (count, in_len) 0/1 array; bit-identical to
    applying the hash row by row."""
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim != 2 or rows.shape[1] != h.in_len:
        raise ParameterError(f"rows must be (count, {h.in_len})")
    u = np.concatenate([h.seed[h.in_len:], h.seed[:h.in_len]])
    v = u[::-1].astype(np.float64)
    nfft = scipy.fft.next_fast_len(rows.shape[1] + v.size - 1, real=True)
    vf = scipy.fft.rfft(v, nfft)
    out = np.empty((rows.shape[0], h.out_len), dtype=np.uint8)
    # cap the working block around 64 MB of float64
    chunk = max(1, (1 << 23) // nfft)
    for start in range(0, rows.shape[0], chunk):
        block = rows[start:start + chunk].astype(np.float64)
        conv = scipy.fft.irfft(scipy.fft.rfft(block, nfft, axis=1) * vf,
                               nfft, axis=1)
        window = conv[:, h.in_len - 1:h.in_len - 1 + h.out_len]
        rounded = np.rint(window)
        if float(np.max(np.abs(window - rounded), initial=0.0)) > 0.25:
            raise ComputationError("FFT convolution lost integer exactness")
        out[start:start + chunk] = rounded.astype(np.int64) & 1
    return out


def serialize_hash_seed(seed) -> bytes:
    """Length-prefixed packed seed: 32-bit big-endian bit count, then bytes MSB-first."""
    seed = as_bits(seed)
    return struct.pack(">I", seed.size) + pack_bits(seed)


def deserialize_hash_seed(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise ParameterError("hash-seed blob shorter than its length prefix")
    (nbits,) = struct.unpack(">I", data[:4])
    body = data[4:]
    if len(body) != (nbits + 7) // 8:
        raise ParameterError(
            f"hash-seed blob has {len(body)} payload bytes, "
            f"expected {(nbits + 7) // 8} for {nbits} bits")
    return unpack_bits(body, nbits)


@dataclass
class BitPool:
    """Evolving shared secret, sized m*s bits between rounds."""

    bits: np.ndarray
    m: int
    s: int
    round_index: int = 0

    def __post_init__(self):
        self.bits = as_bits(self.bits)

    @property
    def size(self) -> int:
        return int(self.bits.size)

    def copy(self) -> "BitPool":
        return BitPool(self.bits.copy(), self.m, self.s, self.round_index)


def pa_round(pool: BitPool, fresh, hash_seed, t: int, lam: int
             ) -> tuple[np.ndarray, BitPool]:
    """One privacy-amplification round.

    Hashes pool || fresh (m*s + s bits) down to m*s + s - t - lam bits
    deterministically from the public seed.  The first m*s output bits
    become the next pool (bases for the following round); the remaining
    s - t - lam bits are the fresh key z and are never reused as bases.
    The input pool is left untouched, so a failed round has no effect.
    """
    fresh = as_bits(fresh)
    if t < 0 or lam < 0:
        raise ParameterError("t and lambda must be >= 0")
    if pool.size != pool.m * pool.s:
        raise ParameterError(
            f"pool holds {pool.size} bits, expected m*s = {pool.m * pool.s}")
    if fresh.size != pool.s:
        raise ParameterError(
            f"fresh sequence must have s = {pool.s} bits, got {fresh.size}")
    if t + lam > pool.s:
        raise InsufficientEntropyError(
            f"t + lambda = {t + lam} exceeds round size s = {pool.s}")
    in_len = pool.size + fresh.size
    out_len = in_len - t - lam
    h = make_hash(hash_seed, in_len, out_len)
    hashed = apply_hash(h, np.concatenate([pool.bits, fresh]))
    next_pool = BitPool(hashed[:pool.size], pool.m, pool.s,
                        pool.round_index + 1)
    z = hashed[pool.size:]
    return z, next_pool


def hash_seed_length(in_len: int, out_len: int) -> int:
    return in_len + out_len - 1
