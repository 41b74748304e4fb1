"""M-ary interleaved level coding over a cyclic voltage span.

A basis index k in [0, M) sits at voltage vmax*k/M.  The carried bit
moves the level by half the full scale, with the bit-to-level mapping
flipped on odd bases so that the same physical level reads as opposite
bits in adjacent bases.  Recorded noise bounded below vmax/4 is added
before quantization; with the basis known, decoding is exact.

All arithmetic is cyclic: vmax + eps wraps to eps.  Functions accept
scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .params import SystemParams


@dataclass(frozen=True)
class NoiseSample:
    """One recorded masking-noise value, in volts."""

    value: float


@dataclass(frozen=True)
class LevelCode:
    """One quantized channel symbol in [0, 2**q - 1]."""

    code: int


def _check_basis(k, M: int) -> np.ndarray:
    k = np.asarray(k)
    if np.any((k < 0) | (k >= M)):
        raise ParameterError(f"basis index out of range [0, {M})")
    return k.astype(np.int64)


def basis_voltage(k, p: SystemParams):
    """Voltage of basis k: vmax * k / M.

    The nominal full-scale offset on odd indices is the identity under
    the cyclic wrap, so the grid is uniform with spacing vmax/M.
    """
    k = _check_basis(k, p.M)
    v = p.vmax * k / p.M
    return float(v) if v.ndim == 0 else v


def encode_level(a, k, p: SystemParams):
    """Voltage for bit `a` in basis `k`.

    The bit offset is vmax/2, applied to a XOR parity(k) so that
    neighboring bases carry opposite bit assignments (interleaving).
    """
    k = _check_basis(k, p.M)
    a = np.asarray(a).astype(np.int64)
    offset = (a ^ (k & 1)) * (p.vmax / 2.0)
    v = np.mod(p.vmax * k / p.M + offset, p.vmax)
    return float(v) if v.ndim == 0 else v


def draw_noise(p: SystemParams, seed, count: int | None = None):
    """Recorded masking noise: truncated Gaussian on the ADC grid.

    Gaussian with standard deviation sigma_v, conditioned on
    |V| <= noise_bound (resampling rejected draws), then rounded to
    the ADC step.  The bound is an exact grid multiple, so rounding
    never escapes it.  Returns a NoiseSample for scalar draws, an
    ndarray when `count` is given.
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    n = 1 if count is None else int(count)
    if n < 1:
        raise ParameterError("count must be >= 1")
    bound = p.noise_bound
    if bound == 0.0:
        values = np.zeros(n)
    else:
        values = rng.normal(0.0, p.sigma_v, size=n)
        bad = np.abs(values) > bound
        while bad.any():
            values[bad] = rng.normal(0.0, p.sigma_v, size=int(bad.sum()))
            bad = np.abs(values) > bound
        values = np.rint(values / p.level_step) * p.level_step
    if count is None:
        return NoiseSample(float(values[0]))
    return values


def _noise_values(v):
    if isinstance(v, NoiseSample):
        return np.asarray(v.value)
    return np.asarray(v, dtype=float)


def transmit_level(a, k, v, p: SystemParams):
    """Channel symbol for (bit, basis, noise): quantize((level + V) mod vmax).

    Rounds to the nearest of 2**q codes and wraps at full scale, so a
    voltage just below vmax lands back in the code-0 region.
    """
    voltage = np.mod(encode_level(a, k, p) + _noise_values(v), p.vmax)
    codes = np.mod(np.rint(voltage / p.level_step).astype(np.int64), p.levels)
    if codes.ndim == 0:
        return LevelCode(int(codes))
    return codes.astype(np.uint16)


def _code_values(code):
    if isinstance(code, LevelCode):
        return np.asarray(code.code)
    return np.asarray(code)


def _cyclic_distance(x, y, span):
    d = np.abs(x - y)
    return np.minimum(d, span - d)


def decode_bit(code, k, p: SystemParams):
    """Recover the bit given the basis: nearest-hypothesis rule.

    Picks the bit whose encoded level is cyclically closest to the
    received code; exact midpoints resolve to 0.  With noise truncated
    inside the decision margin this decoding is error-free.
    """
    received = _code_values(code) * p.level_step
    k = np.asarray(k)
    d0 = _cyclic_distance(received, encode_level(np.zeros_like(k), k, p), p.vmax)
    d1 = _cyclic_distance(received, encode_level(np.ones_like(k), k, p), p.vmax)
    bits = (d1 < d0).astype(np.uint8)
    return int(bits) if bits.ndim == 0 else bits


def codes_to_bytes(codes) -> bytes:
    """Serialize level codes as 16-bit big-endian words (upper bits zero)."""
    arr = np.asarray(_code_values(codes), dtype=np.uint64)
    if arr.ndim == 0:
        arr = arr[None]
    if np.any(arr > 0xFFFF):
        raise ParameterError("level code exceeds 16-bit container")
    return arr.astype(">u2").tobytes()


def codes_from_bytes(data: bytes) -> np.ndarray:
    if len(data) % 2:
        raise ParameterError("level-code byte stream must be even-length")
    return np.frombuffer(data, dtype=">u2").astype(np.uint16)
