"""Simulated physical random bit generator.

Models the opto-electronic bit source: Gaussian shot-noise photocurrent,
optional ADC digitization, threshold bit extraction and LFSR whitening,
plus the statistics used to validate the randomness of the output
(run-length histograms with an exponential-decay fit, and a Fourier
flatness check).
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.optimize import curve_fit

from .bitutils import as_bits
from .errors import FitError, ParameterError

#: Maximal-length feedback mask for the default 16-bit register
#: (polynomial x^16 + x^14 + x^13 + x^11 + 1; bit p-1 set per term x^p).
DEFAULT_LFSR_TAPS = 0xB400
DEFAULT_LFSR_WIDTH = 16

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ShotNoiseSource:
    """Shot-noise-limited photocurrent model.

    The detected signal has mean `mean_level` and relative fluctuation
    1/sqrt(mean_photons), i.e. standard deviation
    mean_level / sqrt(mean_photons).  Detector gain and laser intensity
    are folded into `mean_level`.
    """

    mean_level: float
    mean_photons: float
    seed: int = 0

    def __post_init__(self):
        if not self.mean_photons > 0:
            raise ParameterError("mean_photons must be positive")

    @property
    def sigma(self) -> float:
        return self.mean_level / math.sqrt(self.mean_photons)


@dataclass(frozen=True)
class AdcModel:
    """Uniform quantizer with 2**bits levels over [0, full_scale]."""

    bits: int
    full_scale: float

    def __post_init__(self):
        if self.bits < 1:
            raise ParameterError("ADC bits must be >= 1")
        if not self.full_scale > 0:
            raise ParameterError("full_scale must be positive")

    @property
    def levels(self) -> int:
        return 1 << self.bits

    def digitize(self, values) -> np.ndarray:
        """Round to the nearest code, clipping to [0, 2**bits - 1]."""
        step = self.full_scale / self.levels
        codes = np.rint(np.asarray(values, dtype=float) / step)
        return np.clip(codes, 0, self.levels - 1).astype(np.int64)


@dataclass(frozen=True)
class LfsrWhitener:
    """Galois LFSR used to decorrelate the raw bit stream.

    `taps` has bit p-1 set for every feedback polynomial term x^p (the
    constant term is implicit).  The register shifts right; the emitted
    bit is the old LSB.  The whitener is immutable: operations derive
    new instances instead of mutating state.
    """

    width: int = DEFAULT_LFSR_WIDTH
    taps: int = DEFAULT_LFSR_TAPS
    state: int = 1

    def __post_init__(self):
        if self.width < 1:
            raise ParameterError("LFSR width must be >= 1")
        mask = (1 << self.width) - 1
        if not 0 < self.state <= mask:
            raise ParameterError("LFSR state must be nonzero and fit width")
        if not 0 < self.taps <= mask:
            raise ParameterError("LFSR taps must be nonzero and fit width")

    @classmethod
    def from_seed(cls, seed: int, width: int = DEFAULT_LFSR_WIDTH,
                  taps: int = DEFAULT_LFSR_TAPS) -> "LfsrWhitener":
        mask = (1 << width) - 1
        state = (seed & mask) or 1
        return cls(width=width, taps=taps, state=state)

    def advanced(self, steps: int) -> "LfsrWhitener":
        """Whitener state after emitting `steps` bits."""
        _, end = _lfsr_run(self, steps)
        return LfsrWhitener(self.width, self.taps, end)


def _lfsr_run(w: LfsrWhitener, count: int) -> tuple[np.ndarray, int]:
    """Emit `count` LFSR bits and the end state.

    The state orbit of a nonzero register is purely periodic, so once
    the initial state recurs the remaining output is tiled instead of
    stepped, which keeps multi-megabit whitening cheap.
    """
    out = np.empty(count, dtype=np.uint8)
    state = w.state
    taps = w.taps
    period = None
    produced = 0
    while produced < count:
        bit = state & 1
        out[produced] = bit
        state >>= 1
        if bit:
            state ^= taps
        produced += 1
        if state == w.state:
            period = produced
            break
    if period is not None and produced < count:
        head = out[:period].copy()
        reps = count // period + 1
        out = np.tile(head, reps)[:count]
        # End state: step only the residue past the last full period.
        state = w.state
        for bit in head[:count % period]:
            state >>= 1
            if bit:
                state ^= taps
    return out, state


def lfsr_stream(w: LfsrWhitener, count: int) -> np.ndarray:
    """First `count` output bits of the register."""
    if count < 0:
        raise ParameterError("count must be >= 0")
    bits, _ = _lfsr_run(w, count)
    return bits


def sample_photocurrent(source: ShotNoiseSource, count: int,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw `count` i.i.d. photocurrent samples.

    Gaussian with mean `source.mean_level` and standard deviation
    mean_level/sqrt(mean_photons); valid in the multi-photon regime
    where the photon-number distribution is effectively normal.
    Deterministic given `source.seed` when no generator is passed.
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    if rng is None:
        rng = np.random.default_rng(source.seed)
    return rng.normal(source.mean_level, source.sigma, size=count)


def threshold_bits(samples, mean: float) -> np.ndarray:
    """Classify samples against the average: above -> 1, else 0.

    A sample exactly equal to `mean` maps to 0 (fixed tie rule; the
    event has measure zero for analog inputs).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ParameterError("samples must be nonempty")
    return (samples > mean).astype(np.uint8)


def whiten(w: LfsrWhitener, bits) -> np.ndarray:
    """XOR the stream with the register output.

    Length-preserving and self-inverse for the same initial state:
    whiten(w, whiten(w, x)) == x.
    """
    bits = as_bits(bits)
    mask, _ = _lfsr_run(w, bits.size)
    return bits ^ mask


def whiten_stream(w: LfsrWhitener, bits) -> tuple[np.ndarray, LfsrWhitener]:
    """Like whiten, but also returns the advanced whitener for callers
    that feed a continuous stream through in chunks."""
    bits = as_bits(bits)
    mask, end_state = _lfsr_run(w, bits.size)
    return bits ^ mask, LfsrWhitener(w.width, w.taps, end_state)


def generate_bits(source: ShotNoiseSource, count: int,
                  whitener: LfsrWhitener | None = None,
                  adc: AdcModel | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Full bit-generation pipeline: sample, (digitize,) threshold, whiten."""
    samples = sample_photocurrent(source, count, rng=rng)
    mean = source.mean_level
    if adc is not None:
        samples = adc.digitize(samples).astype(float)
        mean = float(adc.digitize([mean])[0])
    bits = threshold_bits(samples, mean)
    if whitener is not None:
        bits = whiten(whitener, bits)
    return bits


@dataclass
class RunLengthHistogram:
    """Counts of maximal same-symbol runs by exact length.

    `entries` is a list of (k, count) with k strictly increasing and
    contiguous from 1 up to the longest observed run; interior zeros
    are kept because they are genuine measurements.
    """

    entries: list[tuple[int, int]]
    total_bits: int

    def counts(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.array([e[0] for e in self.entries], dtype=float)
        n = np.array([e[1] for e in self.entries], dtype=float)
        return k, n

    def nonzero_entries(self) -> int:
        return sum(1 for _, c in self.entries if c > 0)


@dataclass(frozen=True)
class FitResult:
    """Parameters of the exponential run-length law count(k) = c * 2**(-(1-epsilon) k)."""

    c: float
    epsilon: float
    c_err: float
    epsilon_err: float


def run_length_histogram(bits, symbol: int) -> RunLengthHistogram:
    """Histogram of maximal runs of `symbol` in the stream."""
    bits = as_bits(bits)
    if bits.size == 0:
        raise ParameterError("bits must be nonempty")
    if symbol not in (0, 1):
        raise ParameterError("symbol must be 0 or 1")
    match = np.concatenate(([0], (bits == symbol).view(np.uint8), [0]))
    edges = np.diff(match.astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    lengths = ends - starts
    if lengths.size == 0:
        return RunLengthHistogram(entries=[], total_bits=int(bits.size))
    counts = np.bincount(lengths)
    entries = [(k, int(counts[k])) for k in range(1, len(counts))]
    return RunLengthHistogram(entries=entries, total_bits=int(bits.size))


def _run_length_model(k, c, epsilon):
    return c * np.exp(-(1.0 - epsilon) * LN2 * k)


def fit_run_lengths(hist: RunLengthHistogram) -> FitResult:
    """Weighted least-squares fit of the run-length decay law.

    Model: count(k) = c * 2**(-(1 - epsilon) k), epsilon measuring the
    departure from the ideal fair-bit law 1/2**k.  Weights follow
    Poisson counting error, sigma_k = sqrt(max(count, 1)), and the
    returned standard errors take those sigmas as absolute.
    """
    if hist.nonzero_entries() < 3:
        raise FitError("fit needs at least 3 nonzero histogram entries")
    k, n = hist.counts()
    sigma = np.sqrt(np.maximum(n, 1.0))
    c0 = 2.0 * n[np.argmax(n)]
    try:
        popt, pcov = curve_fit(_run_length_model, k, n, p0=(c0, 0.0),
                               sigma=sigma, absolute_sigma=True, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"run-length fit failed to converge: {exc}") from exc
    perr = np.sqrt(np.diag(pcov))
    if not np.isfinite(popt).all() or popt[0] <= 0:
        raise FitError(f"run-length fit degenerate: c={popt[0]!r}")
    return FitResult(c=float(popt[0]), epsilon=float(popt[1]),
                     c_err=float(perr[0]), epsilon_err=float(perr[1]))


@dataclass
class FlatnessReport:
    """Fourier flatness of a ±1-mapped bit stream.

    `rel_amplitude` holds |X_k| for all rfft bins (DC through Nyquist)
    divided by the white-noise expectation sqrt(pi*N)/2, so a flat
    spectrum hovers around 1.
    """

    n_bits: int
    rel_amplitude: np.ndarray
    mean_amplitude: float
    max_amplitude: float
    peak_bin: int

    @property
    def max_over_mean(self) -> float:
        return self.max_amplitude / self.mean_amplitude

    def passes(self, threshold: float = 6.0) -> bool:
        """Gate: no bin exceeds `threshold` times the mean amplitude."""
        return self.max_over_mean <= threshold


def spectrum_flatness(bits) -> FlatnessReport:
    """DFT amplitude profile of the stream mapped onto {-1, +1}.

    Requires a power-of-two length of at least 1024 so bins line up
    with the usual radix-2 analysis.
    """
    bits = as_bits(bits)
    n = bits.size
    if n < 1024 or n & (n - 1):
        raise ParameterError("length must be a power of two >= 1024")
    signal = bits.astype(np.float64) * 2.0 - 1.0
    amps = np.abs(np.fft.rfft(signal))
    expected = math.sqrt(math.pi * n) / 2.0
    rel = amps / expected
    peak = int(np.argmax(rel))
    return FlatnessReport(n_bits=n, rel_amplitude=rel,
                          mean_amplitude=float(rel.mean()),
                          max_amplitude=float(rel[peak]),
                          peak_bin=peak)


def histogram_to_csv(hist: RunLengthHistogram, path) -> None:
    with open(path, "w") as fh:
        fh.write("k,count\n")
        for k, count in hist.entries:
            fh.write(f"{k},{count}\n")


def histogram_from_csv(path) -> RunLengthHistogram:
    entries = []
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "k,count":
            raise ParameterError(f"{path}: expected header 'k,count'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            k_text, count_text = line.split(",")
            entries.append((int(k_text), int(count_text)))
    ks = [k for k, _ in entries]
    if ks != sorted(set(ks)):
        raise ParameterError(f"{path}: k values must be strictly increasing")
    total = sum(k * c for k, c in entries)
    return RunLengthHistogram(entries=entries, total_bits=total)


def fit_to_csv(fit: FitResult, path) -> None:
    with open(path, "w") as fh:
        fh.write("parameter,value,stderr\n")
        fh.write(f"c,{fit.c!r},{fit.c_err!r}\n")
        fh.write(f"epsilon,{fit.epsilon!r},{fit.epsilon_err!r}\n")
