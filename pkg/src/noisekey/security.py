"""Security accounting: attacker error, leaked bits, mutual information.

The eavesdropper model is a passive observer of the channel symbols
with uniform ignorance of the basis sequence.  Its bit-error
probability is computed two independent ways: an exact Bayes
computation summing over the discrete ADC alphabet, and a Monte-Carlo
estimator that replays the codec on random (bit, basis, noise) draws
and applies the optimal guesser.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.special import ndtr

from . import codec
from .errors import ComputationError, ParameterError
from .params import SystemParams

LN2 = math.log(2.0)
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class LeakageEstimate:
    """Per-round security ledger: error rate, leaked bits, residual info."""

    p_e: float
    t: int
    lam: int
    i_lambda: float
    s: int


@dataclass(frozen=True)
class EmpiricalError:
    """Monte-Carlo error frequency with a 95% binomial interval."""

    p_e: float
    ci_low: float
    ci_high: float
    trials: int

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def indistinguishability(delta_k: int, p: SystemParams) -> float:
    """Probability that two levels `delta_k` apart cannot be told apart.

    exp(-(<n>/4) * (delta_k/M)^2), equivalently
    exp(-delta_k^2 / (2 sigma_k^2)) with the level deviation sigma_k.
    """
    if delta_k < 0:
        raise ParameterError("delta_k must be >= 0")
    return math.exp(-(p.mean_photons / 4.0) * (delta_k / p.M) ** 2)


def sigma_k(p: SystemParams) -> float:
    """Expected shot-noise deviation in units of levels: sqrt(2/<n>) * M."""
    return math.sqrt(2.0 / p.mean_photons) * p.M


def noise_pmf(p: SystemParams) -> tuple[np.ndarray, int]:
    """Distribution of the recorded noise over signed ADC-step offsets.

    Returns (pmf, B) where pmf[j + B] = P(noise == j * step) for
    j in [-B, B], matching codec.draw_noise exactly: a Gaussian
    conditioned on |V| <= B*step, then rounded to the grid (edge cells
    are half-width).
    """
    step = p.level_step
    B = int(round(p.noise_bound / step))
    if B == 0:
        return np.array([1.0]), 0
    j = np.arange(-B, B + 1)
    upper = np.minimum((j + 0.5) * step, B * step) / p.sigma_v
    lower = np.maximum((j - 0.5) * step, -B * step) / p.sigma_v
    pmf = ndtr(upper) - ndtr(lower)
    total = pmf.sum()
    if not total > 0:
        raise ComputationError("noise pmf vanished; sigma_v too small")
    return pmf / total, B


def _constellation(p: SystemParams, a: int) -> np.ndarray:
    """Code positions of bit `a` across all M bases, in ADC steps."""
    k = np.arange(p.M, dtype=np.int64)
    spacing = p.levels // p.M
    half = p.levels // 2
    return (k * spacing + (np.full(p.M, a) ^ (k & 1)) * half) % p.levels


def level_likelihoods(p: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """P(code | bit) over the full code alphabet, for bit 0 and bit 1.

    Exact summation on the ADC grid: uniform mixture over the M bases
    convolved (cyclically) with the discrete noise distribution.
    """
    pmf, B = noise_pmf(p)
    like = []
    for a in (0, 1):
        dist = np.zeros(p.levels)
        positions = (_constellation(p, a)[:, None]
                     + np.arange(-B, B + 1)[None, :]) % p.levels
        np.add.at(dist, positions, pmf[None, :] / p.M)
        like.append(dist)
    p0, p1 = like
    if not (math.isclose(p0.sum(), 1.0, abs_tol=1e-9)
            and math.isclose(p1.sum(), 1.0, abs_tol=1e-9)):
        raise ComputationError("level likelihoods do not normalize")
    return p0, p1


def attacker_error_analytic(p: SystemParams) -> float:
    """Bayes-optimal bit-error probability of the basis-blind observer.

    With equal bit priors the minimum-error probability is
    0.5 * sum_c min(P(c|0), P(c|1)).  Note that the interleaved
    full-cycle constellation makes the two mixtures identical for
    M >= 4, pinning the error at exactly 1/2: the symbol alone carries
    no bit information.  Degenerate one- and two-basis layouts leak the
    bit completely (error 0).
    """
    p0, p1 = level_likelihoods(p)
    # Bayes error of an equal-prior binary test is at most 1/2; the
    # clamp strips summation round-off.
    return min(0.5, max(0.0, 0.5 * float(np.minimum(p0, p1).sum())))


class BayesGuesser:
    """Maximum-likelihood bit guesser over the level alphabet.

    Precomputes argmax_a P(c|a) per code; likelihood ties resolve to 0,
    which against a uniform bit source performs identically to any
    other fixed tie rule.
    """

    def __init__(self, p: SystemParams):
        self.params = p
        p0, p1 = level_likelihoods(p)
        self.table = (p1 > p0).astype(np.uint8)

    def guess(self, codes) -> np.ndarray:
        codes = np.asarray(codec._code_values(codes), dtype=np.int64)
        if np.any((codes < 0) | (codes >= self.params.levels)):
            raise ParameterError("code outside ADC alphabet")
        return self.table[codes]


def wilson_interval(errors: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    phat = errors / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials
                         + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def attacker_error_empirical(trials: int, p: SystemParams, seed,
                             known_basis: bool = False) -> EmpiricalError:
    """Monte-Carlo attacker error over random (bit, basis, noise) draws.

    Simulates the codec end to end and scores the Bayes-optimal
    guesser; with `known_basis` the guesser is handed the true basis
    and reduces to legitimate decoding.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    guesser = None if known_basis else BayesGuesser(p)
    errors = 0
    chunk = 1 << 20
    remaining = trials
    while remaining > 0:
        n = min(chunk, remaining)
        bits = rng.integers(0, 2, size=n, dtype=np.int64)
        bases = rng.integers(0, p.M, size=n, dtype=np.int64)
        noise = codec.draw_noise(p, rng, count=n)
        codes = codec.transmit_level(bits, bases, noise, p)
        if known_basis:
            guesses = codec.decode_bit(codes, bases, p)
        else:
            guesses = guesser.guess(codes)
        errors += int(np.count_nonzero(guesses != bits))
        remaining -= n
    low, high = wilson_interval(errors, trials)
    return EmpiricalError(p_e=errors / trials, ci_low=low, ci_high=high,
                          trials=trials)


def leaked_bits(p_e: float, s: int) -> int:
    """Conservative leak count per round: ceil((0.5 - p_e) * s).

    Rounded up, except that values within 1e-9 of an integer snap to it
    so float fuzz cannot inflate the ledger by one bit.
    """
    if not 0.0 <= p_e <= 0.5:
        raise ParameterError("p_e must lie in [0, 0.5]")
    if s < 0:
        raise ParameterError("s must be >= 0")
    x = (0.5 - p_e) * s
    nearest = round(x)
    if abs(x - nearest) < 1e-9 * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


def mutual_information(lam: int) -> float:
    """Residual attacker information after hashing away `lam` bits.

    1 / (ln 2 * 2**lam) bits; halves exactly per unit of lam.
    """
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    return 2.0 ** (-lam) / LN2


def mutual_information_nr(n: int, t: int, r: int) -> float:
    """Same bound in the (n, t, r) parametrization: lambda = n - t - r."""
    lam = n - t - r
    if lam < 0:
        raise ParameterError(f"n - t - r = {lam} must be >= 0")
    return mutual_information(lam)


def leakage_estimate(p: SystemParams, p_e: float | None = None) -> LeakageEstimate:
    """Round ledger from channel parameters (analytic Pe unless given)."""
    if p_e is None:
        p_e = attacker_error_analytic(p)
    t = leaked_bits(p_e, p.s)
    return LeakageEstimate(p_e=p_e, t=t, lam=p.lam,
                           i_lambda=mutual_information(p.lam), s=p.s)


@dataclass(frozen=True)
class SweepPoint:
    """One attacker-sweep grid point (CSV row)."""

    M: int
    mean_photons: float
    p_e_analytic: float
    p_e_empirical: float
    ci_low: float
    ci_high: float
    t: int
    lam: int
    log10_i_lambda: float


def attacker_sweep(m_values, photon_values, trials: int, seed,
                   s: int = 10 ** 6, lam: int = 64,
                   params_factory=None) -> list[SweepPoint]:
    """Grid sweep of analytic and empirical attacker error.

    Each point gets an independently derived RNG stream, so results do
    not depend on grid order and may be recomputed point-wise.
    """
    from .params import params_for
    factory = params_factory or (lambda M, nbar: params_for(M, nbar, s=s, lam=lam))
    rows = []
    seeds = np.random.SeedSequence(seed).spawn(len(m_values) * len(photon_values))
    idx = 0
    for M in m_values:
        for nbar in photon_values:
            p = factory(M, nbar)
            analytic = attacker_error_analytic(p)
            emp = attacker_error_empirical(trials, p,
                                           np.random.default_rng(seeds[idx]))
            idx += 1
            rows.append(SweepPoint(M=M, mean_photons=nbar,
                                   p_e_analytic=analytic,
                                   p_e_empirical=emp.p_e,
                                   ci_low=emp.ci_low, ci_high=emp.ci_high,
                                   t=leaked_bits(analytic, s), lam=lam,
                                   log10_i_lambda=math.log10(
                                       mutual_information(lam))))
    return rows


def sweep_to_csv(rows: list[SweepPoint], path) -> None:
    with open(path, "w") as fh:
        fh.write("M,mean_photons,p_e_analytic,p_e_empirical,"
                 "ci_low,ci_high,t,lambda,log10_i_lambda\n")
        for r in rows:
            fh.write(f"{r.M},{r.mean_photons!r},{r.p_e_analytic!r},"
                     f"{r.p_e_empirical!r},{r.ci_low!r},{r.ci_high!r},"
                     f"{r.t},{r.lam},{r.log10_i_lambda!r}\n")
