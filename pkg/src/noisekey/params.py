"""System parameters shared by the codec, security math and protocol."""

from __future__ import annotations

from dataclasses import dataclass, replace

import math

from .errors import ParameterError

#: Config-file keys accepted by :func:`parse_config`.
CONFIG_KEYS = (
    "M", "adc_bits", "vmax", "mean_photons", "sigma_v", "s", "lambda",
    "rounds", "seed_a", "seed_b", "c0_hex",
)


@dataclass(frozen=True)
class SystemParams:
    """Protocol and physics constants for one deployment.

    Attributes
    ----------
    M : int
        Number of transmission bases; a power of two.
    vmax : float
        Full-scale voltage of the cyclic modulation span.
    adc_bits : int
        ADC resolution q; the channel carries codes in [0, 2**q - 1].
    mean_photons : float
        Average photon number <n> per detected bit; sets the relative
        shot-noise magnitude 1/sqrt(<n>).
    sigma_v : float
        Standard deviation (volts) of the recorded masking noise.
    s : int
        Bits exchanged per protocol round.
    lam : int
        Security parameter lambda: extra bits sacrificed per round.
    """

    M: int = 256
    vmax: float = 1.0
    adc_bits: int = 10
    mean_photons: float = 100.0
    sigma_v: float = 1.0 / 16.0
    s: int = 4096
    lam: int = 64

    def __post_init__(self):
        if self.M < 1 or self.M & (self.M - 1):
            raise ParameterError(f"M must be a power of two, got {self.M}")
        if self.adc_bits < 1:
            raise ParameterError("adc_bits must be >= 1")
        if self.levels < self.M:
            raise ParameterError(
                f"ADC must resolve all bases: 2^{self.adc_bits} < M={self.M}")
        if not self.vmax > 0:
            raise ParameterError("vmax must be positive")
        if not self.mean_photons > 0:
            raise ParameterError("mean_photons must be positive")
        if self.s < 1:
            raise ParameterError("s must be >= 1")
        if self.lam < 0:
            raise ParameterError("lambda must be >= 0")
        if not 0 < self.sigma_v < self.vmax:
            raise ParameterError("sigma_v must satisfy 0 < sigma_v < vmax")
        # Noise-vs-spacing ordering; degenerate basis counts (M <= 4 has a
        # zero noise window, see noise_bound) are exempt so that
        # single-basis reference columns remain constructible.
        if self.M > 4 and not self.sigma_v > self.vmax / self.M:
            raise ParameterError(
                "sigma_v must exceed the basis spacing vmax/M")

    @property
    def m(self) -> int:
        """Bits per basis index, log2(M)."""
        return self.M.bit_length() - 1

    @property
    def levels(self) -> int:
        """ADC level count 2**q."""
        return 1 << self.adc_bits

    @property
    def level_step(self) -> float:
        """Voltage width of one ADC level."""
        return self.vmax / self.levels

    @property
    def noise_bound(self) -> float:
        """Truncation bound for the recorded noise.

        Keeping |V| <= vmax/4 - vmax/M leaves the legitimate decoder a
        margin of one basis spacing over the worst quantization error,
        so decoding with a known basis is exact.  For M <= 4 the window
        closes and the noise degenerates to zero.
        """
        return max(0.0, self.vmax / 4.0 - self.vmax / self.M)

    def with_(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


def params_for(M: int, mean_photons: float, s: int = 4096,
               lam: int = 64, vmax: float = 1.0) -> SystemParams:
    """Physically coupled parameter set for a (M, <n>) sweep point.

    The masking noise is the recorded shot noise itself, so its voltage
    deviation follows sqrt(2/<n>) * vmax (the level deviation
    sqrt(2/<n>) * M expressed in volts).  The ADC oversamples the basis
    grid by a factor of four.
    """
    sigma = math.sqrt(2.0 / mean_photons) * vmax
    sigma = min(sigma, 0.999 * vmax)
    if M > 4:
        sigma = max(sigma, 1.001 * vmax / M)
    q = max(2, M.bit_length() - 1 + 2)
    return SystemParams(M=M, vmax=vmax, adc_bits=q, mean_photons=mean_photons,
                        sigma_v=sigma, s=s, lam=lam)


def parse_config(path) -> dict:
    """Read a key=value session config file.

    Blank lines and '#' comments are ignored.  Keys outside
    CONFIG_KEYS are rejected.  Numeric values are converted; c0_hex is
    kept as a string.
    """
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    for key in ("M", "adc_bits", "s", "lambda", "rounds", "seed_a", "seed_b"):
        if key in out:
            out[key] = int(out[key], 0)
    for key in ("vmax", "mean_photons", "sigma_v"):
        if key in out:
            out[key] = float(out[key])
    return out


def params_from_config(cfg: dict) -> SystemParams:
    kwargs = {}
    for cfg_key, field in (("M", "M"), ("adc_bits", "adc_bits"),
                           ("vmax", "vmax"), ("mean_photons", "mean_photons"),
                           ("sigma_v", "sigma_v"), ("s", "s"),
                           ("lambda", "lam")):
        if cfg_key in cfg:
            kwargs[field] = cfg[cfg_key]
    return SystemParams(**kwargs)
