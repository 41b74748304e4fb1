"""Noise-masked M-ary key distribution simulator.

Two peer stations share a secret bit pool, exchange noise-masked
level-coded random bits over a framed classical channel, and distill
fresh key material through Toeplitz privacy amplification, with
analytic and Monte-Carlo security accounting alongside.
"""

from .params import SystemParams, params_for
from .rngsim import (AdcModel, FitResult, FlatnessReport, LfsrWhitener,
                     RunLengthHistogram, ShotNoiseSource, fit_run_lengths,
                     generate_bits, run_length_histogram,
                     sample_photocurrent, spectrum_flatness, threshold_bits,
                     whiten)
from .codec import (LevelCode, NoiseSample, basis_voltage, decode_bit,
                    draw_noise, encode_level, transmit_level)
from .security import (BayesGuesser, EmpiricalError, LeakageEstimate,
                       attacker_error_analytic, attacker_error_empirical,
                       indistinguishability, leaked_bits, leakage_estimate,
                       mutual_information, mutual_information_nr, sigma_k)
from .privacy import (BitPool, UniversalHash, apply_hash, make_hash,
                      pa_round, toeplitz_matrix)
from .channel import (ChannelFrame, MemoryDuplex, Tap, eavesdrop_decode,
                      frame, shadow_decode, unframe)
from .pool import (KeyStream, SharedSecret, load_secret, otp_decrypt,
                   otp_encrypt)
from .protocol import (SessionConfig, SessionReport, Station, run_session,
                       run_station)

__version__ = "0.1.0"

__all__ = [
    "SystemParams", "params_for",
    "AdcModel", "FitResult", "FlatnessReport", "LfsrWhitener",
    "RunLengthHistogram", "ShotNoiseSource", "fit_run_lengths",
    "generate_bits", "run_length_histogram", "sample_photocurrent",
    "spectrum_flatness", "threshold_bits", "whiten",
    "LevelCode", "NoiseSample", "basis_voltage", "decode_bit", "draw_noise",
    "encode_level", "transmit_level",
    "BayesGuesser", "EmpiricalError", "LeakageEstimate",
    "attacker_error_analytic", "attacker_error_empirical",
    "indistinguishability", "leaked_bits", "leakage_estimate",
    "mutual_information", "mutual_information_nr", "sigma_k",
    "BitPool", "UniversalHash", "apply_hash", "make_hash", "pa_round",
    "toeplitz_matrix",
    "ChannelFrame", "MemoryDuplex", "Tap", "eavesdrop_decode", "frame",
    "shadow_decode", "unframe",
    "KeyStream", "SharedSecret", "load_secret", "otp_decrypt", "otp_encrypt",
    "SessionConfig", "SessionReport", "Station", "run_session", "run_station",
]
