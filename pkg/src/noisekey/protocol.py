"""Two-station key-distribution protocol.

Station A owns the bit source and initiates every round: it draws s
fresh random bits, encodes each against a basis index read from the
shared pool (m pool bits per transmitted bit, big-endian), masks the
levels with recorded noise and ships them as DATA frames, then ships a
public hash seed.  Station B decodes with the same pool-derived bases
and both sides run the identical privacy-amplification reduction, so
their pools and key streams stay bit-for-bit synchronized without any
further shared input after c0.

Rounds are half-duplex and strictly ordered (data, hash seed, reduce);
the transport is assumed reliable and ordered, there is no
acknowledgment or retransmission layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import enum

import numpy as np

from . import channel, codec, rngsim, security
from .bitutils import as_bits
from .errors import (DesyncError, InsufficientEntropyError, ParameterError,
                     ProtocolError)
from .params import SystemParams
from .privacy import (BitPool, deserialize_hash_seed, hash_seed_length,
                      pa_round, serialize_hash_seed)


class Phase(enum.Enum):
    IDLE = "Idle"
    SENT_DATA = "SentData"
    SENT_HASH = "SentHash"
    AWAIT_DATA = "AwaitData"
    AWAIT_HASH = "AwaitHash"
    REDUCED = "Reduced"


def basis_indices(pool_bits, m: int) -> np.ndarray:
    """Split pool bits into basis indices, m bits each, big-endian."""
    bits = as_bits(pool_bits)
    if m < 1:
        raise ParameterError("basis width m must be >= 1")
    if bits.size % m:
        raise ParameterError(f"pool size {bits.size} not divisible by m={m}")
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, m).astype(np.int64) @ weights


@dataclass
class SessionConfig:
    params: SystemParams
    rounds: int = 10
    seed_a: int = 1
    seed_b: int = 2
    c0: np.ndarray | None = None
    record_traffic: bool = False
    t_override: int | None = None

    def initial_pool_bits(self) -> np.ndarray:
        if self.c0 is not None:
            bits = as_bits(self.c0)
            need = self.params.m * self.params.s
            if bits.size != need:
                raise ParameterError(
                    f"c0 must hold m*s = {need} bits, got {bits.size}")
            return bits.copy()
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed_a, self.seed_b, 0xC0]))
        return rng.integers(0, 2, size=self.params.m * self.params.s,
                            dtype=np.int64).astype(np.uint8)


class Station:
    """Single-owner protocol state machine for one endpoint."""

    def __init__(self, role: str, params: SystemParams, c0,
                 seed: int = 0, t: int | None = None,
                 record_traffic: bool = False):
        if role not in ("A", "B"):
            raise ParameterError("role must be 'A' or 'B'")
        if params.m < 1:
            raise ParameterError("protocol needs M >= 2 (m >= 1)")
        self.role = role
        self.params = params
        self.pool = BitPool(as_bits(c0).copy(), params.m, params.s)
        self.round_index = 0
        self.phase = Phase.IDLE if role == "A" else Phase.AWAIT_DATA
        self.t = t if t is not None else security.leaked_bits(
            security.attacker_error_analytic(params), params.s)
        self.key_bits = np.zeros(0, dtype=np.uint8)
        self.record_traffic = record_traffic
        self.sent_bits: list[np.ndarray] = []
        self.rejected_frames = 0
        self._fresh: np.ndarray | None = None
        self._hash_seed: np.ndarray | None = None
        if role == "A":
            streams = np.random.SeedSequence(seed).spawn(3)
            self._bit_rng = np.random.default_rng(streams[0])
            self._noise_rng = np.random.default_rng(streams[1])
            self._hash_rng = np.random.default_rng(streams[2])
            self._source = rngsim.ShotNoiseSource(
                mean_level=1000.0, mean_photons=params.mean_photons, seed=seed)
            self._whitener = rngsim.LfsrWhitener.from_seed(seed)

    # -- shared geometry -------------------------------------------------

    @property
    def hash_in_len(self) -> int:
        return self.params.m * self.params.s + self.params.s

    @property
    def hash_out_len(self) -> int:
        return self.hash_in_len - self.t - self.params.lam

    @property
    def expected_data_frames(self) -> int:
        nbytes = 2 * self.params.s
        return -(-nbytes // channel.PAYLOAD_SIZE)

    @property
    def expected_hash_frames(self) -> int:
        nbytes = 4 + (hash_seed_length(self.hash_in_len, self.hash_out_len)
                      + 7) // 8
        return -(-nbytes // channel.PAYLOAD_SIZE)

    def _require_phase(self, phase: Phase, action: str) -> None:
        if self.phase is not phase:
            raise ProtocolError(
                f"{action} requires phase {phase.value}, "
                f"station is in {self.phase.value}")

    def _check_pool(self) -> None:
        need = self.params.m * self.params.s
        if self.pool.size != need:
            raise DesyncError(
                f"round {self.round_index}: pool holds {self.pool.size} "
                f"bits, expected m*s = {need}; session cannot continue")

    def _bases(self) -> np.ndarray:
        return basis_indices(self.pool.bits, self.params.m)

    # -- station A -------------------------------------------------------

    def send_data(self) -> list[channel.ChannelFrame]:
        """Round step 1: draw fresh bits, encode with pool bases, frame."""
        self._require_phase(Phase.IDLE, "send_data")
        self._check_pool()
        p = self.params
        samples = rngsim.sample_photocurrent(self._source, p.s,
                                             rng=self._bit_rng)
        bits = rngsim.threshold_bits(samples, self._source.mean_level)
        bits, self._whitener = rngsim.whiten_stream(self._whitener, bits)
        noise = codec.draw_noise(p, self._noise_rng, count=p.s)
        codes = codec.transmit_level(bits, self._bases(), noise, p)
        frames = channel.split_message(channel.MSG_DATA, self.round_index,
                                       codec.codes_to_bytes(codes))
        self._fresh = bits
        if self.record_traffic:
            self.sent_bits.append(bits.copy())
        self.phase = Phase.SENT_DATA
        return frames

    def send_hash(self) -> list[channel.ChannelFrame]:
        """Round step 2: publish a fresh hash-family instance."""
        self._require_phase(Phase.SENT_DATA, "send_hash")
        nbits = hash_seed_length(self.hash_in_len, self.hash_out_len)
        seed = self._hash_rng.integers(0, 2, size=nbits,
                                       dtype=np.int64).astype(np.uint8)
        self._hash_seed = seed
        frames = channel.split_message(channel.MSG_HASH_SEED,
                                       self.round_index,
                                       serialize_hash_seed(seed))
        self.phase = Phase.SENT_HASH
        return frames

    # -- station B -------------------------------------------------------

    def _accept(self, frames, msg_type: int, expect_phase: Phase,
                action: str) -> bytes:
        self._require_phase(expect_phase, action)
        kept = []
        for fr in frames:
            if fr.msg_type == channel.MSG_ABORT:
                raise ProtocolError(
                    f"peer aborted at round {fr.round_index}: "
                    f"{fr.payload.decode('utf-8', 'replace')}")
            if fr.msg_type != msg_type or fr.round_index != self.round_index:
                self.rejected_frames += 1
                continue
            kept.append(fr.payload)
        return b"".join(kept)

    def receive_data(self, frames) -> None:
        """Round step 1 (receiver): decode levels with the shared bases."""
        data = self._accept(frames, channel.MSG_DATA, Phase.AWAIT_DATA,
                            "receive_data")
        p = self.params
        if len(data) != 2 * p.s:
            raise ProtocolError(
                f"round {self.round_index}: DATA carries {len(data)} bytes, "
                f"expected {2 * p.s}; refusing partial decode")
        self._check_pool()
        codes = codec.codes_from_bytes(data)
        if np.any(codes >= p.levels):
            raise ProtocolError("level code outside the ADC alphabet")
        self._fresh = codec.decode_bit(codes, self._bases(), p)
        self.phase = Phase.AWAIT_HASH

    def receive_hash(self, frames) -> None:
        """Round step 2 (receiver): adopt the published hash instance."""
        blob = self._accept(frames, channel.MSG_HASH_SEED, Phase.AWAIT_HASH,
                            "receive_hash")
        seed = deserialize_hash_seed(blob)
        expected = hash_seed_length(self.hash_in_len, self.hash_out_len)
        if seed.size != expected:
            raise ProtocolError(
                f"hash seed has {seed.size} bits, expected {expected}")
        self._hash_seed = seed
        self.phase = Phase.REDUCED

    # -- both ------------------------------------------------------------

    def finish_round(self) -> np.ndarray:
        """Round step 3: reduce pool||fresh, split next bases and key z.

        Aborts (pool untouched on both stations, since both run the
        same check) when t + lambda leaves no key material.
        """
        self._require_phase(
            Phase.SENT_HASH if self.role == "A" else Phase.REDUCED,
            "finish_round")
        if self._fresh is None or self._hash_seed is None:
            raise ProtocolError("finish_round before data and hash present")
        if self.t + self.params.lam >= self.params.s:
            raise InsufficientEntropyError(
                f"t + lambda = {self.t + self.params.lam} >= s = "
                f"{self.params.s}: round aborted, pool unchanged")
        z, next_pool = pa_round(self.pool, self._fresh, self._hash_seed,
                                self.t, self.params.lam)
        self.pool = next_pool
        self.key_bits = np.concatenate([self.key_bits, z])
        self.round_index += 1
        self._fresh = None
        self._hash_seed = None
        self.phase = Phase.IDLE if self.role == "A" else Phase.AWAIT_DATA
        return z


@dataclass
class SessionReport:
    """Outcome of a full session."""

    rounds: int
    total_key_bits: int
    mismatches: int
    leakage: list[security.LeakageEstimate]
    key_a: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))
    key_b: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))
    sent_bits: list[np.ndarray] = field(default_factory=list)
    rejected_frames: int = 0


def build_stations(config: SessionConfig) -> tuple[Station, Station]:
    c0 = config.initial_pool_bits()
    a = Station("A", config.params, c0, seed=config.seed_a,
                t=config.t_override, record_traffic=config.record_traffic)
    b = Station("B", config.params, c0, seed=config.seed_b,
                t=config.t_override)
    return a, b


def drive_round(a: Station, b: Station, endpoint_a, endpoint_b
                ) -> tuple[np.ndarray, np.ndarray]:
    """Push one full round through a transport, both stations local."""
    for fr in a.send_data():
        endpoint_a.send(fr)
    b.receive_data([endpoint_b.recv()
                    for _ in range(b.expected_data_frames)])
    for fr in a.send_hash():
        endpoint_a.send(fr)
    b.receive_hash([endpoint_b.recv()
                    for _ in range(b.expected_hash_frames)])
    return a.finish_round(), b.finish_round()


def run_session(config: SessionConfig, transport=None,
                tap: channel.Tap | None = None) -> SessionReport:
    """Execute a full honest session with both stations in-process.

    Uses an in-memory duplex unless a connected transport (an object
    with endpoint_a / endpoint_b) is supplied.  Raises ProtocolError
    subclasses on any contract violation; the pools are compared after
    every round so a divergence surfaces immediately.
    """
    if transport is None:
        transport = channel.MemoryDuplex(tap_a_to_b=tap)
    a, b = build_stations(config)
    ledger = security.LeakageEstimate(
        p_e=security.attacker_error_analytic(config.params),
        t=a.t, lam=config.params.lam,
        i_lambda=security.mutual_information(config.params.lam),
        s=config.params.s)
    leakage = []
    for _ in range(config.rounds):
        drive_round(a, b, transport.endpoint_a, transport.endpoint_b)
        leakage.append(ledger)
        if a.pool.size != b.pool.size or np.any(a.pool.bits != b.pool.bits):
            raise DesyncError(
                f"pools diverged after round {a.round_index}")
    mismatches = int(np.count_nonzero(a.key_bits != b.key_bits)) \
        if a.key_bits.size == b.key_bits.size else max(a.key_bits.size,
                                                       b.key_bits.size)
    return SessionReport(rounds=config.rounds,
                         total_key_bits=int(a.key_bits.size),
                         mismatches=mismatches, leakage=leakage,
                         key_a=a.key_bits, key_b=b.key_bits,
                         sent_bits=a.sent_bits,
                         rejected_frames=b.rejected_frames)


def run_station(station: Station, endpoint, rounds: int) -> np.ndarray:
    """Drive one station over its endpoint (thread / process entry).

    On a protocol failure the peer is notified with an ABORT frame
    before the error propagates.
    """
    try:
        for _ in range(rounds):
            if station.role == "A":
                for fr in station.send_data():
                    endpoint.send(fr)
                for fr in station.send_hash():
                    endpoint.send(fr)
                station.finish_round()
            else:
                station.receive_data(
                    [endpoint.recv()
                     for _ in range(station.expected_data_frames)])
                station.receive_hash(
                    [endpoint.recv()
                     for _ in range(station.expected_hash_frames)])
                station.finish_round()
    except ProtocolError as exc:
        try:
            endpoint.send(channel.frame(
                channel.MSG_ABORT, station.round_index,
                str(exc).encode()[:channel.PAYLOAD_SIZE]))
        except Exception:
            pass
        raise
    return station.key_bits
