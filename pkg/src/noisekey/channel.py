"""Framed transport: fixed-size packets, in-memory and socket duplexes,
and the passive wiretap used for eavesdropper experiments.

Every frame is exactly 1037 bytes on the wire:

    magic(2) | msg_type(1) | round(4, BE) | payload_len(2, BE) |
    payload(1024, zero-padded) | crc32(4, BE, over all preceding bytes)

Longer messages are split by the caller into consecutive frames of the
same round.  The framing check is integrity-only (CRC-32 plus
type/round validation); it stands in for the packet authentication the
platform architecture requires without inventing a particular scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import queue
import socket
import struct
import zlib

import numpy as np

from . import codec, security
from .errors import FramingError, ParameterError, TransportError

MAGIC = b"\x5a\xa5"
PAYLOAD_SIZE = 1024
FRAME_SIZE = 2 + 1 + 4 + 2 + PAYLOAD_SIZE + 4  # 1037

MSG_DATA = 0x01
MSG_HASH_SEED = 0x02
MSG_ABORT = 0x03
_MSG_TYPES = (MSG_DATA, MSG_HASH_SEED, MSG_ABORT)

_HEADER = struct.Struct(">2sBIH")
_CRC = struct.Struct(">I")


@dataclass(frozen=True)
class ChannelFrame:
    """One wire packet; `payload` is the used prefix, unpadded."""

    msg_type: int
    round_index: int
    payload: bytes

    def encode(self) -> bytes:
        body = _HEADER.pack(MAGIC, self.msg_type, self.round_index,
                            len(self.payload))
        body += self.payload.ljust(PAYLOAD_SIZE, b"\x00")
        return body + _CRC.pack(zlib.crc32(body))


def frame(msg_type: int, round_index: int, payload: bytes) -> ChannelFrame:
    if msg_type not in _MSG_TYPES:
        raise ParameterError(f"unknown msg_type {msg_type:#x}")
    if not 0 <= round_index < 2 ** 32:
        raise ParameterError("round must fit 32 bits")
    if len(payload) > PAYLOAD_SIZE:
        raise ParameterError(
            f"payload of {len(payload)} bytes exceeds {PAYLOAD_SIZE}; "
            "split the message into multiple frames")
    return ChannelFrame(msg_type=msg_type, round_index=round_index,
                        payload=bytes(payload))


def unframe(raw: bytes) -> ChannelFrame:
    """Parse and validate one wire frame; rejects any corruption."""
    if len(raw) != FRAME_SIZE:
        raise FramingError(f"frame must be {FRAME_SIZE} bytes, got {len(raw)}")
    magic, msg_type, round_index, payload_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FramingError(f"bad magic {magic!r}")
    (check,) = _CRC.unpack_from(raw, FRAME_SIZE - 4)
    if zlib.crc32(raw[:FRAME_SIZE - 4]) != check:
        raise FramingError("checksum mismatch")
    if msg_type not in _MSG_TYPES:
        raise FramingError(f"unknown msg_type {msg_type:#x}")
    if payload_len > PAYLOAD_SIZE:
        raise FramingError(f"payload_len {payload_len} exceeds capacity")
    start = _HEADER.size
    payload = raw[start:start + PAYLOAD_SIZE]
    if any(payload[payload_len:]):
        raise FramingError("nonzero bytes past payload_len")
    return ChannelFrame(msg_type=msg_type, round_index=round_index,
                        payload=payload[:payload_len])


def split_message(msg_type: int, round_index: int, data: bytes
                  ) -> list[ChannelFrame]:
    """Chunk an arbitrary-length message into consecutive frames."""
    chunks = [data[i:i + PAYLOAD_SIZE]
              for i in range(0, len(data), PAYLOAD_SIZE)] or [b""]
    return [frame(msg_type, round_index, chunk) for chunk in chunks]


@dataclass
class Tap:
    """Passive capture of delivered frames, byte-identical and in order."""

    frames: list[bytes] = field(default_factory=list)

    def record(self, raw: bytes) -> None:
        self.frames.append(bytes(raw))

    def decoded(self) -> list[ChannelFrame]:
        return [unframe(raw) for raw in self.frames]

    def data_codes(self) -> np.ndarray:
        """All level codes carried by captured DATA frames, in order."""
        blobs = [f.payload for f in self.decoded() if f.msg_type == MSG_DATA]
        if not blobs:
            return np.zeros(0, dtype=np.uint16)
        return codec.codes_from_bytes(b"".join(blobs))


class _QueueEndpoint:
    """One side of an in-memory duplex."""

    def __init__(self, send_q: queue.Queue, recv_q: queue.Queue,
                 recv_tap: Tap | None):
        self._send_q = send_q
        self._recv_q = recv_q
        self._recv_tap = recv_tap
        self._closed = False

    def send(self, fr: ChannelFrame) -> None:
        if self._closed:
            raise TransportError("endpoint closed")
        self._send_q.put(fr.encode())

    def recv(self, timeout: float | None = 10.0) -> ChannelFrame:
        try:
            raw = self._recv_q.get(timeout=timeout)
        except queue.Empty as exc:
            raise TransportError("recv timed out") from exc
        if raw is None:
            raise TransportError("channel closed")
        if self._recv_tap is not None:
            self._recv_tap.record(raw)
        return unframe(raw)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._send_q.put(None)


class MemoryDuplex:
    """Reliable ordered in-process channel between two endpoints.

    Optional taps capture what each direction's receiver sees;
    `tap_a_to_b` is the usual eavesdropping position for the data flow
    from the initiating station.
    """

    def __init__(self, tap_a_to_b: Tap | None = None,
                 tap_b_to_a: Tap | None = None):
        a_to_b: queue.Queue = queue.Queue()
        b_to_a: queue.Queue = queue.Queue()
        self.endpoint_a = _QueueEndpoint(a_to_b, b_to_a, tap_b_to_a)
        self.endpoint_b = _QueueEndpoint(b_to_a, a_to_b, tap_a_to_b)


class SocketEndpoint:
    """Frame-at-a-time transport over a connected stream socket."""

    def __init__(self, sock: socket.socket, recv_tap: Tap | None = None):
        self._sock = sock
        self._recv_tap = recv_tap

    def send(self, fr: ChannelFrame) -> None:
        try:
            self._sock.sendall(fr.encode())
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv(self, timeout: float | None = 10.0) -> ChannelFrame:
        self._sock.settimeout(timeout)
        chunks = []
        needed = FRAME_SIZE
        try:
            while needed:
                chunk = self._sock.recv(needed)
                if not chunk:
                    raise TransportError("peer closed mid-frame")
                chunks.append(chunk)
                needed -= len(chunk)
        except OSError as exc:
            raise TransportError(f"recv failed: {exc}") from exc
        raw = b"".join(chunks)
        if self._recv_tap is not None:
            self._recv_tap.record(raw)
        return unframe(raw)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def socket_pair(tap_a_to_b: Tap | None = None
                ) -> tuple[SocketEndpoint, SocketEndpoint]:
    """Connected endpoint pair over a real stream socket (loopback)."""
    sock_a, sock_b = socket.socketpair()
    return SocketEndpoint(sock_a), SocketEndpoint(sock_b, recv_tap=tap_a_to_b)


def listen_endpoint(host: str, port: int, timeout: float = 30.0
                    ) -> SocketEndpoint:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        srv.settimeout(timeout)
        try:
            conn, _ = srv.accept()
        except OSError as exc:
            raise TransportError(f"accept failed: {exc}") from exc
    return SocketEndpoint(conn)


def connect_endpoint(host: str, port: int, timeout: float = 30.0
                     ) -> SocketEndpoint:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"connect failed: {exc}") from exc
    return SocketEndpoint(sock)


@dataclass
class EavesdropReport:
    """Attacker guesses over tapped DATA symbols, scored against truth."""

    guesses: np.ndarray
    errors: int | None = None
    error_rate: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None


def eavesdrop_decode(tap: Tap, params, truth=None) -> EavesdropReport:
    """Run the Bayes-optimal basis-blind guesser on every tapped symbol.

    When the true transmitted bits are supplied by the harness, the
    report includes the empirical error rate with its 95% interval.
    """
    codes = tap.data_codes()
    guesser = security.BayesGuesser(params)
    guesses = guesser.guess(codes) if codes.size else np.zeros(0, np.uint8)
    report = EavesdropReport(guesses=guesses)
    if truth is not None:
        truth = np.asarray(truth, dtype=np.uint8)
        if truth.size != guesses.size:
            raise ParameterError(
                f"truth has {truth.size} bits, tap carried {guesses.size}")
        errors = int(np.count_nonzero(guesses != truth))
        report.errors = errors
        report.error_rate = errors / truth.size if truth.size else 0.0
        if truth.size:
            report.ci_low, report.ci_high = security.wilson_interval(
                errors, truth.size)
    return report


def shadow_decode(tap: Tap, params, c0,
                  t: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Decode the tapped session with the initial secret in hand.

    An observer holding c0 can replay the receiving station's logic
    offline from the captured frames (bases from the evolving pool,
    hash seeds from the HASH_SEED frames), recovering every transmitted
    bit and the full key stream.  Returns (all transmitted bits, key).
    This quantifies that the shared pool is the scheme's entire
    advantage.  `t` must match the session's per-round leak count; by
    default it is derived from the parameters the same way the stations
    derive it.
    """
    from .privacy import BitPool, deserialize_hash_seed, pa_round
    from .protocol import basis_indices

    pool = BitPool(np.asarray(c0, dtype=np.uint8).copy(), params.m, params.s)
    if t is None:
        p_e = security.attacker_error_analytic(params)
        t = security.leaked_bits(p_e, params.s)

    per_round: dict[int, dict[int, list[bytes]]] = {}
    for fr in tap.decoded():
        per_round.setdefault(fr.round_index, {}).setdefault(
            fr.msg_type, []).append(fr.payload)

    bits_out = []
    key_out = []
    for round_index in sorted(per_round):
        msgs = per_round[round_index]
        codes = codec.codes_from_bytes(b"".join(msgs.get(MSG_DATA, [])))
        seed = deserialize_hash_seed(b"".join(msgs.get(MSG_HASH_SEED, [])))
        ks = basis_indices(pool.bits, params.m)
        bits = codec.decode_bit(codes, ks, params)
        z, pool = pa_round(pool, bits, seed, t, params.lam)
        bits_out.append(bits)
        key_out.append(z)
    empty = np.zeros(0, dtype=np.uint8)
    return (np.concatenate(bits_out) if bits_out else empty,
            np.concatenate(key_out) if key_out else empty)
