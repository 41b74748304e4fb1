"""Secret loading and one-time-pad key streams."""

import numpy as np
import pytest

from noisekey.bitutils import bits_to_hex
from noisekey.errors import ParameterError
from noisekey.params import SystemParams
from noisekey.pool import (KeyStream, load_secret, otp_decrypt, otp_encrypt)

P = SystemParams(M=256, adc_bits=10, s=1024, lam=16)  # m*s = 8192 bits


class TestLoadSecret:
    def test_required_length(self):
        secret = load_secret("ab" * 1024, P)  # 8192 bits of 0xAB
        assert secret.length == P.m * P.s == 8192

    def test_same_hex_gives_equal_pools(self):
        hex_text = bits_to_hex(np.random.default_rng(0).integers(0, 2, 8192))
        s1 = load_secret(hex_text, P)
        s2 = load_secret(hex_text, P)
        assert np.array_equal(s1.bits, s2.bits)

    def test_off_by_one_rejected(self):
        with pytest.raises(ParameterError):
            load_secret("ab" * 1023, P)
        with pytest.raises(ParameterError):
            load_secret("ab" * 1025, P)

    def test_mutable_source_is_wiped(self):
        buf = bytearray(b"\xff" * 1024)
        secret = load_secret(buf, P)
        assert secret.bits.all()
        assert buf == bytearray(1024)

    def test_file_source_with_optional_shred(self, tmp_path):
        path = tmp_path / "c0.hex"
        path.write_text("55" * 1024)
        secret = load_secret(str(path), P)
        assert secret.bits.sum() == 4096
        assert path.read_text() == "55" * 1024  # untouched by default
        load_secret(str(path), P, zeroize_file=True)
        assert path.read_bytes() == bytes(2048)


class TestKeyStream:
    def test_empty_message_consumes_nothing(self):
        key = KeyStream(np.ones(64, np.uint8))
        assert otp_encrypt(key, b"") == b""
        assert key.consumed_offset == 0

    def test_encrypt_decrypt_round_trip(self):
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 8 * 10_000 + 64).astype(np.uint8)
        alice, bob = KeyStream(bits), KeyStream(bits)
        for _ in range(100):
            msg = rng.bytes(int(rng.integers(0, 100)))
            assert otp_decrypt(bob, otp_encrypt(alice, msg)) == msg

    def test_consumption_is_disjoint_and_monotone(self):
        bits = np.random.default_rng(2).integers(0, 2, 256).astype(np.uint8)
        key = KeyStream(bits)
        # encrypting zeros exposes the pad: each call must use the next
        # untouched key range
        first = otp_encrypt(key, b"\x00" * 8)
        assert key.consumed_offset == 64
        second = otp_encrypt(key, b"\x00" * 8)
        assert key.consumed_offset == 128
        assert first == np.packbits(bits[:64]).tobytes()
        assert second == np.packbits(bits[64:128]).tobytes()
        assert key.available == 128

    def test_consumed_bits_are_erased(self):
        key = KeyStream(np.ones(32, np.uint8))
        key.consume(16)
        assert not key._bits[:16].any()
        assert key._bits[16:].all()

    def test_exhaustion_is_refused(self):
        key = KeyStream(np.ones(15, np.uint8))
        with pytest.raises(ParameterError, match="never reused"):
            otp_encrypt(key, b"\x00\x00")

    def test_xor_correctness(self):
        key = KeyStream(np.unpackbits(np.frombuffer(b"\x0f\xf0", np.uint8)))
        assert otp_encrypt(key, b"\xff\xff") == b"\xf0\x0f"

    def test_append_extends(self):
        key = KeyStream()
        key.append(np.ones(8, np.uint8))
        key.append(np.zeros(8, np.uint8))
        assert key.available == 16
        assert otp_encrypt(key, b"\x00\x00") == b"\xff\x00"
