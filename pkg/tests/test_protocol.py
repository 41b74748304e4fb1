"""Station state machines and full sessions."""

import numpy as np
import pytest

from noisekey import channel
from noisekey.channel import MemoryDuplex, Tap
from noisekey.errors import (DesyncError, InsufficientEntropyError,
                             ProtocolError)
from noisekey.params import SystemParams, params_for
from noisekey.protocol import (Phase, SessionConfig, Station, basis_indices,
                               build_stations, drive_round, run_session,
                               run_station)

P16 = SystemParams(M=16, adc_bits=6, sigma_v=0.125, s=1024, lam=8)
P8 = SystemParams(M=8, adc_bits=6, sigma_v=0.25, s=16, lam=2)


def small_config(rounds=3, **kwargs):
    defaults = dict(params=P8, rounds=rounds, seed_a=5, seed_b=6)
    defaults.update(kwargs)
    return SessionConfig(**defaults)


class TestBasisIndices:
    def test_big_endian_grouping(self):
        bits = [1, 0, 1, 0, 1, 1]
        assert basis_indices(bits, 3).tolist() == [0b101, 0b011]

    def test_size_mismatch(self):
        with pytest.raises(Exception):
            basis_indices([1, 0, 1], 2)


class TestStationA:
    def test_send_data_frame_and_pool_accounting(self):
        # s=16, m=3: 16 level codes (32 bytes -> one frame), 48 basis bits
        a, _ = build_stations(small_config())
        assert a.pool.size == 3 * 16 == 48
        frames = a.send_data()
        assert len(frames) == 1
        assert len(frames[0].payload) == 2 * 16
        assert a.phase is Phase.SENT_DATA

    def test_hash_seed_length_exact(self):
        a, _ = build_stations(small_config())
        a.send_data()
        frames = a.send_hash()
        blob = b"".join(f.payload for f in frames)
        nbits = int.from_bytes(blob[:4], "big")
        ms, s = a.params.m * a.params.s, a.params.s
        assert nbits == (ms + s) + (ms + s - a.t - a.params.lam) - 1

    def test_phase_order_enforced(self):
        a, _ = build_stations(small_config())
        with pytest.raises(ProtocolError):
            a.send_hash()
        with pytest.raises(ProtocolError):
            a.finish_round()

    def test_short_pool_is_fatal_desync(self):
        a, _ = build_stations(small_config())
        a.pool.bits = a.pool.bits[:-1]
        with pytest.raises(DesyncError):
            a.send_data()


class TestRoundTrip:
    def test_receiver_recovers_bits_exactly(self):
        a, b = build_stations(small_config())
        duplex = MemoryDuplex()
        z_a, z_b = drive_round(a, b, duplex.endpoint_a, duplex.endpoint_b)
        assert np.array_equal(z_a, z_b)
        assert np.array_equal(a.pool.bits, b.pool.bits)

    def test_decoded_equals_generated(self):
        a, b = build_stations(small_config(record_traffic=True))
        frames = a.send_data()
        b.receive_data(frames)
        assert np.array_equal(b._fresh, a.sent_bits[0])

    def test_stale_round_frame_rejected_but_round_completes(self):
        a, b = build_stations(small_config())
        stale = channel.frame(channel.MSG_DATA, 99, b"\x00" * 32)
        frames = a.send_data()
        b.receive_data([stale] + frames)
        assert b.rejected_frames == 1
        assert b.phase is Phase.AWAIT_HASH

    def test_short_data_is_protocol_error_without_partial_decode(self):
        a, b = build_stations(small_config())
        frames = a.send_data()
        truncated = channel.frame(channel.MSG_DATA, 0, frames[0].payload[:30])
        with pytest.raises(ProtocolError):
            b.receive_data([truncated])
        assert b._fresh is None
        assert b.phase is Phase.AWAIT_DATA

    def test_replayed_hash_frame_rejected(self):
        a, b = build_stations(small_config(rounds=2))
        duplex = MemoryDuplex()
        # round 0, keeping the hash frames for replay
        data = a.send_data()
        b.receive_data(data)
        hash_frames = a.send_hash()
        b.receive_hash(hash_frames)
        a.finish_round(), b.finish_round()
        # round 1: replay round-0 hash frames ahead of the real ones
        b.receive_data(a.send_data())
        fresh_hash = a.send_hash()
        b.receive_hash(hash_frames + fresh_hash)
        assert b.rejected_frames == len(hash_frames)
        z_a, z_b = a.finish_round(), b.finish_round()
        assert np.array_equal(z_a, z_b)

    def test_wrong_seed_length_rejected(self):
        a, b = build_stations(small_config())
        b.receive_data(a.send_data())
        a.send_hash()
        from noisekey.privacy import serialize_hash_seed
        bogus = serialize_hash_seed(np.ones(5, np.uint8))
        with pytest.raises(ProtocolError):
            b.receive_hash(channel.split_message(channel.MSG_HASH_SEED, 0,
                                                 bogus))

    def test_abort_frame_surfaces_as_protocol_error(self):
        _, b = build_stations(small_config())
        abort = channel.frame(channel.MSG_ABORT, 0, b"gone")
        with pytest.raises(ProtocolError, match="peer aborted"):
            b.receive_data([abort])


class TestFinishRound:
    def test_multi_round_key_agreement(self):
        config = SessionConfig(params=P16, rounds=10, seed_a=1, seed_b=2,
                               t_override=8)
        report = run_session(config)
        assert report.mismatches == 0
        assert report.total_key_bits == 10 * (1024 - 8 - 8)
        assert np.array_equal(report.key_a, report.key_b)

    def test_round_abort_rolls_back_both_pools(self):
        config = small_config(t_override=15)  # t + lam = 17 >= s = 16
        a, b = build_stations(config)
        pool_a = a.pool.bits.copy()
        pool_b = b.pool.bits.copy()
        b.receive_data(a.send_data())
        b.receive_hash(a.send_hash())
        for station in (a, b):
            with pytest.raises(InsufficientEntropyError):
                station.finish_round()
        assert np.array_equal(a.pool.bits, pool_a)
        assert np.array_equal(b.pool.bits, pool_b)
        assert a.round_index == 0 and b.round_index == 0

    def test_key_never_overlaps_bases_partition(self):
        a, b = build_stations(small_config(rounds=4))
        from noisekey.privacy import apply_hash, make_hash
        for _ in range(4):
            b.receive_data(a.send_data())
            b.receive_hash(a.send_hash())
            pool_before = a.pool.bits.copy()
            fresh = a._fresh.copy()
            seed = a._hash_seed.copy()
            z = a.finish_round()
            b.finish_round()
            in_len = pool_before.size + fresh.size
            h = make_hash(seed, in_len, in_len - a.t - a.params.lam)
            full = apply_hash(h, np.concatenate([pool_before, fresh]))
            # bases are the leading slice, z the trailing one: disjoint
            assert np.array_equal(a.pool.bits, full[:pool_before.size])
            assert np.array_equal(z, full[pool_before.size:])


class TestRunSession:
    def test_zero_rounds(self):
        config = small_config(rounds=0)
        report = run_session(config)
        assert report.rounds == 0
        assert report.total_key_bits == 0
        assert report.mismatches == 0

    def test_transcript_deterministic_given_seeds(self):
        taps = []
        for _ in range(2):
            tap = Tap()
            run_session(small_config(rounds=3), tap=tap)
            taps.append(tap.frames)
        assert taps[0] == taps[1]

    def test_memory_and_socket_transcripts_identical(self):
        tap_mem = Tap()
        run_session(small_config(rounds=3), tap=tap_mem)

        tap_sock = Tap()
        ep_a, ep_b = channel.socket_pair(tap_a_to_b=tap_sock)
        a, b = build_stations(small_config(rounds=3))
        import threading
        th = threading.Thread(target=run_station, args=(b, ep_b, 3))
        th.start()
        run_station(a, ep_a, 3)
        th.join()
        ep_a.close()
        ep_b.close()
        assert tap_mem.frames == tap_sock.frames
        assert np.array_equal(a.key_bits, b.key_bits)

    def test_injected_desync_aborts_session(self):
        a, b = build_stations(small_config(rounds=10))
        duplex = MemoryDuplex()
        for _ in range(3):
            drive_round(a, b, duplex.endpoint_a, duplex.endpoint_b)
        b.pool.bits = b.pool.bits[:-1]  # basis-pool desync at round 3
        with pytest.raises(DesyncError):
            drive_round(a, b, duplex.endpoint_a, duplex.endpoint_b)
        # B failed round 3; A is stranded mid-round
        assert b.round_index == 3
        assert a.phase is Phase.SENT_DATA

    def test_mismatched_c0_detected(self):
        rng = np.random.default_rng(0)
        p = P8
        c0_a = rng.integers(0, 2, p.m * p.s).astype(np.uint8)
        c0_b = c0_a.copy()
        c0_b[0] ^= 1
        a = Station("A", p, c0_a, seed=5)
        b = Station("B", p, c0_b, seed=6)
        duplex = MemoryDuplex()
        drive_round(a, b, duplex.endpoint_a, duplex.endpoint_b)
        assert not np.array_equal(a.key_bits, b.key_bits)

    def test_self_sustaining_over_many_rounds(self):
        config = SessionConfig(params=P16, rounds=25, seed_a=3, seed_b=4)
        report = run_session(config)
        assert report.mismatches == 0
        assert report.total_key_bits == 25 * (P16.s - report.leakage[0].t
                                              - P16.lam)
        # every round's ledger is the fixed session ledger
        assert len(set((l.t, l.lam) for l in report.leakage)) == 1


class TestEavesdropping:
    def test_tap_attacker_near_coin_flip_and_shadow_exact(self):
        p = params_for(64, 100.0, s=512, lam=16)
        tap = Tap()
        config = SessionConfig(params=p, rounds=6, seed_a=21, seed_b=22,
                               record_traffic=True)
        report = run_session(config, tap=tap)
        truth = np.concatenate(report.sent_bits)

        eav = channel.eavesdrop_decode(tap, p, truth=truth)
        assert eav.guesses.size == truth.size
        assert abs(eav.error_rate - 0.5) < 0.05

        c0 = config.initial_pool_bits()
        bits, key = channel.shadow_decode(tap, p, c0)
        assert np.array_equal(bits, truth)
        assert np.array_equal(key, report.key_a)

    def test_tap_presence_does_not_alter_transcript(self):
        tap = Tap()
        r1 = run_session(small_config(rounds=2), tap=tap)
        r2 = run_session(small_config(rounds=2))
        assert np.array_equal(r1.key_a, r2.key_a)
