import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbmi.exceptions import ConfigError, CorruptPacketError, EncodeError, NeedMoreData
from vbmi.protocol import (ACQUISITION, BIAS, REFERENCE, STREAM_CHANNELS, ChunkAssembler, FrameDecoder, Gap, Packet,
                           SampleChunk, crc16, decode_packet, encode_packet, frame_size, packet_rate_budget,
                           raw_to_volts, volts_to_raw, wear_state)
from vbmi.protocol.packet import pack_int24, unpack_int24

from .oracles import crc16_ccitt_false_bitwise, int24_be

GOLDEN_CRC16_01020304 = 0x89C3
GOLDEN_CRC16_CHECK = 0x29B1
GOLDEN_RAW1_VOLT = 2.2351741790771484e-8


def random_packet(rng, n=None):
    n = int(rng.integers(1, 256)) if n is None else n
    payload = rng.integers(-(1 << 23), 1 << 23, size=(n, 9), dtype=np.int64).astype(np.int32)
    return Packet(int(rng.integers(0, 1 << 16)), int(rng.integers(0, 1 << 32)), int(rng.integers(0, 1 << 16)),
                  payload)


def test_montage():
    assert ACQUISITION == ("PO5", "PO3", "POZ", "PO4", "O1", "OZ", "O2")
    assert (REFERENCE, BIAS) == ("Cz", "AFz")
    assert len(STREAM_CHANNELS) == 9


def test_crc16_golden():
    assert crc16(bytes([1, 2, 3, 4])) == GOLDEN_CRC16_01020304 == crc16_ccitt_false_bitwise(bytes([1, 2, 3, 4]))
    assert crc16(b"123456789") == GOLDEN_CRC16_CHECK


@given(st.binary(max_size=300))
def test_crc16_matches_bitwise_oracle(data):
    assert crc16(data) == crc16_ccitt_false_bitwise(data)


@pytest.mark.parametrize("value,expected", [(8388607, b"\x7f\xff\xff"), (-8388608, b"\x80\x00\x00"),
                                            (-1, b"\xff\xff\xff"), (1, b"\x00\x00\x01")])
def test_int24_boundaries(value, expected):
    assert pack_int24([value]) == expected == int24_be(value)
    assert unpack_int24(expected)[0] == value


def test_frame_layout_by_hand():
    payload = np.arange(18, dtype=np.int32).reshape(2, 9) - 9
    p = Packet(seq=0x1234, sample_index=0x01020304, status=0x0081, payload=payload)
    frame = encode_packet(p)
    assert len(frame) == frame_size(2) == 12 + 54 + 2
    assert frame[:2] == b"\xa5\x5a"
    assert frame[2] == 1
    assert frame[3:5] == b"\x34\x12"
    assert frame[5:9] == b"\x04\x03\x02\x01"
    assert frame[9] == 2
    assert frame[10:12] == b"\x81\x00"
    body = b"".join(int24_be(int(v)) for v in payload.ravel())
    assert frame[12:-2] == body
    assert frame[-2:] == struct.pack("<H", crc16_ccitt_false_bitwise(frame[2:-2]))
    assert decode_packet(frame) == p


def test_roundtrip_10000_packets(rng):
    for _ in range(10_000):
        p = random_packet(rng, int(rng.integers(1, 12)))
        assert decode_packet(encode_packet(p)) == p


@given(st.integers(0, 2 ** 16 - 1), st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 16 - 1),
       st.lists(st.integers(-(1 << 23), (1 << 23) - 1), min_size=9, max_size=9 * 20).filter(lambda v: len(v) % 9 == 0))
def test_roundtrip_property(seq, index, status, values):
    p = Packet(seq, index, status, np.array(values, dtype=np.int32).reshape(-1, 9))
    assert decode_packet(encode_packet(p)) == p


def test_encode_rejects_invalid(rng):
    good = random_packet(rng, 3)
    for bad in (Packet(1 << 16, 0, 0, good.payload), Packet(0, 1 << 32, 0, good.payload),
                Packet(0, 0, 1 << 16, good.payload), Packet(0, 0, 0, np.zeros((3, 8), np.int32)),
                Packet(0, 0, 0, np.zeros((0, 9), np.int32)), Packet(0, 0, 0, np.zeros((256, 9), np.int32)),
                Packet(0, 0, 0, np.full((1, 9), 1 << 23)), Packet(0, 0, 0, np.zeros((1, 9)))):
        with pytest.raises(EncodeError):
            encode_packet(bad)


def test_decode_errors(rng):
    frame = bytearray(encode_packet(random_packet(rng, 10)))
    with pytest.raises(NeedMoreData):
        decode_packet(bytes(frame[:-1]))
    with pytest.raises(NeedMoreData):
        decode_packet(bytes(frame[:5]))
    for bit in (0, 7):
        flipped = bytearray(frame)
        flipped[40] ^= 1 << bit
        with pytest.raises(CorruptPacketError):
            decode_packet(bytes(flipped))
    with pytest.raises(CorruptPacketError):
        decode_packet(b"\x00\x00" + bytes(frame[2:]))


def test_stream_decoder_chunking_invariance(rng):
    packets = [random_packet(rng, 10) for _ in range(50)]
    stream = b"".join(encode_packet(p) for p in packets)
    for step in (1, 7, 283, 4096):
        dec = FrameDecoder()
        out = []
        for i in range(0, len(stream), step):
            out += dec.feed(stream[i:i + step])
        assert out == packets


def test_resync_under_one_percent_corruption(rng):
    packets = [Packet(i, 10 * i, 0, rng.integers(-1000, 1000, size=(10, 9)).astype(np.int32)) for i in range(2000)]
    stream = bytearray(b"".join(encode_packet(p) for p in packets))
    hits = rng.choice(len(stream), size=len(stream) // 100, replace=False)
    for h in hits:
        stream[h] ^= int(rng.integers(1, 256))
    dec = FrameDecoder()
    out = []
    for i in range(0, len(stream), 997):
        out += dec.feed(bytes(stream[i:i + 997]))
    originals = {p.seq: p for p in packets}
    assert 0 < len(out) < len(packets)
    assert dec.n_corrupt > 0
    for p in out:
        assert p == originals[p.seq]  # only crc-clean, correctly framed packets come through


def test_text_lines_interleaved(rng):
    p = random_packet(rng, 2)
    dec = FrameDecoder(text_lines=True)
    out = dec.feed(b"OK START\n" + encode_packet(p) + b"INFO fs=250\n")
    assert out == ["OK START", p, "INFO fs=250"]


def test_packet_rate_budget():
    assert packet_rate_budget(10) == {"packets_per_s": 25, "bytes_per_s": 7100}
    assert frame_size(10) == 284
    assert packet_rate_budget(250)["packets_per_s"] == 1
    one = packet_rate_budget(1)
    assert one["packets_per_s"] == 250 and one["bytes_per_s"] == 250 * 41 <= 13312
    with pytest.raises(ConfigError):
        packet_rate_budget(3)
    with pytest.raises(ConfigError):
        packet_rate_budget(10, limit=7000)


def test_volt_scaling():
    assert raw_to_volts(np.array([1]), 4.5, 24)[0] == pytest.approx(GOLDEN_RAW1_VOLT, rel=1e-15)
    assert raw_to_volts(np.array([1]), 4.5, 24)[0] == 4.5 / (24 * 2 ** 23)
    v = np.linspace(-1e-3, 1e-3, 101)
    assert np.all(np.abs(raw_to_volts(volts_to_raw(v, 4.5, 24), 4.5, 24) - v) <= 0.5 * GOLDEN_RAW1_VOLT + 1e-20)
    assert volts_to_raw(np.array([1.0]), 4.5, 24)[0] == (1 << 23) - 1  # clipped at the rail


def _chunks(n_packets, n=10, status=0, fill=None, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    for i in range(n_packets):
        v = rng.normal(0, 10e-6, (n, 9)) if fill is None else np.full((n, 9), fill)
        out.append(SampleChunk(i * n, v, status))
    return out


def test_assembler_lossless_and_gap():
    asm = ChunkAssembler()
    recs = []
    for i in range(25):
        recs += asm.push(Packet(i, 10 * i, 0, np.ones((10, 9), np.int32)))
    assert sum(r.n_samples for r in recs if isinstance(r, SampleChunk)) == 250
    assert not any(isinstance(r, Gap) for r in recs)

    asm = ChunkAssembler()
    recs = []
    for i in range(10):
        if i != 5:
            recs += asm.push(Packet(i, 10 * i, 0, np.ones((10, 9), np.int32)))
    gaps = [r for r in recs if isinstance(r, Gap)]
    assert gaps == [Gap(50, 10)]
    idx = [r.sample_index for r in recs if isinstance(r, SampleChunk)]
    assert idx == sorted(idx) and len(set(idx)) == len(idx)
    assert asm.loss_report()["missing_samples"] == 10
    assert asm.push(Packet(3, 30, 0, np.ones((10, 9), np.int32))) == []  # stale frame never reorders
    assert np.allclose(recs[0].values_volt, GOLDEN_RAW1_VOLT)


def test_wear_state_examples():
    assert set(wear_state(_chunks(25)).values()) == {"Good"}
    oz = STREAM_CHANNELS.index("OZ")
    report = wear_state(_chunks(25, status=1 << oz))
    assert report["OZ"] == "Poor" and sum(v == "Poor" for v in report.values()) == 1
    assert set(wear_state(_chunks(25, fill=0.0)).values()) == {"Poor"}
    rail = _chunks(25)
    rail[3].values_volt[0, 2] = 600e-6
    assert wear_state(rail)["POZ"] == "Poor"
    with pytest.raises(ValueError):
        wear_state(_chunks(24))


def test_wear_state_lead_off_fraction_threshold():
    oz = STREAM_CHANNELS.index("OZ")
    chunks = _chunks(30)
    for c in chunks[:2]:
        c.status = 1 << oz
    assert wear_state(chunks)["OZ"] == "Good"  # 2/30 < 10%
    chunks[2].status = 1 << oz
    assert wear_state(chunks)["OZ"] == "Poor"  # 3/30 == 10%
