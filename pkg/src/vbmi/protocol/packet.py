"""Binary frame codec for the device stream.

Frame layout (header fields little-endian, samples big-endian)::

    A5 5A | version u8 | seq u16 | sample_index u32 | n_samples u8 | status u16
    | n_samples x 9 x int24 (channel-major within each sample) | crc16 u16

The CRC is CRC-16/CCITT-FALSE over every byte from ``version`` through the
payload.
"""

import binascii
import struct
from dataclasses import dataclass

import numpy as np

from ..exceptions import CorruptPacketError, EncodeError, NeedMoreData
from .montage import N_STREAM_CHANNELS

SYNC = b"\xa5\x5a"
VERSION = 1
HEADER = struct.Struct("<2sBHIBH")
CRC = struct.Struct("<H")
BYTES_PER_SAMPLE = 3
RAW_MIN = -(1 << 23)
RAW_MAX = (1 << 23) - 1
MAX_BYTES_PER_S = 13 * 1024
MAX_TEXT_LINE = 512


def crc16(data):
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection)."""
    return binascii.crc_hqx(data, 0xFFFF)


def frame_size(n_samples, n_channels=N_STREAM_CHANNELS):
    return HEADER.size + n_samples * n_channels * BYTES_PER_SAMPLE + CRC.size


@dataclass(eq=False)
class Packet:
    seq: int
    sample_index: int
    status: int
    payload: np.ndarray  # (n_samples, 9) raw ADC codes
    version: int = VERSION

    @property
    def n_samples(self):
        return self.payload.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Packet):
            return NotImplemented
        return (self.seq == other.seq and self.sample_index == other.sample_index
                and self.status == other.status and self.version == other.version
                and self.payload.shape == other.payload.shape
                and bool(np.array_equal(self.payload, other.payload)))


def pack_int24(raw):
    u = np.asarray(raw, dtype=np.int64).ravel() & 0xFFFFFF
    out = np.empty((u.size, 3), dtype=np.uint8)
    out[:, 0] = u >> 16
    out[:, 1] = (u >> 8) & 0xFF
    out[:, 2] = u & 0xFF
    return out.tobytes()


def unpack_int24(data):
    b = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    u = (b[:, 0] << 16) | (b[:, 1] << 8) | b[:, 2]
    return (u ^ 0x800000) - 0x800000


def encode_packet(p):
    payload = np.asarray(p.payload)
    if payload.ndim != 2 or payload.shape[1] != N_STREAM_CHANNELS:
        raise EncodeError(f"payload must be (n_samples, {N_STREAM_CHANNELS}), got {payload.shape}")
    if not 1 <= payload.shape[0] <= 255:
        raise EncodeError(f"n_samples must be in [1, 255], got {payload.shape[0]}")
    if payload.size and (payload.min() < RAW_MIN or payload.max() > RAW_MAX):
        raise EncodeError("raw codes exceed the signed 24-bit range")
    if not np.issubdtype(payload.dtype, np.integer):
        raise EncodeError("raw codes must be integers")
    for name, value, bits in (("version", p.version, 8), ("seq", p.seq, 16),
                              ("sample_index", p.sample_index, 32), ("status", p.status, 16)):
        if not 0 <= value < (1 << bits):
            raise EncodeError(f"{name}={value} does not fit in {bits} bits")
    body = HEADER.pack(SYNC, p.version, p.seq, p.sample_index, payload.shape[0], p.status)[2:]
    body += pack_int24(payload)
    return SYNC + body + CRC.pack(crc16(body))


def _parse_frame(buf, pos=0):
    """Parse one frame starting at ``buf[pos]``; return ``(packet, end)``."""
    if len(buf) - pos < HEADER.size:
        raise NeedMoreData(HEADER.size - (len(buf) - pos))
    sync, version, seq, sample_index, n_samples, status = HEADER.unpack_from(buf, pos)
    if sync != SYNC:
        raise CorruptPacketError("missing sync pair")
    if version != VERSION or n_samples == 0:
        raise CorruptPacketError(f"bad header (version={version}, n_samples={n_samples})")
    end = pos + frame_size(n_samples)
    if len(buf) < end:
        raise NeedMoreData(end - len(buf))
    body = bytes(buf[pos + 2:end - CRC.size])
    (crc,) = CRC.unpack_from(buf, end - CRC.size)
    if crc16(body) != crc:
        raise CorruptPacketError(f"crc mismatch at seq {seq}")
    raw = unpack_int24(body[HEADER.size - 2:]).reshape(n_samples, N_STREAM_CHANNELS)
    return Packet(seq, sample_index, status, raw, version), end


def decode_packet(data):
    """Decode a single frame at the start of ``data``.

    Raises
    ------
    NeedMoreData
        ``data`` ends before the frame does.
    CorruptPacketError
        Missing sync, bad header or CRC mismatch.
    """
    return _parse_frame(data, 0)[0]


class FrameDecoder:
    """Incremental decoder that resynchronizes on the next sync pair after a bad frame.

    With ``text_lines=True`` printable ASCII lines ending in ``\\n`` that sit
    between frames are returned as ``str`` (the command reply channel).
    """

    def __init__(self, text_lines=False):
        self.text_lines = text_lines
        self._buf = bytearray()
        self.n_packets = 0
        self.n_corrupt = 0
        self.n_skipped_bytes = 0

    def feed(self, data):
        self._buf += data
        out = []
        pos = 0
        buf = self._buf
        while pos < len(buf):
            if buf[pos] == 0xA5:
                if pos + 1 >= len(buf):
                    break
                if buf[pos + 1] == 0x5A:
                    try:
                        packet, end = _parse_frame(buf, pos)
                    except NeedMoreData:
                        break
                    except CorruptPacketError:
                        self.n_corrupt += 1
                        pos += 1
                        continue
                    out.append(packet)
                    self.n_packets += 1
                    pos = end
                    continue
            elif self.text_lines and 0x20 <= buf[pos] < 0x7F:
                line, end = self._try_text(buf, pos)
                if line is not None:
                    out.append(line)
                    pos = end
                    continue
                if end is None:
                    break
            pos += 1
            self.n_skipped_bytes += 1
        del self._buf[:pos]
        return out

    @staticmethod
    def _try_text(buf, pos):
        """Return ``(line, end)``, ``(None, None)`` to wait, or ``(None, pos)`` if not text."""
        limit = min(len(buf), pos + MAX_TEXT_LINE)
        for i in range(pos, limit):
            c = buf[i]
            if c == 0x0A:
                return bytes(buf[pos:i]).decode("ascii"), i + 1
            if not 0x20 <= c < 0x7F:
                return None, pos
        if limit == len(buf) and limit - pos < MAX_TEXT_LINE:
            return None, None
        return None, pos


def packet_rate_budget(n_samples_per_packet, fs_hz=250, limit=MAX_BYTES_PER_S):
    """Packets and bytes per second for a packet size; must fit the link budget."""
    from ..exceptions import ConfigError

    if n_samples_per_packet < 1 or fs_hz % n_samples_per_packet:
        raise ConfigError(f"{fs_hz} Hz is not divisible by {n_samples_per_packet} samples per packet")
    packets_per_s = fs_hz // n_samples_per_packet
    bytes_per_s = packets_per_s * frame_size(n_samples_per_packet)
    if bytes_per_s > limit:
        raise ConfigError(f"{bytes_per_s} B/s exceeds the {limit} B/s link budget")
    return {"packets_per_s": packets_per_s, "bytes_per_s": bytes_per_s}


def volts_to_raw(volts, v_ref, gain):
    scale = gain * (1 << 23) / v_ref
    return np.clip(np.rint(np.asarray(volts) * scale), RAW_MIN, RAW_MAX).astype(np.int32)


def raw_to_volts(raw, v_ref, gain):
    return np.asarray(raw, dtype=float) * (v_ref / (gain * (1 << 23)))
