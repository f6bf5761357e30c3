"""Device wire protocol: frame codec, simulator server and host session."""

from .client import ClientSession, client_session
from .device import DeviceServer, parse_pacing, serve_device
from .montage import ACQUISITION, BIAS, FS_HZ, LEAD_OFF_KOHM, REFERENCE, STREAM_CHANNELS, montage_hash
from .packet import (
    FrameDecoder,
    Packet,
    crc16,
    decode_packet,
    encode_packet,
    frame_size,
    packet_rate_budget,
    raw_to_volts,
    volts_to_raw,
)
from .session import ChunkAssembler, Gap, SampleChunk, SessionEvent, wear_state

__all__ = [
    "ACQUISITION", "BIAS", "FS_HZ", "LEAD_OFF_KOHM", "REFERENCE", "STREAM_CHANNELS",
    "ChunkAssembler", "ClientSession", "DeviceServer", "FrameDecoder", "Gap", "Packet",
    "SampleChunk", "SessionEvent", "client_session", "crc16", "decode_packet", "encode_packet",
    "frame_size", "montage_hash", "packet_rate_budget", "parse_pacing", "raw_to_volts",
    "serve_device", "volts_to_raw", "wear_state",
]
