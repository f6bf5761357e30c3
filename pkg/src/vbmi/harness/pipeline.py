"""SDK data path from a device source to onset-aligned epochs.

Three interchangeable transports deliver identical samples: ``direct``
(quantize in process), ``loopback`` (encode and decode every frame in
memory) and ``tcp`` (device server plus client session over a socket).
"""

import numpy as np

from ..exceptions import ConfigError, GapError, NotReadyError, OverwrittenError
from ..protocol import (ChunkAssembler, ClientSession, FrameDecoder, Gap, Packet, SampleChunk, encode_packet,
                        raw_to_volts, serve_device, volts_to_raw)
from ..protocol.montage import FS_HZ, N_ACQUISITION
from ..protocol.session import DEFAULT_GAIN, DEFAULT_V_REF
from ..signal import EPOCH_SAMPLES, FilterState, RingBuffer, design_filters, extract_epoch, filter_stream

TRANSPORTS = ("direct", "loopback", "tcp")


def _packets(source, samples_per_packet, v_ref, gain, drop_seqs):
    seq = 0
    index = 0
    while True:
        volts, status = source.read(samples_per_packet)
        if volts is None:
            return
        if seq not in drop_seqs:
            yield Packet(seq & 0xFFFF, index, status, volts_to_raw(volts, v_ref, gain))
        seq += 1
        index += samples_per_packet


def stream_records(source, transport="direct", samples_per_packet=10, pacing="max", v_ref=DEFAULT_V_REF,
                   gain=DEFAULT_GAIN, drop_seqs=(), stats=None):
    """Yield ``SampleChunk`` and ``Gap`` records for everything ``source`` produces."""
    drop_seqs = set(drop_seqs)
    if transport == "direct":
        index = None
        for p in _packets(source, samples_per_packet, v_ref, gain, drop_seqs):
            if index is not None and p.sample_index > index:
                yield Gap(index, p.sample_index - index)
            yield SampleChunk(p.sample_index, raw_to_volts(p.payload, v_ref, gain), p.status)
            index = p.sample_index + p.n_samples
    elif transport == "loopback":
        decoder = FrameDecoder()
        assembler = ChunkAssembler(v_ref, gain)
        for p in _packets(source, samples_per_packet, v_ref, gain, drop_seqs):
            for packet in decoder.feed(encode_packet(p)):
                yield from assembler.push(packet)
        if stats is not None:
            stats.update(assembler.loss_report())
    elif transport == "tcp":
        server = serve_device(source, pacing=pacing, samples_per_packet=samples_per_packet, v_ref=v_ref,
                              gain=gain, drop_seqs=drop_seqs)
        try:
            with ClientSession(server.address) as client:
                client.start()
                yield from client.records()
                if stats is not None:
                    stats.update(client.loss_report())
                    stats["bytes_received"] = client.bytes_received
        finally:
            server.stop()
    else:
        raise ConfigError(f"unknown transport {transport!r}; expected one of {TRANSPORTS}")


class Pipeline:
    """Filter, buffer and epoch a record stream against known stimulus onsets.

    ``consume`` returns the epochs whose windows completed with that record,
    as ``(tag, Epoch or exception)`` pairs in onset order.
    """

    def __init__(self, fs_hz=FS_HZ, n_channels=N_ACQUISITION, capacity_s=30.0, epoch_samples=EPOCH_SAMPLES,
                 filter_spec=None):
        self.fs_hz = fs_hz
        self.n_channels = n_channels
        self.epoch_samples = epoch_samples
        self.spec = design_filters(fs_hz) if filter_spec is None else filter_spec
        self.state = FilterState(self.spec, n_channels)
        self.buffer = RingBuffer(n_channels, int(round(capacity_s * fs_hz)))
        self._pending = []

    def expect(self, onset, tag=None):
        self._pending.append((onset, tag))
        self._pending.sort(key=lambda item: item[0])

    def consume(self, record):
        if isinstance(record, Gap):
            self.buffer.mark_gap(record.n_missing)
        else:
            gap = record.sample_index - self.buffer.write_index
            if gap > 0:
                self.buffer.mark_gap(gap)
            filtered = filter_stream(self.state, record.values_volt[:, :self.n_channels])
            self.buffer.write(filtered.T)
        done = []
        while self._pending and self._pending[0][0] + self.epoch_samples <= self.buffer.write_index:
            onset, tag = self._pending.pop(0)
            try:
                done.append((tag, extract_epoch(self.buffer, onset, self.epoch_samples)))
            except (GapError, OverwrittenError, NotReadyError) as exc:
                done.append((tag, exc))
        return done

    @property
    def pending(self):
        return len(self._pending)


def epochs_array(epochs):
    return np.stack([e.data for e in epochs])
