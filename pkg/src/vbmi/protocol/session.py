"""Host-side stream assembly: volt scaling, loss accounting and wear detection."""

import time
from dataclasses import dataclass, field

import numpy as np

from .montage import FS_HZ, STREAM_CHANNELS
from .packet import raw_to_volts

DEFAULT_V_REF = 4.5
DEFAULT_GAIN = 24
RAIL_PP_VOLT = 500e-6
LEAD_OFF_FRACTION = 0.10


@dataclass
class SampleChunk:
    sample_index: int
    values_volt: np.ndarray  # (n_samples, 9)
    status: int
    recv_time: float = 0.0
    channels: tuple = STREAM_CHANNELS

    @property
    def n_samples(self):
        return self.values_volt.shape[0]


@dataclass(frozen=True)
class Gap:
    """``n_missing`` samples starting at ``start_index`` never arrived."""

    start_index: int
    n_missing: int


@dataclass
class SessionEvent:
    kind: str
    detail: dict = field(default_factory=dict)
    time: float = field(default_factory=time.monotonic)


class ChunkAssembler:
    """Turns decoded packets into ordered volt-scaled chunks plus gap records."""

    def __init__(self, v_ref=DEFAULT_V_REF, gain=DEFAULT_GAIN, clock=time.monotonic):
        self.v_ref = v_ref
        self.gain = gain
        self.clock = clock
        self.next_index = None
        self.n_samples = 0
        self.n_gaps = 0
        self.n_missing = 0
        self.n_stale = 0

    def push(self, packet):
        out = []
        if self.next_index is not None:
            if packet.sample_index < self.next_index:
                # duplicate or reordered frame; delivering it would break ordering
                self.n_stale += 1
                return out
            if packet.sample_index > self.next_index:
                gap = Gap(self.next_index, packet.sample_index - self.next_index)
                self.n_gaps += 1
                self.n_missing += gap.n_missing
                out.append(gap)
        values = raw_to_volts(packet.payload, self.v_ref, self.gain)
        out.append(SampleChunk(packet.sample_index, values, packet.status, self.clock()))
        self.next_index = packet.sample_index + packet.n_samples
        self.n_samples += packet.n_samples
        return out

    def loss_report(self):
        return {"samples": self.n_samples, "gaps": self.n_gaps,
                "missing_samples": self.n_missing, "stale_packets": self.n_stale}


def wear_state(chunks, fs_hz=FS_HZ):
    """Classify each stream channel as ``"Good"`` or ``"Poor"``.

    A channel is Poor when its lead-off status bit is set in at least 10% of
    the packets, its peak-to-peak swing exceeds 500 uV, or it is exactly
    constant over the window. The window must cover at least one second.
    """
    chunks = [c for c in chunks if isinstance(c, SampleChunk)]
    n_total = sum(c.n_samples for c in chunks)
    if n_total < fs_hz:
        raise ValueError(f"wear check needs >= {int(fs_hz)} samples, got {n_total}")
    data = np.concatenate([c.values_volt for c in chunks], axis=0)
    status = np.array([c.status for c in chunks], dtype=np.int64)
    report = {}
    for c, label in enumerate(STREAM_CHANNELS):
        lead_off = np.mean((status >> c) & 1) >= LEAD_OFF_FRACTION
        ptp = np.ptp(data[:, c])
        poor = lead_off or ptp > RAIL_PP_VOLT or ptp == 0.0
        report[label] = "Poor" if poor else "Good"
    return report
