"""Causal streaming filters: 1-100 Hz Butterworth bandpass and 50 Hz notch."""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from ..exceptions import DesignError, ShapeError


@dataclass(frozen=True)
class FilterSpec:
    sos: np.ndarray
    fs_hz: float
    description: dict = field(default_factory=dict)

    @property
    def n_sections(self):
        return self.sos.shape[0]


def design_filters(fs_hz=250.0, band_hz=(1.0, 100.0), order=2, notch_hz=50.0, notch_q=30.0):
    """Second-order-section cascade of a Butterworth bandpass and an IIR notch.

    ``order`` is per band edge, so the default bandpass has four poles.
    """
    if fs_hz <= 2 * band_hz[1]:
        raise DesignError(f"fs={fs_hz} Hz cannot support a {band_hz[1]} Hz upper edge")
    if not 0 < band_hz[0] < band_hz[1]:
        raise DesignError(f"bad band {band_hz}")
    bp = sps.butter(order, band_hz, btype="bandpass", fs=fs_hz, output="sos")
    sections = [bp]
    if notch_hz:
        b, a = sps.iirnotch(notch_hz, notch_q, fs=fs_hz)
        sections.append(sps.tf2sos(b, a))
    sos = np.vstack(sections)
    poles = np.concatenate([np.roots(s[3:]) for s in sos])
    if np.any(np.abs(poles) >= 1.0):
        raise DesignError("unstable section in filter cascade")
    desc = {"bandpass_hz": tuple(band_hz), "bandpass_order": 2 * order, "design": "butterworth",
            "notch_hz": notch_hz, "notch_q": notch_q}
    return FilterSpec(sos, fs_hz, desc)


def magnitude_db(spec, freqs_hz):
    """Magnitude response of the cascade in dB at ``freqs_hz``."""
    _, h = sps.sosfreqz(spec.sos, worN=np.asarray(freqs_hz, dtype=float), fs=spec.fs_hz)
    return 20 * np.log10(np.maximum(np.abs(h), 1e-300))


class FilterState:
    """Per-channel delay lines of a :class:`FilterSpec`, advanced causally."""

    def __init__(self, spec, n_channels):
        self.spec = spec
        self.n_channels = n_channels
        self.zi = np.zeros((spec.n_sections, 2, n_channels))

    def reset(self):
        self.zi[:] = 0.0


def filter_stream(state, chunk):
    """Filter one (n_samples, n_channels) chunk and advance ``state``.

    Any partition of a signal into chunks yields the same output as
    filtering it in one call.
    """
    chunk = np.asarray(chunk, dtype=float)
    if chunk.ndim != 2 or chunk.shape[1] != state.n_channels:
        raise ShapeError(f"chunk shape {chunk.shape} does not match {state.n_channels} channels")
    out, state.zi = sps.sosfilt(state.spec.sos, chunk, axis=0, zi=state.zi)
    return out
