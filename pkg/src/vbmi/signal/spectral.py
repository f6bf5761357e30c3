"""Welch PSD, 50 Hz suppression ratio and noise-floor metrics."""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..exceptions import DomainError


@dataclass
class PsdEstimate:
    freqs_hz: np.ndarray
    power: np.ndarray  # V^2/Hz, last axis is frequency
    fs_hz: float
    nperseg: int
    noverlap: int
    window: str = "hann"

    @property
    def df(self):
        return self.fs_hz / self.nperseg

    def band_power(self, lo, hi):
        mask = (self.freqs_hz >= lo) & (self.freqs_hz <= hi)
        return np.sum(self.power[..., mask], axis=-1) * self.df


def welch_psd(x, fs_hz, segment_s=1.0, overlap=0.5):
    """Hann-windowed averaged periodogram along the last axis."""
    x = np.asarray(x, dtype=float)
    nperseg = int(round(segment_s * fs_hz))
    if x.shape[-1] < nperseg:
        raise ValueError(f"signal of {x.shape[-1]} samples is shorter than one {nperseg}-sample segment")
    noverlap = int(round(overlap * nperseg))
    f, p = sps.welch(x, fs=fs_hz, window="hann", nperseg=nperseg, noverlap=noverlap,
                     detrend="constant", scaling="density", axis=-1)
    return PsdEstimate(f, p, fs_hz, nperseg, noverlap)


def c_anti(input_signal, output_signal, fs_hz, line_hz=50.0):
    """Output-over-input PSD ratio in the bin containing the mains frequency.

    Smaller is better: 1.0 means no suppression.
    """
    x = np.asarray(input_signal, dtype=float)
    y = np.asarray(output_signal, dtype=float)
    if x.shape != y.shape:
        raise ValueError("input and output must have the same shape")
    if x.shape[-1] < 2 * fs_hz:
        raise ValueError("c_anti needs at least 2 s of signal")
    pin = welch_psd(x, fs_hz)
    pout = welch_psd(y, fs_hz)
    k = int(round(line_hz / pin.df))
    num = pout.power[..., k]
    den = pin.power[..., k]
    if np.any(den <= 0):
        raise DomainError(f"input has no power at {line_hz} Hz")
    return float(np.mean(num / den)) if np.ndim(den) else float(num / den)


def noise_metrics(x):
    """Peak-to-peak and RMS (after mean removal) of a signal."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("empty signal")
    return {"v_pp": float(np.ptp(x)), "v_rms": float(np.sqrt(np.mean((x - x.mean()) ** 2)))}
