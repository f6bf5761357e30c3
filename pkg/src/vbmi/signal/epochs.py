"""Onset-aligned epochs cut from the ring buffer."""

from dataclasses import dataclass

import numpy as np

EPOCH_SAMPLES = 280


@dataclass
class Epoch:
    data: np.ndarray  # (channels, samples), volts
    onset_sample: int
    target_label: int = None
    trial_ordinal: int = 0
    mean_removed: bool = True


def extract_epoch(buffer, onset_sample, n_samples=EPOCH_SAMPLES, target_label=None, trial_ordinal=0):
    """Copy ``[onset, onset + n_samples)`` out of ``buffer`` with per-channel mean removed.

    Raises ``NotReadyError``, ``GapError`` or ``OverwrittenError`` from the
    buffer when the window is unusable.
    """
    data = buffer.read(onset_sample, onset_sample + n_samples)
    data = data - data.mean(axis=1, keepdims=True)
    return Epoch(data, onset_sample, target_label, trial_ordinal, True)
