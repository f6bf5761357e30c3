"""SDK-layer DSP: buffering, filtering, epoching and spectral metrics."""

from .buffer import RingBuffer
from .epochs import EPOCH_SAMPLES, Epoch, extract_epoch
from .filters import FilterSpec, FilterState, design_filters, filter_stream, magnitude_db
from .spectral import PsdEstimate, c_anti, noise_metrics, welch_psd

__all__ = [
    "EPOCH_SAMPLES", "Epoch", "FilterSpec", "FilterState", "PsdEstimate", "RingBuffer", "c_anti",
    "design_filters", "extract_epoch", "filter_stream", "magnitude_db", "noise_metrics", "welch_psd",
]
