"""Wall-clock measurement of single-selection inference."""

import time

import numpy as np


def infer_latency_probe(model, epochs, mode="mean_scores"):
    """Microseconds for one full score-and-aggregate call on ``epochs``.

    ``epochs`` is one (n_channels, n_samples) epoch or a sequence of them
    (the trials of one selection).
    """
    epochs = np.asarray(epochs, dtype=float)
    if epochs.ndim == 2:
        epochs = epochs[None]
    t0 = time.perf_counter_ns()
    model.predict_selection(epochs, mode=mode)
    return (time.perf_counter_ns() - t0) / 1e3


def latency_profile(model, epochs, n_iter=1000, warmup=20, mode="mean_scores"):
    """Median, p99 and max over ``n_iter`` probes after ``warmup`` discarded calls."""
    for _ in range(warmup):
        infer_latency_probe(model, epochs, mode)
    us = np.array([infer_latency_probe(model, epochs, mode) for _ in range(n_iter)])
    return {"median_us": float(np.median(us)), "p99_us": float(np.percentile(us, 99)),
            "max_us": float(us.max()), "n": int(n_iter)}
