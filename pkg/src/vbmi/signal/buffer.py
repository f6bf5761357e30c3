"""Fixed-capacity multichannel ring buffer indexed by absolute sample number."""

import numpy as np

from ..exceptions import GapError, NotReadyError, OverwrittenError


class RingBuffer:
    """Holds the newest ``capacity`` samples of a ``n_channels`` stream.

    Reads address absolute sample indices. Windows that were overwritten,
    are not yet written, or overlap a transport gap raise instead of
    returning stale or missing data.
    """

    def __init__(self, n_channels=7, capacity=7500):
        self.n_channels = n_channels
        self.capacity = capacity
        self._data = np.zeros((n_channels, capacity))
        self.write_index = 0
        self.gaps = []  # [start, stop) ranges of lost samples
        self.n_overwritten_unread = 0
        self._read_high = 0

    @property
    def oldest_index(self):
        return max(0, self.write_index - self.capacity)

    def _evict(self, n):
        start = self.write_index - self.capacity
        stop = start + n
        lo = max(start, self._read_high, 0)
        if stop > lo:
            self.n_overwritten_unread += stop - lo
        floor = stop
        self.gaps = [g for g in self.gaps if g[1] > floor]

    def _put(self, block):
        n = block.shape[1]
        if n > self.capacity:
            self._put(block[:, :n - self.capacity])
            block = block[:, n - self.capacity:]
            n = self.capacity
        self._evict(n)
        pos = self.write_index % self.capacity
        first = min(n, self.capacity - pos)
        self._data[:, pos:pos + first] = block[:, :first]
        self._data[:, :n - first] = block[:, first:]
        self.write_index += n

    def write(self, block):
        """Append ``block`` of shape (n_channels, n_samples)."""
        block = np.asarray(block, dtype=float)
        if block.ndim != 2 or block.shape[0] != self.n_channels:
            raise ValueError(f"expected ({self.n_channels}, n) block, got {block.shape}")
        self._put(block)

    def mark_gap(self, n_missing):
        """Advance past ``n_missing`` samples that never arrived."""
        if n_missing <= 0:
            return
        start = self.write_index
        self._put(np.full((self.n_channels, n_missing), np.nan))
        self.gaps.append((start, start + n_missing))

    def check_window(self, a, b):
        if b > self.write_index:
            raise NotReadyError(f"window [{a}, {b}) ends past write index {self.write_index}")
        if a < self.oldest_index or a < 0:
            raise OverwrittenError(f"window [{a}, {b}) starts before oldest sample {self.oldest_index}")
        if a > b:
            raise ValueError("window start after end")
        for g0, g1 in self.gaps:
            if g0 < b and a < g1:
                raise GapError(f"window [{a}, {b}) overlaps lost samples [{g0}, {g1})")

    def read(self, a, b):
        """Return a copy of samples ``[a, b)`` as (n_channels, b - a)."""
        self.check_window(a, b)
        idx = np.arange(a, b) % self.capacity
        self._read_high = max(self._read_high, b)
        return self._data[:, idx]
