"""Selection-rate metrics: decision time interval and Wolpaw information transfer rate."""

import math

from ..codebook import base_code
from ..exceptions import DomainError


def itr(n, p, t_s):
    """Bits per minute for ``n`` targets at accuracy ``p`` and ``t_s`` seconds per selection."""
    if n < 2:
        raise DomainError("ITR needs at least 2 targets")
    if t_s <= 0:
        raise DomainError("selection time must be positive")
    if p > 1 or p < 1.0 / n - 1e-12:
        raise DomainError(f"accuracy {p} outside [1/{n}, 1]")
    bits = math.log2(n)
    if p > 0:
        bits += p * math.log2(p)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) / (n - 1))
    return max(bits, 0.0) * 60.0 / t_s


def dti(n_trials, code=None):
    """Stimulation time per decision: trials times one code period."""
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    code = base_code() if code is None else code
    return n_trials * code.length / code.bit_rate_hz
