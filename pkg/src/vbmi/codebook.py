"""cVEP code sequence, per-target circular shifts and stimulus timing."""

import logging
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from ._config import load_config
from .exceptions import InvalidCodeError

logger = logging.getLogger(__name__)

# As printed: 29 symbols for a code described as 28-bit. Its first and last
# symbols are both 1, so dropping either end yields rotations of one another.
PRINTED_CODE = (1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1,
                0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1)
DEFAULT_BIT_RATE_HZ = 25.0
VARIANTS = ("drop_last", "drop_first")


@dataclass(frozen=True)
class CodeSequence:
    """Binary stimulus code played at ``bit_rate_hz`` bits per second."""

    bits: tuple
    bit_rate_hz: float = DEFAULT_BIT_RATE_HZ

    def __post_init__(self):
        bits = tuple(int(b) if b in (0, 1) else b for b in self.bits)
        if len(bits) < 2:
            raise InvalidCodeError(f"code needs at least 2 bits, got {len(bits)}")
        bad = [b for b in bits if b not in (0, 1)]
        if bad:
            raise InvalidCodeError(f"non-binary symbols in code: {bad!r}")
        if not self.bit_rate_hz > 0:
            raise InvalidCodeError("bit_rate_hz must be positive")
        object.__setattr__(self, "bits", bits)

    @property
    def length(self):
        return len(self.bits)

    @property
    def trial_duration_s(self):
        return self.length / self.bit_rate_hz

    @property
    def bipolar(self):
        """The code as a +1/-1 integer array."""
        return 2 * np.asarray(self.bits, dtype=np.int64) - 1

    def content_hash(self):
        """32-bit fingerprint used to tie trained models to a code."""
        text = "".join(map(str, self.bits)) + f"@{self.bit_rate_hz!r}"
        return zlib.crc32(text.encode("ascii"))


@dataclass(frozen=True)
class StimulusSchedule:
    target_lags: tuple
    bit_onsets_s: tuple
    n_targets: int
    trial_duration_s: float
    code: CodeSequence = field(repr=False, default=None)


def base_code(variant="drop_last", bit_rate_hz=DEFAULT_BIT_RATE_HZ):
    """Return the default 28-bit code.

    Parameters
    ----------
    variant : {"drop_last", "drop_first"}
        Which end of the printed 29-symbol listing to discard.
    bit_rate_hz : float
        Flicker rate; 25 Hz gives 1.12 s per code period.
    """
    if variant == "drop_last":
        bits = PRINTED_CODE[:-1]
    elif variant == "drop_first":
        bits = PRINTED_CODE[1:]
    else:
        raise InvalidCodeError(f"unknown code variant {variant!r}; expected one of {VARIANTS}")
    code = CodeSequence(bits, bit_rate_hz)
    ac = [periodic_autocorrelation(code, k) for k in range(1, code.length)]
    logger.debug("code variant %s: off-peak autocorrelation in [%d, %d]", variant, min(ac), max(ac))
    return code


def code_from_config(source):
    """Build a code from a config block such as ``code = "1011..."``.

    Optional keys: ``bit_rate_hz`` (default 25) and ``trim`` which may be
    ``"none"``, ``"tail"`` or ``"head"`` to discard one symbol.
    """
    cfg = load_config(source)
    if "code" not in cfg:
        raise InvalidCodeError("config has no 'code' entry")
    raw = cfg["code"]
    if isinstance(raw, str):
        symbols = [int(c) if c.isdigit() else c for c in raw.replace(",", "").replace(" ", "")]
    else:
        symbols = list(raw)
    trim = cfg.get("trim", "none")
    if trim == "tail":
        symbols = symbols[:-1]
    elif trim == "head":
        symbols = symbols[1:]
    elif trim != "none":
        raise InvalidCodeError(f"unknown trim mode {trim!r}")
    return CodeSequence(tuple(symbols), float(cfg.get("bit_rate_hz", DEFAULT_BIT_RATE_HZ)))


def periodic_autocorrelation(code, lag):
    """Periodic autocorrelation of the bipolar code at an integer lag."""
    if not 0 <= lag < code.length:
        raise IndexError(f"lag {lag} outside [0, {code.length})")
    s = code.bipolar
    return int(np.dot(s, np.roll(s, -lag)))


def target_codes(code, n_targets):
    """Assign evenly spaced circular lags of ``code`` to ``n_targets`` targets."""
    if not 1 <= n_targets <= code.length:
        raise IndexError(f"n_targets must be in [1, {code.length}], got {n_targets}")
    step = code.length // n_targets
    lags = tuple(k * step for k in range(n_targets))
    onsets = tuple(i / code.bit_rate_hz for i in range(code.length))
    return StimulusSchedule(lags, onsets, n_targets, code.trial_duration_s, code)


def code_waveform(code, lag, fs_hz, duration_s):
    """Sample the bipolar code, delayed circularly by ``lag`` bits.

    Sample ``m`` carries bit ``floor(m * bit_rate / fs)`` of the shifted code,
    so at 250 Hz and 25 bit/s each bit spans 10 samples.
    """
    if not fs_hz > 0:
        raise ValueError("fs_hz must be positive")
    periods = duration_s / code.trial_duration_s
    if duration_s <= 0 or not math.isclose(periods, round(periods), rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"duration {duration_s} s is not a whole number of {code.trial_duration_s} s periods")
    n = int(round(duration_s * fs_hz))
    idx = np.floor(np.arange(n) * code.bit_rate_hz / fs_hz).astype(np.int64)
    shifted = np.roll(code.bipolar, lag)
    return shifted[idx % code.length].astype(float)
