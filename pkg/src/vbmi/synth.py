"""Reproducible synthetic EEG carrying cVEP responses.

Each subject convolves the bipolar code with a VEP-like kernel, projects the
result onto the seven acquisition channels and adds 1/f background, alpha
and mains noise at a target in-band SNR. Every random draw comes from a
generator keyed on ``(seed, stream, counter)``, so sessions replay exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._config import load_config
from .codebook import base_code, code_waveform
from .protocol.montage import (ACQUISITION, FS_HZ, LEAD_OFF_KOHM, N_ACQUISITION, N_STREAM_CHANNELS,
                               STREAM_CHANNELS, channel_index)

SNR_BAND_HZ = (1.0, 100.0)
KERNEL_SAMPLES = 63
DEFAULT_MIXING = (0.55, 0.65, 0.8, 0.65, 0.9, 1.0, 0.9)
DEFAULT_FLOOR_VRMS = 0.15e-6
DRIFT_BAND = 0.2

# generator stream ids
_TRIAL, _GAP, _FLOOR, _DRIFT, _PHASE = range(5)


def vep_kernel(fs_hz=FS_HZ, n_samples=KERNEL_SAMPLES, peak_volt=5e-6, flash_s=0.04):
    """Biphasic difference-of-gamma pulse whose main lobe peaks near 100 ms.

    Scaled so the response to one isolated flash of ``flash_s`` (one code
    bit at 25 bit/s) peaks at ``peak_volt``.
    """
    t = np.arange(n_samples) / fs_hz
    pos = (t / 0.02) ** 5 * np.exp(-t / 0.02)
    neg = (t / 0.03) ** 5 * np.exp(-t / 0.03)
    k = pos / pos.max() - 0.45 * neg / neg.max()
    flash = np.ones(max(1, int(round(flash_s * fs_hz))))
    return peak_volt * k / np.abs(np.convolve(k, flash)).max()


@dataclass
class SubjectModel:
    """Parameters and RNG state of one synthetic subject.

    ``noise_mix`` holds relative amplitudes of the unit-power ``pink``,
    ``alpha`` and ``mains`` components. ``snr_db=inf`` disables noise.
    """

    rng_seed: int = 0
    snr_db: float = 0.0
    kernel: np.ndarray = None
    mixing: np.ndarray = None
    noise_mix: dict = field(default_factory=lambda: {"pink": 1.0, "alpha": 0.5, "mains": 0.5})
    impedances_kohm: dict = None
    drift: bool = False
    drift_step: float = 0.01
    fs_hz: float = FS_HZ

    def __post_init__(self):
        if self.kernel is None:
            self.kernel = vep_kernel(self.fs_hz)
        self.kernel = np.asarray(self.kernel, dtype=float)
        if not np.all(np.isfinite(self.kernel)):
            raise ValueError("kernel must be finite")
        self.mixing = np.asarray(DEFAULT_MIXING if self.mixing is None else self.mixing, dtype=float)
        if self.mixing.shape != (N_ACQUISITION,) or not np.any(self.mixing):
            raise ValueError(f"mixing must be {N_ACQUISITION} gains with at least one nonzero")
        base = {ch: 20.0 for ch in STREAM_CHANNELS}
        base.update(self.impedances_kohm or {})
        unknown = set(base) - set(STREAM_CHANNELS)
        if unknown:
            raise KeyError(f"unknown electrodes {sorted(unknown)}")
        self.impedances_kohm = base
        self._impedance_now = dict(base)
        self._counters = {}

    def rng(self, stream):
        """Fresh generator for the next draw on ``stream``."""
        n = self._counters.get(stream, 0)
        self._counters[stream] = n + 1
        return np.random.default_rng([self.rng_seed, stream, n])

    @property
    def noise_free(self):
        return math.isinf(self.snr_db) and self.snr_db > 0


def _band_power(x, fs_hz, band=SNR_BAND_HZ):
    """Mean over rows of the in-band power (arbitrary but consistent units)."""
    x = np.atleast_2d(x)
    spec = np.abs(np.fft.rfft(x, axis=-1)) ** 2
    f = np.fft.rfftfreq(x.shape[-1], 1.0 / fs_hz)
    mask = (f >= band[0]) & (f <= band[1])
    return float(np.mean(np.sum(spec[:, mask], axis=-1))) / x.shape[-1] ** 2


def clean_response(subject, code, lag, fs_hz=FS_HZ, duration_s=None):
    """Noise-free 7 x T response to ``code`` delayed by ``lag`` bits.

    The kernel is applied as a circular convolution over one code period,
    then tiled to ``duration_s``.
    """
    duration_s = code.trial_duration_s if duration_s is None else duration_s
    period = code_waveform(code, lag, fs_hz, code.trial_duration_s)
    source = np.zeros_like(period)
    for j, kj in enumerate(subject.kernel):
        if kj != 0.0:
            source += kj * np.roll(period, j)
    n = int(round(duration_s * fs_hz))
    reps = int(round(duration_s / code.trial_duration_s))
    if reps < 1 or reps * period.size != n:
        raise ValueError(f"duration {duration_s} s is not a whole number of code periods")
    source = np.tile(source, reps)
    return subject.mixing[:, None] * source[None, :]


def _noise(subject, rng, n, fs_hz, start_index=0):
    """Unit in-band-power noise mixture, 7 x n."""
    parts = []
    mix = subject.noise_mix
    t = (start_index + np.arange(n)) / fs_hz
    if mix.get("pink", 0.0):
        white = rng.standard_normal((N_ACQUISITION, n))
        spec = np.fft.rfft(white, axis=-1)
        f = np.fft.rfftfreq(n, 1.0 / fs_hz)
        shape = np.zeros_like(f)
        shape[1:] = 1.0 / np.sqrt(f[1:])
        parts.append((mix["pink"], np.fft.irfft(spec * shape, n=n, axis=-1)))
    if mix.get("alpha", 0.0):
        phase = rng.uniform(0, 2 * np.pi)
        parts.append((mix["alpha"], np.tile(np.sin(2 * np.pi * 10.0 * t + phase), (N_ACQUISITION, 1))))
    if mix.get("mains", 0.0):
        parts.append((mix["mains"], np.tile(np.sin(2 * np.pi * 50.0 * t), (N_ACQUISITION, 1))))
    out = np.zeros((N_ACQUISITION, n))
    for w, comp in parts:
        p = _band_power(comp, fs_hz)
        if p > 0:
            out += w * comp / math.sqrt(p)
    p = _band_power(out, fs_hz)
    return out / math.sqrt(p) if p > 0 else out


def noise_scale(subject, code, fs_hz=FS_HZ):
    """Amplitude that places unit-power noise at ``subject.snr_db`` below the evoked power."""
    if subject.noise_free:
        return 0.0
    p_clean = _band_power(clean_response(subject, code, 0, fs_hz), fs_hz)
    return math.sqrt(p_clean / 10 ** (subject.snr_db / 10.0))


def generate_trial(subject, target_lag, code=None, fs_hz=FS_HZ, start_index=0):
    """One code period (7 x 280 at 250 Hz) of response plus noise, in volts.

    Each call advances the subject's trial counter; a fresh subject with the
    same seed replays the identical sequence of trials.
    """
    code = base_code() if code is None else code
    clean = clean_response(subject, code, target_lag, fs_hz)
    rng = subject.rng(_TRIAL)
    scale = noise_scale(subject, code, fs_hz)
    if scale == 0.0:
        return clean
    return clean + scale * _noise(subject, rng, clean.shape[1], fs_hz, start_index)


def generate_noise(subject, n_samples, code=None, fs_hz=FS_HZ, start_index=0):
    """Background activity with no evoked response (inter-trial gaps)."""
    code = base_code() if code is None else code
    rng = subject.rng(_GAP)
    scale = noise_scale(subject, code, fs_hz)
    if scale == 0.0:
        return np.zeros((N_ACQUISITION, n_samples))
    return scale * _noise(subject, rng, n_samples, fs_hz, start_index)


def impedance_of(subject, electrode):
    """Current contact impedance of ``electrode`` in kOhm."""
    if electrode not in STREAM_CHANNELS:
        raise KeyError(f"unknown electrode {electrode!r}; montage is {STREAM_CHANNELS}")
    return subject._impedance_now[electrode]


def step_impedance(subject):
    """Advance the bounded random-walk drift by one step (no-op when drift is off)."""
    if not subject.drift:
        return
    rng = subject.rng(_DRIFT)
    steps = rng.standard_normal(len(STREAM_CHANNELS)) * subject.drift_step
    for ch, s in zip(STREAM_CHANNELS, steps):
        z0 = subject.impedances_kohm[ch]
        lo, hi = (1 - DRIFT_BAND) * z0, (1 + DRIFT_BAND) * z0
        z = subject._impedance_now[ch] + s * z0
        # reflect back into the band
        if z > hi:
            z = 2 * hi - z
        if z < lo:
            z = 2 * lo - z
        subject._impedance_now[ch] = min(max(z, lo), hi)


def lead_off_status(subject):
    """16-bit lead-off bitmap: bit c set when stream channel c is at or above 50 kOhm."""
    status = 0
    for c, ch in enumerate(STREAM_CHANNELS):
        if impedance_of(subject, ch) >= LEAD_OFF_KOHM:
            status |= 1 << c
    return status


def shorted_input_noise(n_samples, floor_vrms=DEFAULT_FLOOR_VRMS, rng=None, n_channels=N_STREAM_CHANNELS):
    """White amplifier floor, as measured with the inputs shorted."""
    rng = np.random.default_rng(0) if rng is None else rng
    return floor_vrms * rng.standard_normal((n_channels, n_samples))


class SessionSource:
    """Device sample source that plays a scripted sequence of trials and gaps.

    ``segments`` is a list of ``("trial", lag)`` or ``("gap", n_samples)``.
    ``onsets`` lists the absolute sample index at which each trial starts.
    Reference and bias channels carry only the amplifier floor.
    """

    def __init__(self, subject, segments, code=None, fs_hz=FS_HZ, floor_vrms=DEFAULT_FLOOR_VRMS):
        self.subject = subject
        self.code = base_code() if code is None else code
        self.fs_hz = fs_hz
        self.floor_vrms = floor_vrms
        self.segments = list(segments)
        self.trial_samples = int(round(self.code.trial_duration_s * fs_hz))
        self.onsets = []
        self.labels = []
        pos = 0
        for kind, arg in self.segments:
            if kind == "trial":
                self.onsets.append(pos)
                self.labels.append(arg)
                pos += self.trial_samples
            elif kind == "gap":
                pos += int(arg)
            else:
                raise ValueError(f"unknown segment kind {kind!r}")
        self.total_samples = pos
        self._seg = 0
        self._pos = 0
        self._buf = np.zeros((0, N_STREAM_CHANNELS))
        self._since_drift = 0

    def _render_next(self):
        kind, arg = self.segments[self._seg]
        self._seg += 1
        if kind == "trial":
            eeg = generate_trial(self.subject, arg, self.code, self.fs_hz, start_index=self._pos)
        else:
            eeg = generate_noise(self.subject, int(arg), self.code, self.fs_hz, start_index=self._pos)
        n = eeg.shape[1]
        block = np.zeros((N_STREAM_CHANNELS, n))
        block[:N_ACQUISITION] = eeg
        if self.floor_vrms > 0:
            block += shorted_input_noise(n, self.floor_vrms, self.subject.rng(_FLOOR))
        self._pos += n
        return block.T

    def read(self, n):
        while self._buf.shape[0] < n and self._seg < len(self.segments):
            self._buf = np.concatenate([self._buf, self._render_next()], axis=0)
        if self._buf.shape[0] == 0:
            return None, 0
        if self._buf.shape[0] < n:
            # pad the final partial packet with floor noise
            pad = shorted_input_noise(n - self._buf.shape[0], self.floor_vrms, self.subject.rng(_FLOOR)).T
            self._buf = np.concatenate([self._buf, pad], axis=0)
        out, self._buf = self._buf[:n], self._buf[n:]
        self._since_drift += n
        if self._since_drift >= self.fs_hz:
            self._since_drift = 0
            step_impedance(self.subject)
        return out, lead_off_status(self.subject)

    def impedances_kohm(self):
        return {ch: impedance_of(self.subject, ch) for ch in STREAM_CHANNELS}


class ContinuousSource(SessionSource):
    """Endless back-to-back trials at a fixed target lag, for free-running demos."""

    def __init__(self, subject, lag=0, gap_samples=0, **kwargs):
        super().__init__(subject, [], **kwargs)
        self.lag = lag
        self.gap_samples = gap_samples

    def read(self, n):
        if self._seg >= len(self.segments):
            self.segments.append(("trial", self.lag))
            if self.gap_samples:
                self.segments.append(("gap", self.gap_samples))
        return super().read(n)


def subject_from_config(source):
    """Build a subject from a TOML block with ``seed``, ``snr_db``, ``amplitude_uv``,
    ``[noise]`` weights, ``[impedances_kohm]`` and ``drift``."""
    cfg = load_config(source)
    kwargs = {
        "rng_seed": int(cfg.get("seed", 0)),
        "snr_db": float(cfg.get("snr_db", 0.0)),
        "drift": bool(cfg.get("drift", False)),
    }
    if "amplitude_uv" in cfg:
        kwargs["kernel"] = vep_kernel(peak_volt=float(cfg["amplitude_uv"]) * 1e-6)
    if "noise" in cfg:
        kwargs["noise_mix"] = {k: float(v) for k, v in cfg["noise"].items()}
    if "mixing" in cfg:
        kwargs["mixing"] = cfg["mixing"]
    if "impedances_kohm" in cfg:
        kwargs["impedances_kohm"] = {k: float(v) for k, v in cfg["impedances_kohm"].items()}
    return SubjectModel(**kwargs)


__all__ = [
    "ACQUISITION", "ContinuousSource", "SessionSource", "SubjectModel", "channel_index", "clean_response",
    "generate_noise", "generate_trial", "impedance_of", "lead_off_status", "noise_scale",
    "shorted_input_noise", "step_impedance", "subject_from_config", "vep_kernel",
]
