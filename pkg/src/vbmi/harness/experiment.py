"""Closed-loop experiments with synthetic subjects.

Each subject owns its full pipeline: a scripted device source, a transport,
the filter/ring-buffer/epoch stage and a decoder trained on that subject's
own calibration session. Results reduce in subject order, so a fixed seed
gives a byte-identical report whatever ``n_jobs`` is.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import closing
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .._config import load_config
from ..codebook import base_code, target_codes
from ..decoder import TDCA, TRCA
from ..exceptions import ConfigError, DomainError, WearError
from ..protocol import SampleChunk, montage_hash, wear_state
from ..protocol.montage import FS_HZ
from ..synth import DEFAULT_FLOOR_VRMS, SessionSource, SubjectModel
from .metrics import dti, itr
from .pipeline import TRANSPORTS, Pipeline, stream_records

ALGOS = ("TRCA", "TDCA")

# Published human-EEG results, printed beside measured ones for orientation only.
PUBLISHED_REFERENCE = {
    "accuracy": {
        (7, 3): (0.9611, 0.0152),
        (7, 2): (0.9222, 0.0455),
        (4, 2): (0.9653, 0.0249),
        (4, 1): (0.9236, 0.0192),
    },
    "itr_bits_per_min": 65.0,
    "dti_s": 2.24,
}
PUBLISHED_GRID = ((7, 3), (7, 2), (4, 2), (4, 1))


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment run.

    ``n_selections`` is per subject; targets are balanced within each
    subject's block and shuffled with the subject seed.
    """

    n_targets: int = 7
    n_trials_per_selection: int = 2
    n_selections: int = 14
    n_subjects: int = 20
    algo: str = "TRCA"
    snr_db: float = -10.0
    seed: int = 0
    training_reps: int = 3
    training_gap_s: float = 0.3
    training_budget_s: float = 30.0
    inter_trial_gap_s: float = 0.5
    preroll_s: float = 1.0
    aggregation: str = "mean_scores"
    transport: str = "direct"
    pacing: str = "max"
    samples_per_packet: int = 10
    floor_vrms: float = DEFAULT_FLOOR_VRMS
    code_variant: str = "drop_last"
    n_delays: int = 5
    n_components: int = 4
    gamma: float = 1e-6
    drift: bool = False
    impedances_kohm: dict = field(default_factory=dict)
    wear_check: bool = True
    n_jobs: int = 1
    backend_url: str = None
    backend_token: str = None

    def __post_init__(self):
        if self.n_trials_per_selection < 1:
            raise ConfigError("n_trials_per_selection must be >= 1")
        if not 2 <= self.n_targets <= 28:
            raise ConfigError("n_targets must be in [2, 28]")
        if self.n_selections < 1 or self.n_subjects < 1 or self.training_reps < 2:
            raise ConfigError("n_selections and n_subjects must be >= 1, training_reps >= 2")
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.transport not in TRANSPORTS:
            raise ConfigError(f"transport must be one of {TRANSPORTS}, got {self.transport!r}")
        if self.aggregation not in ("mean_scores", "average_epochs"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if min(self.training_gap_s, self.inter_trial_gap_s, self.preroll_s) < 0:
            raise ConfigError("gaps must be non-negative")

    @classmethod
    def from_toml(cls, source):
        """Read an ``[experiment]`` table (or a flat document) of config fields."""
        cfg = load_config(source)
        cfg = cfg.get("experiment", cfg)
        known = {f.name for f in fields(cls)}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys {sorted(unknown)}")
        return cls(**cfg)

    def to_dict(self):
        out = asdict(self)
        out["snr_db"] = _json_float(self.snr_db)
        out.pop("backend_token")
        return out

    @property
    def code(self):
        return base_code(self.code_variant)


@dataclass
class ExperimentReport:
    """Aggregated outcome of one experiment; ``timing`` is kept apart because it is not reproducible."""

    config: dict
    n_targets: int
    n_trials_per_selection: int
    per_subject_accuracy: list
    accuracy: float
    se: float
    dti_s: float
    itr_bits_per_min: float
    confusion: list
    n_selections: int
    n_skipped: int
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing=True):
        out = asdict(self)
        if not include_timing:
            out.pop("timing")
        return out

    def to_json(self, include_timing=True):
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2)

    def published_reference(self):
        """Published accuracy and SE for the matching grid cell, or None."""
        return PUBLISHED_REFERENCE["accuracy"].get((self.n_targets, self.n_trials_per_selection))


def _json_float(x):
    return str(x) if isinstance(x, float) and not math.isfinite(x) else x


def subject_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def make_subject(config, index):
    return SubjectModel(rng_seed=subject_seed(config.seed, index), snr_db=config.snr_db,
                        impedances_kohm=dict(config.impedances_kohm), drift=config.drift)


def make_decoder(config):
    if config.algo == "TRCA":
        return TRCA(gamma=config.gamma, fs_hz=FS_HZ)
    return TDCA(n_delays=config.n_delays, n_components=config.n_components, gamma=config.gamma, fs_hz=FS_HZ)


def _samples(seconds):
    return int(round(seconds * FS_HZ))


def _run_session(config, subject, segments):
    """Stream one scripted session and return ``[(tag, Epoch or exception)]`` in onset order.

    Trial tags are their position in ``segments``. The first ``preroll_s``
    of data gates the session on electrode contact.
    """
    source = SessionSource(subject, segments, config.code, FS_HZ, config.floor_vrms)
    pipe = Pipeline(FS_HZ)
    for i, onset in enumerate(source.onsets):
        pipe.expect(onset, i)
    need = _samples(config.preroll_s) if config.wear_check else 0
    preroll, seen = [], 0
    out = []
    records = stream_records(source, config.transport, config.samples_per_packet, config.pacing)
    with closing(records):
        for rec in records:
            if seen < need and isinstance(rec, SampleChunk):
                preroll.append(rec)
                seen += rec.n_samples
                if seen >= need:
                    report = wear_state(preroll)
                    if "Poor" in report.values():
                        raise WearError(report)
            out.extend(pipe.consume(rec))
    return out


def training_schedule(config, rng):
    """Segments for a calibration session: preroll, then every target once per rep in shuffled order."""
    code = config.code
    lags = target_codes(code, config.n_targets).target_lags
    n_trials = config.training_reps * config.n_targets
    total = n_trials * code.trial_duration_s + (n_trials - 1) * config.training_gap_s
    if total > config.training_budget_s + 1e-9:
        raise ConfigError(f"training needs {total:.2f} s, budget is {config.training_budget_s} s")
    segments = [("gap", _samples(config.preroll_s))] if config.preroll_s else []
    labels = []
    for rep in range(config.training_reps):
        for k in rng.permutation(config.n_targets):
            if labels and config.training_gap_s:
                segments.append(("gap", _samples(config.training_gap_s)))
            segments.append(("trial", int(lags[k])))
            labels.append(int(k))
    return segments, labels, lags


def run_training_session(config, subject, backend=None, user_id=None, rng=None):
    """Record a labeled calibration session through the full pipeline and fit a decoder.

    Parameters
    ----------
    config : ExperimentConfig
    subject : SubjectModel
    backend : TemplateClient, optional
        When given, the trained model is stored under ``user_id``.

    Returns
    -------
    TRCA or TDCA
    """
    rng = np.random.default_rng([subject.rng_seed, 7]) if rng is None else rng
    segments, labels, lags = training_schedule(config, rng)
    results = _run_session(config, subject, segments)
    X, y = [], []
    for i, ep in results:
        if isinstance(ep, Exception):
            continue
        X.append(ep.data)
        y.append(labels[i])
    model = make_decoder(config).fit(np.stack(X), np.asarray(y), lags=lags, code=config.code)
    if backend is not None:
        backend.put_model(user_id or f"subject-{subject.rng_seed}", model)
    return model


def check_compatible(model, config):
    if model.code_hash_ != config.code.content_hash():
        raise ConfigError("model was trained on a different stimulation code")
    if model.montage_hash_ != montage_hash():
        raise ConfigError("model was trained on a different electrode montage")
    if model.classes_.size != config.n_targets:
        raise ConfigError(f"model has {model.classes_.size} classes, config wants {config.n_targets}")


def selection_schedule(config, rng):
    lags = target_codes(config.code, config.n_targets).target_lags
    targets = rng.permutation(np.resize(np.arange(config.n_targets), config.n_selections))
    gap = _samples(config.inter_trial_gap_s)
    segments = [("gap", _samples(config.preroll_s))] if config.preroll_s else []
    owner = []
    for s, k in enumerate(targets):
        for _ in range(config.n_trials_per_selection):
            if owner and gap:
                segments.append(("gap", gap))
            segments.append(("trial", int(lags[k])))
            owner.append(s)
    return segments, targets, owner


def run_selections(model, config, subject, rng=None):
    """Decode a block of selections; returns per-subject tallies."""
    check_compatible(model, config)
    rng = np.random.default_rng([subject.rng_seed, 11]) if rng is None else rng
    segments, targets, owner = selection_schedule(config, rng)
    results = _run_session(config, subject, segments)
    by_sel = [[] for _ in targets]
    bad = set()
    for i, ep in results:
        if isinstance(ep, Exception):
            bad.add(owner[i])
        else:
            by_sel[owner[i]].append(ep.data)
    confusion = np.zeros((config.n_targets, config.n_targets), dtype=np.int64)
    latencies = []
    for s, k in enumerate(targets):
        if s in bad or len(by_sel[s]) != config.n_trials_per_selection:
            continue
        t0 = time.perf_counter()
        decision = model.predict_selection(by_sel[s], config.aggregation).decision
        latencies.append(time.perf_counter() - t0)
        confusion[k, int(model.classes_[decision])] += 1
    return {"confusion": confusion, "skipped": len(targets) - int(confusion.sum()), "latencies": latencies}


def _run_subject(config, index):
    subject = make_subject(config, index)
    backend = None
    if config.backend_url:
        from ..backend import TemplateClient
        backend = TemplateClient(config.backend_url, config.backend_token)
    user = f"subject-{index:03d}"
    model = run_training_session(config, subject, backend, user)
    if backend is not None:
        model = backend.get_model(user)
    return run_selections(model, config, subject)


def run_experiment(config):
    """Train and test every subject, then reduce to an :class:`ExperimentReport`."""
    t0 = time.perf_counter()
    indices = range(config.n_subjects)
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(lambda i: _run_subject(config, i), indices))
    else:
        results = [_run_subject(config, i) for i in indices]

    confusion = sum(r["confusion"] for r in results)
    per_subject = []
    for r in results:
        n = int(r["confusion"].sum())
        per_subject.append(float(np.trace(r["confusion"]) / n) if n else float("nan"))
    acc = np.array([a for a in per_subject if not math.isnan(a)])
    mean = float(acc.mean()) if acc.size else float("nan")
    se = float(acc.std(ddof=1) / math.sqrt(acc.size)) if acc.size > 1 else 0.0
    t_sel = dti(config.n_trials_per_selection, config.code)
    try:
        rate = itr(config.n_targets, min(mean, 1.0), t_sel)
    except DomainError:
        rate = 0.0  # below chance carries no information
    lat = np.concatenate([r["latencies"] for r in results]) * 1e6 if results else np.zeros(0)
    timing = {"wall_s": time.perf_counter() - t0}
    if lat.size:
        timing.update(latency_median_us=float(np.median(lat)), latency_p99_us=float(np.percentile(lat, 99)),
                      latency_max_us=float(lat.max()))
    return ExperimentReport(
        config=config.to_dict(), n_targets=config.n_targets,
        n_trials_per_selection=config.n_trials_per_selection,
        per_subject_accuracy=[_json_float(a) for a in per_subject], accuracy=_json_float(mean), se=se,
        dti_s=t_sel, itr_bits_per_min=rate, confusion=confusion.tolist(),
        n_selections=int(confusion.sum()), n_skipped=int(sum(r["skipped"] for r in results)), timing=timing)


def format_reference(report):
    """One line comparing a measured report to the published result for the same grid cell."""
    ref = report.published_reference()
    head = (f"{report.n_targets} targets x {report.n_trials_per_selection} trials: "
            f"measured {100 * report.accuracy:.2f}% +/- {100 * report.se:.2f}, "
            f"ITR {report.itr_bits_per_min:.1f} bit/min, DTI {report.dti_s:.2f} s")
    if ref is None:
        return head + " | published: no matching configuration"
    return head + (f" | published {100 * ref[0]:.2f}% +/- {100 * ref[1]:.2f}, "
                   f"ITR {PUBLISHED_REFERENCE['itr_bits_per_min']:g}, DTI {PUBLISHED_REFERENCE['dti_s']} s")


def with_grid_cell(config, n_targets, n_trials):
    return replace(config, n_targets=n_targets, n_trials_per_selection=n_trials)
