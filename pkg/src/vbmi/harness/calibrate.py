"""Bisection on subject SNR to hit a target closed-loop accuracy."""

from dataclasses import replace

from ..exceptions import CalibrationError, ConfigError, DomainError
from .experiment import run_experiment

MIN_SELECTIONS = 200


def calibrate_snr(target_accuracy, config, tolerance=0.03, bounds_db=(-25.0, 5.0), max_iter=12,
                  n_targets=7, n_trials=2, history=None):
    """Find an SNR at which ``n_targets``/``n_trials`` accuracy is within ``tolerance`` of the target.

    The result is written to ``config.snr_db`` and returned. ``history``, if
    a list, receives ``(snr_db, accuracy)`` for every evaluation.
    """
    if not 1.0 / n_targets < target_accuracy < 1.0:
        raise DomainError(f"target accuracy must lie in (1/{n_targets}, 1), got {target_accuracy}")
    if config.n_subjects * config.n_selections < MIN_SELECTIONS:
        raise ConfigError(f"calibration needs >= {MIN_SELECTIONS} selections, config gives "
                          f"{config.n_subjects * config.n_selections}")
    history = [] if history is None else history
    probe = replace(config, n_targets=n_targets, n_trials_per_selection=n_trials)

    def accuracy(snr):
        acc = run_experiment(replace(probe, snr_db=snr)).accuracy
        history.append((snr, acc))
        return acc

    lo, hi = bounds_db
    if accuracy(hi) < target_accuracy - tolerance:
        raise CalibrationError(f"accuracy at {hi} dB is below target {target_accuracy}")
    if accuracy(lo) > target_accuracy + tolerance:
        raise CalibrationError(f"accuracy at {lo} dB already exceeds target {target_accuracy}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        acc = accuracy(mid)
        if abs(acc - target_accuracy) <= tolerance:
            config.snr_db = mid
            return mid
        if acc < target_accuracy:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"no SNR in {bounds_db} dB reached {target_accuracy} +/- {tolerance} "
                           f"within {max_iter} steps")
