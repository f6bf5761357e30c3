import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("vbmi", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vbmi")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def synthetic_training_set(snr_db=0.0, n_targets=7, reps=3, seed=3):
    """Raw synthetic trials (no transport) for decoder tests."""
    from vbmi.codebook import base_code, target_codes
    from vbmi.synth import SubjectModel, generate_trial

    subject = SubjectModel(rng_seed=seed, snr_db=snr_db)
    lags = target_codes(base_code(), n_targets).target_lags
    X, y = [], []
    for _ in range(reps):
        for k, lag in enumerate(lags):
            X.append(generate_trial(subject, lag))
            y.append(k)
    X = np.stack(X)
    return X - X.mean(axis=2, keepdims=True), np.array(y), lags, subject


@pytest.fixture(scope="session")
def trained_models():
    from vbmi.decoder import TDCA, TRCA

    X, y, lags, _ = synthetic_training_set()
    return {"TRCA": TRCA().fit(X, y, lags=lags), "TDCA": TDCA().fit(X, y, lags=lags), "X": X, "y": y}
