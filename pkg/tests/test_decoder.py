import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from vbmi.codebook import base_code, target_codes
from vbmi.decoder import (TDCA, TRCA, ScoreVector, aggregate_trials, delay_embed, generalized_eigh,
                          infer_latency_probe, latency_profile, projection_matrix, rayleigh_quotient,
                          tdca_score, tdca_train, trca_matrices, trca_score, trca_train)
from vbmi.decoder.linalg import fix_sign
from vbmi.decoder.tdca import reference_basis
from vbmi.exceptions import (EmptyInputError, InsufficientDataError, NumericalError, RankDeficientReferenceError,
                             ShapeError)
from vbmi.synth import SubjectModel, generate_trial

from .conftest import synthetic_training_set
from .oracles import generalized_eig_dense, random_spd


def _sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


def test_generalized_eigh_vs_dense_oracle_500_pairs():
    rng = np.random.default_rng(11)
    for i in range(500):
        n = (2, 3)[i % 2]
        a, b = _sym(rng, n), random_spd(rng, n, cond=100)
        lam, v = generalized_eigh(a, b)
        lam_ref, v_ref = generalized_eig_dense(a, b)
        assert np.allclose(lam, lam_ref, rtol=0, atol=1e-8)
        assert np.all(np.diff(lam) <= 0)
        assert np.allclose(fix_sign(v_ref[:, :1])[:, 0], v[:, 0], rtol=0, atol=1e-6)
        assert np.allclose(a @ v, b @ v * lam, atol=1e-8)


def test_generalized_eigh_rejects_indefinite_rhs():
    with pytest.raises(NumericalError):
        generalized_eigh(np.eye(2), np.diag([1.0, -1.0]))


def test_fix_sign_convention():
    v = np.array([[0.1, -0.9], [-0.8, 0.2]])
    out = fix_sign(v)
    assert out[1, 0] == 0.8 and out[0, 1] == 0.9


def test_trca_identical_noiseless_trials_score_one():
    rng = np.random.default_rng(0)
    means = rng.standard_normal((3, 4, 280))
    X = np.concatenate([means + 1e-3 * rng.standard_normal((3, 4, 280)) for _ in range(3)])
    y = np.tile(np.arange(3), 3)
    model = TRCA().fit(X, y)
    noiseless = TRCA().fit(np.concatenate([means] * 3), y)
    for k in range(3):
        assert noiseless.score_epoch(means[k]).scores[k] == pytest.approx(1.0, abs=1e-9)
        assert trca_score(model, model.templates_[k]).scores[k] == pytest.approx(1.0, abs=1e-12)
        assert trca_score(model, -model.templates_[k]).scores[k] == pytest.approx(-1.0, abs=1e-12)
    assert np.allclose(np.linalg.norm(model.filters_, axis=0), 1.0)


def test_trca_two_channel_toy_matches_angle_grid():
    rng = np.random.default_rng(1)
    shared = np.sin(2 * np.pi * 7 * np.arange(280) / 250)
    trials = np.stack([np.vstack([shared + 0.1 * rng.standard_normal(280), rng.standard_normal(280)])
                       for _ in range(6)])
    model = TRCA().fit(np.concatenate([trials, trials[:, ::-1]]), np.repeat([0, 1], 6))
    w = model.filters_[:, 0]
    assert abs(w[0]) >= 0.99
    S, Q = trca_matrices(trials)
    Q = Q + model.gamma * np.trace(Q) / 2 * np.eye(2)
    theta = np.arange(3600) * np.pi / 3600
    grid = np.stack([np.cos(theta), np.sin(theta)])
    rq = np.einsum("in,ij,jn->n", grid, S, grid) / np.einsum("in,ij,jn->n", grid, Q, grid)
    best = grid[:, np.argmax(rq)]
    assert abs(best @ w) >= np.cos(np.pi / 3600)
    assert rayleigh_quotient(w, S, Q) >= rq.max() - 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_trca_beats_random_probes(seed):
    X, y, lags, _ = synthetic_training_set(snr_db=-5.0, seed=seed)
    model = TRCA().fit(X, y, lags=lags)
    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((1000, 7))
    for k in range(7):
        S, Q = trca_matrices(X[y == k])
        Q = Q + model.gamma * np.trace(Q) / 7 * np.eye(7)
        best = rayleigh_quotient(model.filters_[:, k], S, Q)
        assert best == pytest.approx(model.eigenvalues_[k], rel=1e-9)
        assert all(best >= rayleigh_quotient(p, S, Q) for p in probes)


def test_trca_validation_and_determinism(trained_models):
    X, y = trained_models["X"], trained_models["y"]
    with pytest.raises(InsufficientDataError):
        TRCA().fit(X[:8], y[:8])
    with pytest.raises(ShapeError):
        TRCA().fit(X, y[:-1])
    with pytest.raises(ShapeError):
        trained_models["TRCA"].score_epoch(np.zeros((7, 279)))
    with pytest.raises(ShapeError):
        trained_models["TRCA"].decision_function(np.zeros((2, 6, 280)))
    a, b = TRCA().fit(X, y), TRCA().fit(X.copy(), y.copy())
    assert np.array_equal(a.filters_, b.filters_) and np.array_equal(a.templates_, b.templates_)


def test_trca_snr5_true_class_wins_on_average():
    X, y, lags, _ = synthetic_training_set(snr_db=5.0)
    model = trca_train(X, y, lags=lags)
    subject = SubjectModel(rng_seed=99, snr_db=5.0)
    true, other = [], []
    for i in range(100):
        k = i % 7
        s = model.score_epoch(generate_trial(subject, lags[k])).scores
        true.append(s[k])
        other.extend(np.delete(s, k))
    assert np.mean(true) > np.mean(other)


def test_sklearn_api(trained_models):
    X, y = trained_models["X"], trained_models["y"]
    model = trained_models["TRCA"]
    assert model.get_params() == {"gamma": 1e-6, "fs_hz": 250.0}
    assert clone(trained_models["TDCA"]).get_params()["n_delays"] == 5
    assert model.predict(X).shape == (21,)
    assert model.score(X, y) == 1.0
    assert np.array_equal(model.transform(X), model.decision_function(X))
    assert model.meta["lags"] == [0, 4, 8, 12, 16, 20, 24]
    assert model.meta["code_hash"] == base_code().content_hash()


@given(st.floats(1e-6, 1e6), st.integers(0, 20))
def test_scale_invariance(trained_models, scale, idx):
    x = trained_models["X"][idx]
    for name in ("TRCA", "TDCA"):
        m = trained_models[name]
        a, b = m.score_epoch(x), m.score_epoch(scale * x)
        assert np.allclose(a.scores, b.scores, rtol=0, atol=1e-12)
        assert a.decision == b.decision


def test_delay_embed_and_projection():
    X = np.arange(12.0).reshape(2, 6)
    E = delay_embed(X, 2)
    assert E.shape == (6, 6)
    assert np.array_equal(E[2:4, :5], X[:, 1:]) and np.all(E[2:4, 5] == 0)
    assert np.array_equal(E[4:6, :4], X[:, 2:]) and np.all(E[4:6, 4:] == 0)
    Y = target_codes(base_code(), 7)
    from vbmi.codebook import code_waveform
    Yk = np.vstack([code_waveform(base_code(), 4, 250, 1.12), np.ones(280)])
    P = projection_matrix(Yk)
    assert np.allclose(P @ P, P, atol=1e-9) and np.allclose(P, P.T, atol=1e-12)
    assert np.allclose(P, Yk.T @ np.linalg.inv(Yk @ Yk.T) @ Yk, atol=1e-9)
    with pytest.raises(RankDeficientReferenceError):
        reference_basis(np.vstack([Yk[0], 2 * Yk[0]]))
    assert Y.n_targets == 7


def test_tdca_separable_limit():
    rng = np.random.default_rng(2)
    proto = rng.standard_normal((2, 4, 280))
    X = np.concatenate([proto + 0.01 * rng.standard_normal((2, 4, 280)) for _ in range(4)])
    y = np.tile([0, 1], 4)
    model = TDCA(n_delays=0, n_components=1).fit(X, y, lags=[0, 14])
    test = np.concatenate([proto + 0.01 * rng.standard_normal((2, 4, 280)) for _ in range(10)])
    assert np.mean(model.predict(test) == np.tile([0, 1], 10)) == 1.0


def test_tdca_model_invariants(trained_models):
    model = trained_models["TDCA"]
    assert model.filters_.shape == (42, 4) and model.templates_.shape == (7, 4, 560)
    for k in range(7):
        P = model.projection(k)
        assert np.allclose(P @ P, P, atol=1e-9)
    rng = np.random.default_rng(3)
    probes = rng.standard_normal((1000, 42))
    sb, sw = model.scatter_between_, model.scatter_within_
    top = model.eigenvalues_[0]
    assert rayleigh_quotient(model.filters_[:, 0], sb, sw) == pytest.approx(top, rel=1e-8)
    assert all(top >= rayleigh_quotient(p, sb, sw) for p in probes)


def test_tdca_class_mean_scores_highest(trained_models):
    model, X, y = trained_models["TDCA"], trained_models["X"], trained_models["y"]
    for k in range(7):
        assert tdca_score(model, X[y == k].mean(axis=0)).decision == k
    rng = np.random.default_rng(4)
    for _ in range(20):
        s = model.score_epoch(rng.standard_normal((7, 280))).scores
        assert np.all(s >= -1 - 1e-12) and np.all(s <= 1 + 1e-12)


def test_tdca_validation(trained_models):
    X, y = trained_models["X"], trained_models["y"]
    with pytest.raises(ValueError):
        TDCA(n_components=43).fit(X, y)
    with pytest.raises(ShapeError):
        TDCA().fit(X, y, references=[np.ones((1, 280))] * 6)
    with pytest.raises(ShapeError):
        TDCA().fit(X, y, references=[np.ones((1, 279))] * 7)
    with pytest.raises(RankDeficientReferenceError):
        TDCA().fit(X, y, references=[np.zeros((1, 280))] * 7)
    with pytest.raises(InsufficientDataError):
        TDCA().fit(X[:7], y[:7])


def test_tdca_tracks_trca_at_snr5():
    X, y, lags, _ = synthetic_training_set(snr_db=5.0)
    trca, tdca = trca_train(X, y, lags=lags), tdca_train(X, y, lags=lags)
    subject = SubjectModel(rng_seed=123, snr_db=5.0)
    hits = {"trca": 0, "tdca": 0}
    for i in range(200):
        k = i % 7
        x = generate_trial(subject, lags[k])
        x = x - x.mean(axis=1, keepdims=True)
        hits["trca"] += trca.score_epoch(x).decision == k
        hits["tdca"] += tdca.score_epoch(x).decision == k
    assert hits["tdca"] / 200 >= hits["trca"] / 200 - 0.05


def test_aggregate_examples():
    v = ScoreVector.from_scores([0.1, 0.5, -0.2])
    assert np.array_equal(aggregate_trials([v]).scores, v.scores) and aggregate_trials([v]).decision == 1
    neg = ScoreVector.from_scores(-v.scores)
    out = aggregate_trials([v, neg])
    assert np.all(out.scores == 0) and out.decision == 0 and out.tie
    peaks = [ScoreVector.from_scores(np.r_[np.zeros(5), 0.9 - 0.1 * i, 0.3 * i * np.ones(1)]) for i in range(3)]
    agg = aggregate_trials(peaks)
    assert agg.decision == 5 and agg.margin >= min(p.margin for p in peaks)
    with pytest.raises(EmptyInputError):
        aggregate_trials([])
    with pytest.raises(ShapeError):
        aggregate_trials([v, ScoreVector.from_scores([1.0, 2.0])])


def test_predict_selection_modes(trained_models):
    model, X = trained_models["TRCA"], trained_models["X"]
    a = model.predict_selection([X[0], X[7]], "mean_scores")
    manual = aggregate_trials([model.score_epoch(X[0]), model.score_epoch(X[7])])
    assert np.array_equal(a.scores, manual.scores)
    b = model.predict_selection([X[0], X[7]], "average_epochs")
    assert np.array_equal(b.scores, model.score_epoch((X[0] + X[7]) / 2).scores)
    with pytest.raises(ValueError):
        model.predict_selection([X[0]], "vote")
    with pytest.raises(EmptyInputError):
        model.predict_selection([])


@pytest.mark.parametrize("name", ["TRCA", "TDCA"])
def test_latency_budget(trained_models, name):
    model, X = trained_models[name], trained_models["X"]
    assert infer_latency_probe(model, X[:2]) > 0
    prof = latency_profile(model, X[:2], n_iter=1000)
    assert prof["median_us"] <= 10_000
    assert prof["p99_us"] <= 3 * prof["median_us"]
