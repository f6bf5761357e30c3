"""Task-related component analysis with ensemble spatial filters."""

import numpy as np

from ..codebook import base_code
from ..protocol.montage import montage_hash
from .base import TemplateDecoder, check_training_set
from .linalg import generalized_eigh, normalized


def trca_matrices(trials):
    """Inter-trial covariance ``S`` and total covariance ``Q`` of one class.

    ``trials`` is (n_trials, n_channels, n_samples); each trial is centered
    per channel first. ``S`` sums ``X_i X_j^T`` over ordered pairs i != j.
    """
    X = trials - trials.mean(axis=2, keepdims=True)
    total = X.sum(axis=0)
    Q = np.einsum("ict,idt->cd", X, X)
    S = total @ total.T - Q
    return 0.5 * (S + S.T), Q


class TRCA(TemplateDecoder):
    """Task-related component analysis decoder.

    One spatial filter per class maximizes the covariance between repeated
    trials of that class relative to their total variance. All class filters
    are stacked into an ensemble ``W`` that projects both the test epoch and
    every class template before Pearson correlation.

    Parameters
    ----------
    gamma : float
        Ridge added to ``Q`` as ``gamma * trace(Q) / n_channels``.
    fs_hz : float
        Sampling rate recorded in the model metadata.

    Attributes
    ----------
    filters_ : ndarray, shape (n_channels, n_classes)
        Unit-norm spatial filters, one column per class.
    templates_ : ndarray, shape (n_classes, n_channels, n_samples)
        Class-mean epochs.
    eigenvalues_ : ndarray, shape (n_classes,)
        Principal generalized eigenvalue per class.
    """

    algo = "TRCA"

    def __init__(self, gamma=1e-6, fs_hz=250.0):
        self.gamma = gamma
        self.fs_hz = fs_hz

    def fit(self, X, y, lags=None, code=None, montage=None):
        X, y, classes = check_training_set(X, y)
        n_ch = X.shape[1]
        filters = np.empty((n_ch, classes.size))
        evals = np.empty(classes.size)
        templates = np.empty((classes.size, n_ch, X.shape[2]))
        for k, c in enumerate(classes):
            trials = X[y == c]
            S, Q = trca_matrices(trials)
            Q = Q + self.gamma * np.trace(Q) / n_ch * np.eye(n_ch)
            lam, v = generalized_eigh(S, Q)
            filters[:, k] = v[:, 0]
            evals[k] = lam[0]
            templates[k] = trials.mean(axis=0)
        self.classes_ = classes
        self.filters_ = filters
        self.templates_ = templates
        self.eigenvalues_ = evals
        self.n_channels_, self.n_samples_ = X.shape[1:]
        self.lags_ = np.asarray(classes if lags is None else lags, dtype=np.int64)
        self.code_hash_ = (base_code() if code is None else code).content_hash()
        self.montage_hash_ = montage_hash() if montage is None else int(montage)
        self._prepare()
        return self

    def _prepare(self):
        W = self.filters_
        self._proj_templates = np.stack([normalized(W.T @ h) for h in self.templates_])

    def _scores(self, epoch):
        z = normalized(self.filters_.T @ epoch)
        return self._proj_templates @ z


def trca_train(epochs, labels, **kwargs):
    """Fit a :class:`TRCA` model from labeled epochs."""
    fit_kw = {k: kwargs.pop(k) for k in ("lags", "code", "montage") if k in kwargs}
    return TRCA(**kwargs).fit(epochs, labels, **fit_kw)


def trca_score(model, epoch):
    return model.score_epoch(epoch)
