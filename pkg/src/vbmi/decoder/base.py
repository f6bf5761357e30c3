"""Shared decoder machinery: score vectors, aggregation, input validation."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import EmptyInputError, InsufficientDataError, ShapeError


@dataclass
class ScoreVector:
    scores: np.ndarray
    decision: int
    margin: float
    tie: bool

    @classmethod
    def from_scores(cls, scores):
        scores = np.asarray(scores, dtype=float)
        decision = int(np.argmax(scores))  # lowest index wins ties
        if scores.size > 1:
            top2 = np.sort(scores)[-2:]
            margin = float(top2[1] - top2[0])
            tie = bool(np.sum(scores == scores[decision]) > 1)
        else:
            margin, tie = float("inf"), False
        return cls(scores, decision, margin, tie)


def aggregate_trials(score_vectors):
    """Average per-class scores over repeated trials and decide."""
    score_vectors = list(score_vectors)
    if not score_vectors:
        raise EmptyInputError("no score vectors to aggregate")
    k = {sv.scores.size for sv in score_vectors}
    if len(k) != 1:
        raise ShapeError(f"score vectors disagree on class count: {sorted(k)}")
    return ScoreVector.from_scores(np.mean([sv.scores for sv in score_vectors], axis=0))


def check_epochs(X, n_channels=None, n_samples=None):
    """Validate a (n_trials, n_channels, n_samples) stack; a single 2-D epoch is promoted."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeError(f"epochs must be (n_trials, n_channels, n_samples), got shape {X.shape}")
    X = check_array(X, allow_nd=True, dtype=np.float64, ensure_min_samples=1)
    if n_channels is not None and (X.shape[1], X.shape[2]) != (n_channels, n_samples):
        raise ShapeError(f"epoch shape {X.shape[1:]} does not match model ({n_channels}, {n_samples})")
    return X


def check_training_set(X, y, min_per_class=2):
    X = check_epochs(X)
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"{X.shape[0]} epochs but {y.shape} labels")
    classes, counts = np.unique(y, return_counts=True)
    if np.any(counts < min_per_class):
        bad = classes[counts < min_per_class]
        raise InsufficientDataError(f"classes {bad.tolist()} have fewer than {min_per_class} trials")
    return X, y, classes


class TemplateDecoder(ClassifierMixin, BaseEstimator):
    """Common scoring API for template-matching decoders.

    Subclasses implement ``fit`` and ``_scores(epoch) -> ndarray``.
    """

    algo = None

    def decision_function(self, X):
        """Per-class correlation scores, shape (n_trials, n_classes)."""
        check_is_fitted(self, "classes_")
        X = check_epochs(X, self.n_channels_, self.n_samples_)
        return np.stack([self._scores(x) for x in X])

    def transform(self, X):
        return self.decision_function(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def score_epoch(self, epoch):
        """Score one (n_channels, n_samples) epoch."""
        check_is_fitted(self, "classes_")
        epoch = np.asarray(epoch, dtype=float)
        if epoch.shape != (self.n_channels_, self.n_samples_):
            raise ShapeError(f"epoch shape {epoch.shape} does not match model "
                             f"({self.n_channels_}, {self.n_samples_})")
        return ScoreVector.from_scores(self._scores(epoch))

    def predict_selection(self, epochs, mode="mean_scores"):
        """Decide one selection from repeated trials of the same target.

        ``mode="mean_scores"`` scores each trial and averages correlations;
        ``mode="average_epochs"`` averages the trials first and scores once.
        """
        epochs = [np.asarray(e, dtype=float) for e in epochs]
        if not epochs:
            raise EmptyInputError("selection has no trials")
        if mode == "mean_scores":
            return aggregate_trials(self.score_epoch(e) for e in epochs)
        if mode == "average_epochs":
            return self.score_epoch(np.mean(epochs, axis=0))
        raise ValueError(f"unknown aggregation mode {mode!r}")

    @property
    def meta(self):
        check_is_fitted(self, "classes_")
        return {
            "algo": self.algo,
            "fs_hz": float(self.fs_hz),
            "n_samples": int(self.n_samples_),
            "n_classes": int(self.classes_.size),
            "n_delays": int(getattr(self, "n_delays", 0)),
            "n_components": int(getattr(self, "n_components", 1)),
            "montage_hash": int(self.montage_hash_),
            "code_hash": int(self.code_hash_),
            "lags": [int(v) for v in self.lags_],
        }
