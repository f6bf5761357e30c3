"""Task-discriminant component analysis over delay-embedded, reference-projected epochs."""

import numpy as np
from scipy import linalg

from ..codebook import base_code, code_waveform, target_codes
from ..exceptions import RankDeficientReferenceError, ShapeError
from ..protocol.montage import montage_hash
from .base import TemplateDecoder, check_training_set
from .linalg import generalized_eigh, normalized


def delay_embed(X, n_delays):
    """Stack ``X`` advanced by 0..n_delays samples, zero-padded at the tail.

    (n_channels, n_samples) -> (n_channels * (n_delays + 1), n_samples)
    """
    n_ch, n_t = X.shape[-2:]
    out = np.zeros(X.shape[:-2] + (n_ch * (n_delays + 1), n_t))
    for j in range(n_delays + 1):
        out[..., j * n_ch:(j + 1) * n_ch, :n_t - j] = X[..., j:]
    return out


def reference_basis(Y, tol=1e-10):
    """Orthonormal basis ``U`` (T x r) of the row space of ``Y`` so that ``P = U U^T``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    q, r = linalg.qr(Y.T, mode="economic")
    d = np.abs(np.diag(r))
    if d.size == 0 or d.min() <= tol * max(d.max(), 1e-300):
        raise RankDeficientReferenceError(f"reference of shape {Y.shape} is not full row rank")
    return q


def projection_matrix(Y):
    """``Y^T (Y Y^T)^-1 Y``, the orthogonal projector onto the row space of ``Y``."""
    U = reference_basis(Y)
    return U @ U.T


def code_references(lags, n_samples, fs_hz=250.0, code=None):
    """One-row bipolar code waveform per class lag."""
    code = base_code() if code is None else code
    duration = n_samples / fs_hz
    return [code_waveform(code, lag, fs_hz, duration)[None, :] for lag in lags]


class TDCA(TemplateDecoder):
    """Task-discriminant component analysis decoder.

    Each epoch is delay-embedded and concatenated in time with its projection
    onto the class reference, giving a (n_channels * (n_delays + 1), 2T)
    matrix. Discriminant filters maximize between-class over within-class
    scatter; templates are the filtered class means.

    Parameters
    ----------
    n_delays : int
        Number of sample delays stacked in the embedding.
    n_components : int
        Number of discriminant filters kept.
    gamma : float
        Within-class ridge, ``gamma * trace(S_w) / dim``.
    fs_hz : float
        Sampling rate recorded in model metadata and used for default references.
    """

    algo = "TDCA"

    def __init__(self, n_delays=5, n_components=4, gamma=1e-6, fs_hz=250.0):
        self.n_delays = n_delays
        self.n_components = n_components
        self.gamma = gamma
        self.fs_hz = fs_hz

    def fit(self, X, y, references=None, lags=None, code=None, montage=None):
        """Train filters and templates.

        Parameters
        ----------
        X : ndarray, shape (n_trials, n_channels, n_samples)
        y : ndarray, shape (n_trials,)
        references : list of ndarray, optional
            Per-class reference ``Y_k`` (r x n_samples), in sorted-class order.
            Defaults to the code waveform at each class lag.
        lags : sequence of int, optional
            Code lag per class; defaults to evenly spaced lags of the base code.
        code : CodeSequence, optional
        """
        X, y, classes = check_training_set(X, y)
        n_ch, n_t = X.shape[1:]
        dim = n_ch * (self.n_delays + 1)
        if not 1 <= self.n_components <= dim:
            raise ValueError(f"n_components must be in [1, {dim}]")
        code = base_code() if code is None else code
        if lags is None:
            lags = target_codes(code, classes.size).target_lags
        if references is None:
            references = code_references(lags, n_t, self.fs_hz, code)
        if len(references) != classes.size:
            raise ShapeError(f"{len(references)} references for {classes.size} classes")
        bases = []
        for Y in references:
            Y = np.atleast_2d(Y)
            if Y.shape[1] != n_t:
                raise ShapeError(f"reference length {Y.shape[1]} != epoch length {n_t}")
            bases.append(reference_basis(Y))

        means = np.empty((classes.size, dim, 2 * n_t))
        s_w = np.zeros((dim, dim))
        for k, c in enumerate(classes):
            aug = self._augment(delay_embed(X[y == c], self.n_delays), bases[k])
            means[k] = aug.mean(axis=0)
            resid = aug - means[k]
            s_w += np.einsum("idt,iet->de", resid, resid)
        s_w /= X.shape[0]
        centered = means - means.mean(axis=0)
        s_b = np.einsum("kdt,ket->de", centered, centered) / classes.size
        s_b = 0.5 * (s_b + s_b.T)
        s_w = 0.5 * (s_w + s_w.T) + self.gamma * np.trace(s_w) / dim * np.eye(dim)

        evals, v = generalized_eigh(s_b, s_w)
        W = v[:, :self.n_components]
        self.classes_ = classes
        self.filters_ = W
        self.eigenvalues_ = evals
        self.templates_ = np.einsum("dn,kdt->knt", W, means)
        self.references_ = [np.atleast_2d(np.asarray(Y, dtype=float)) for Y in references]
        self.scatter_between_ = s_b
        self.scatter_within_ = s_w
        self.n_channels_, self.n_samples_ = n_ch, n_t
        self.lags_ = np.asarray(lags, dtype=np.int64)
        self.code_hash_ = code.content_hash()
        self.montage_hash_ = montage_hash() if montage is None else int(montage)
        self._prepare()
        return self

    @staticmethod
    def _augment(embedded, basis):
        return np.concatenate([embedded, (embedded @ basis) @ basis.T], axis=-1)

    def _prepare(self):
        self._bases = [reference_basis(Y) for Y in self.references_]
        self._norm_templates = [normalized(h) for h in self.templates_]

    def projection(self, k):
        """Dense projector ``P_k`` for class index ``k``."""
        return self._bases[k] @ self._bases[k].T

    def _scores(self, epoch):
        wx = self.filters_.T @ delay_embed(epoch, self.n_delays)
        out = np.empty(len(self._bases))
        for k, (U, h) in enumerate(zip(self._bases, self._norm_templates)):
            z = np.concatenate([wx, (wx @ U) @ U.T], axis=1)
            out[k] = normalized(z) @ h
        return out


def tdca_train(epochs, labels, n_delays=5, n_components=4, references=None, **kwargs):
    """Fit a :class:`TDCA` model from labeled epochs."""
    fit_kw = {k: kwargs.pop(k) for k in ("lags", "code", "montage") if k in kwargs}
    model = TDCA(n_delays=n_delays, n_components=n_components, **kwargs)
    return model.fit(epochs, labels, references=references, **fit_kw)


def tdca_score(model, epoch):
    return model.score_epoch(epoch)
