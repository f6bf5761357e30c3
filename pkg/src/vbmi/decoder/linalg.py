"""Symmetric-definite generalized eigenproblems and correlation helpers."""

import numpy as np
from scipy import linalg

from ..exceptions import NumericalError


def fix_sign(v):
    """Flip columns so each one's largest-magnitude entry is positive."""
    v = np.atleast_2d(v.T).T
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def generalized_eigh(a, b):
    """Solve ``a v = lambda b v`` for symmetric ``a`` and positive-definite ``b``.

    ``b`` is Cholesky-factored as ``L L^T``; the whitened matrix
    ``L^-1 a L^-T`` is diagonalized and the eigenvectors mapped back.

    Returns
    -------
    evals : ndarray, shape (n,)
        Descending eigenvalues.
    evecs : ndarray, shape (n, n)
        Matching eigenvectors as unit-norm columns, sign-normalized.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        low = linalg.cholesky(b, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("right-hand matrix is not positive definite") from exc
    tmp = linalg.solve_triangular(low, a, lower=True)
    c = linalg.solve_triangular(low, tmp.T, lower=True)
    c = 0.5 * (c + c.T)
    evals, u = np.linalg.eigh(c)
    v = linalg.solve_triangular(low, u, lower=True, trans="T")
    order = np.argsort(evals)[::-1]
    evals, v = evals[order], v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    return evals, fix_sign(v)


def principal_generalized_eigvec(a, b):
    evals, v = generalized_eigh(a, b)
    return evals[0], v[:, 0]


def rayleigh_quotient(w, a, b):
    return float(w @ a @ w) / float(w @ b @ w)


def pearson(a, b):
    """Pearson correlation of two arrays after flattening; 0 when either is constant."""
    a = np.ravel(a) - np.mean(a)
    b = np.ravel(b) - np.mean(b)
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den == 0.0:
        return 0.0
    return float(np.dot(a, b) / den)


def normalized(x):
    """Flattened, centered, unit-norm copy (zeros when constant) for fast correlation."""
    x = np.ravel(x) - np.mean(x)
    n = np.linalg.norm(x)
    return x / n if n > 0 else x
