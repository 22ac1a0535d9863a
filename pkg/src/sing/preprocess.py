"""Centering, standardization, symmetric matrix powers and whitening.

Data matrices are ``n x p`` with subjects in rows and features in columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceWarning,
    DegenerateInputError,
    DomainError,
    InvalidInputError,
)

__all__ = [
    "Whitener",
    "check_data",
    "double_center",
    "standardize_iterative",
    "matrix_power",
    "whiten",
]

# relative to the largest eigenvalue
DEFAULT_EIGEN_RTOL = 1e-10


def check_data(data, name="data"):
    """Validate a subjects-by-features matrix and return it as float64."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got shape {x.shape}")
    n, p = x.shape
    if n < 3 or p < 2:
        raise InvalidInputError(f"{name} needs n >= 3 rows and p >= 2 columns, got {n}x{p}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return x


def double_center(data):
    """Remove row means and column means so that every margin sums to zero.

    Parameters
    ----------
    data : array_like, shape (n, p)

    Returns
    -------
    ndarray, shape (n, p)
        ``C_n X C_p`` where ``C_k`` is the k x k centering projector.
    """
    x = check_data(data)
    scale = np.max(np.abs(x))
    if scale == 0 or np.ptp(x) <= 1e-14 * scale:
        raise DegenerateInputError("cannot double-center a constant matrix")
    xc = x - x.mean(axis=1, keepdims=True)
    xc = xc - xc.mean(axis=0, keepdims=True)
    return xc


def standardize_iterative(data, tol=1e-6, max_iter=50):
    """Alternate column standardization and row centering until both hold.

    Each pass scales every feature to mean 0 and sample variance 1 across
    subjects, then subtracts each subject's mean over features. Iteration
    stops once ``max |column variance - 1| < tol`` after the row-centering
    step.

    Parameters
    ----------
    data : array_like, shape (n, p)
    tol : float
        Stopping tolerance on column variances.
    max_iter : int
        Maximum number of passes. A :class:`ConvergenceWarning` carrying
        the final deviation is issued if it is reached.

    Returns
    -------
    ndarray, shape (n, p)
    """
    x = check_data(data)
    sd = x.std(axis=0, ddof=1)
    flat = np.flatnonzero(sd <= 1e-12 * max(1.0, np.max(np.abs(x))))
    if flat.size:
        raise DegenerateInputError(f"column {int(flat[0])} is constant across subjects")

    dev = np.inf
    for _ in range(max_iter):
        x = x - x.mean(axis=0, keepdims=True)
        sd = x.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise DegenerateInputError(
                f"column {int(np.flatnonzero(sd == 0)[0])} became constant during standardization"
            )
        x = x / sd
        x = x - x.mean(axis=1, keepdims=True)
        dev = np.max(np.abs(x.var(axis=0, ddof=1) - 1.0))
        if dev < tol:
            return x
    warnings.warn(
        f"standardization did not reach tol={tol:g} in {max_iter} passes "
        f"(max column variance deviation {dev:.3e})",
        ConvergenceWarning,
        stacklevel=2,
    )
    return x


def matrix_power(m, exponent, eigen_tol=None):
    """Real power of a symmetric matrix through its eigendecomposition.

    Eigenvalues at or below ``eigen_tol`` are treated as exact zeros and map
    to 0 for every exponent, so negative exponents give the generalized
    inverse power and exponent 0 gives the projector onto the retained
    eigenspace.

    Parameters
    ----------
    m : array_like, shape (k, k)
        Symmetric matrix.
    exponent : float
    eigen_tol : float, optional
        Absolute eigenvalue cutoff. Defaults to ``1e-10 * max|eigenvalue|``.

    Returns
    -------
    ndarray, shape (k, k)
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"matrix_power needs a square matrix, got shape {a.shape}")
    norm = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > 1e-8 * norm:
        raise InvalidInputError("matrix_power needs a symmetric matrix")
    vals, vecs = np.linalg.eigh((a + a.T) / 2)
    if eigen_tol is None:
        eigen_tol = DEFAULT_EIGEN_RTOL * np.max(np.abs(vals)) if vals.size else 0.0
    keep = vals > eigen_tol
    if float(exponent) != int(exponent) and np.any(vals < -eigen_tol):
        raise DomainError(
            f"fractional power {exponent} of a matrix with negative eigenvalue {vals.min():.3e}"
        )
    powered = np.zeros_like(vals)
    powered[keep] = vals[keep] ** exponent
    if float(exponent) == int(exponent):
        neg = vals < -eigen_tol
        powered[neg] = vals[neg] ** int(exponent)
    return (vecs * powered) @ vecs.T


@dataclass
class Whitener:
    """Whitening transform of a centered data matrix.

    Attributes
    ----------
    whitening : ndarray, shape (n, n)
        Inverse square root of the subject covariance (generalized).
    inverse : ndarray, shape (n, n)
        Square root of the subject covariance; maps unmixing rows to scores.
    whitened : ndarray, shape (n, p)
        ``whitening @ data``.
    basis : ndarray, shape (n, eigen_rank)
        Orthonormal basis of the retained eigenspace.
    eigenvalues : ndarray, shape (eigen_rank,)
        Retained covariance eigenvalues in descending order.
    eigen_tol : float
        Absolute cutoff that was applied.
    divisor : str
        ``"p"`` or ``"p-1"``, the covariance normalization.
    """

    whitening: np.ndarray
    inverse: np.ndarray
    whitened: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    eigen_tol: float
    divisor: str = "p"

    @property
    def eigen_rank(self):
        return self.basis.shape[1]

    @property
    def projector(self):
        return self.basis @ self.basis.T


def whiten(data, divisor="p", eigen_rtol=DEFAULT_EIGEN_RTOL):
    """Whiten centered data with the subject covariance ``X X^T / p``.

    Parameters
    ----------
    data : array_like, shape (n, p)
        Double-centered (or at least row-centered) data.
    divisor : {"p", "p-1"}
        Covariance normalization. ``"p-1"`` reproduces the unbiased variant.
    eigen_rtol : float
        Eigenvalues below ``eigen_rtol * largest`` are treated as zero.

    Returns
    -------
    Whitener
    """
    x = check_data(data)
    if divisor not in ("p", "p-1"):
        raise InvalidInputError(f"divisor must be 'p' or 'p-1', got {divisor!r}")
    p = x.shape[1]
    denom = p if divisor == "p" else p - 1
    cov = x @ x.T / denom
    cov = (cov + cov.T) / 2
    vals, vecs = np.linalg.eigh(cov)
    top = vals[-1]
    if top <= 0:
        raise DegenerateInputError("data has zero covariance")
    tol = eigen_rtol * top
    keep = vals > tol
    rank = int(keep.sum())
    if rank < 2:
        raise DegenerateInputError(f"whitening needs rank >= 2, data has rank {rank}")
    order = np.argsort(vals[keep])[::-1]
    lam = vals[keep][order]
    basis = vecs[:, keep][:, order]
    whitening = (basis / np.sqrt(lam)) @ basis.T
    inverse = (basis * np.sqrt(lam)) @ basis.T
    return Whitener(
        whitening=whitening,
        inverse=inverse,
        whitened=whitening @ x,
        basis=basis,
        eigenvalues=lam,
        eigen_tol=float(tol),
        divisor=divisor,
    )
