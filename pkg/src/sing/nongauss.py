"""Jarque-Bera type non-Gaussianity measures and component sign conventions."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

__all__ = [
    "jb_statistic",
    "jb_total",
    "jb_rows",
    "jb_gradient",
    "skewness",
    "sign_normalize",
]

DEFAULT_ALPHA = 0.8

_MEAN_TOL = 1e-8
_VAR_TOL = 1e-6


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")


def _check_standardized(s, row=None):
    where = "" if row is None else f" (row {row})"
    var = np.mean(s * s) - np.mean(s) ** 2
    if var <= 0:
        raise DegenerateInputError(f"component has zero variance{where}")
    if abs(np.mean(s)) > _MEAN_TOL * max(1.0, np.sqrt(var)) or abs(var - 1) > _VAR_TOL:
        raise InvalidInputError(
            f"component must have mean 0 and variance 1{where}; "
            f"got mean {np.mean(s):.3e}, variance {var:.8f}"
        )


def jb_rows(S, alpha=DEFAULT_ALPHA):
    """JB value of every row of ``S`` without any standardization checks."""
    S = np.atleast_2d(S)
    S2 = S * S
    m3 = np.mean(S2 * S, axis=1)
    m4 = np.mean(S2 * S2, axis=1)
    return alpha * m3**2 + (1 - alpha) * (m4 - 3) ** 2


def jb_statistic(s, alpha=DEFAULT_ALPHA):
    """Weighted squared skewness plus squared excess kurtosis of a standardized vector.

    ``alpha * mean(s**3)**2 + (1 - alpha) * (mean(s**4) - 3)**2``. The
    vector must already have mean 0 and (population) variance 1.
    """
    _check_alpha(alpha)
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1:
        raise InvalidInputError(f"expected a vector, got shape {s.shape}")
    _check_standardized(s)
    return float(jb_rows(s, alpha)[0])


def jb_total(S, alpha=DEFAULT_ALPHA, check=True):
    """Sum of JB statistics over the rows of a component matrix."""
    _check_alpha(alpha)
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if check:
        for i, row in enumerate(S):
            _check_standardized(row, row=i)
    return float(np.sum(jb_rows(S, alpha)))


def jb_gradient(u, Xw, alpha=DEFAULT_ALPHA):
    """Gradient of ``f(u @ Xw)`` with respect to ``u``.

    Parameters
    ----------
    u : ndarray, shape (n,)
    Xw : ndarray, shape (n, p)
    alpha : float

    Returns
    -------
    ndarray, shape (n,)
    """
    u = np.asarray(u, dtype=np.float64)
    Xw = np.asarray(Xw, dtype=np.float64)
    if u.ndim != 1 or Xw.ndim != 2 or Xw.shape[0] != u.shape[0]:
        raise InvalidInputError(f"shape mismatch: u {u.shape}, Xw {Xw.shape}")
    p = Xw.shape[1]
    s = u @ Xw
    s2 = s * s
    s3 = s2 * s
    m3 = s3.mean()
    m4 = (s2 * s2).mean()
    return Xw @ (alpha * 2 * m3 * 3 / p * s2 + (1 - alpha) * 2 * (m4 - 3) * 4 / p * s3)


def skewness(S):
    """Standardized third central moment of each row."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    c = S - S.mean(axis=1, keepdims=True)
    m2 = np.mean(c * c, axis=1)
    m3 = np.mean(c * c * c, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = m3 / m2**1.5
    return np.where(m2 > 0, out, 0.0)


def sign_normalize(S, M=None):
    """Flip rows of ``S`` (and matching columns of ``M``) to positive skewness.

    Rows with exactly zero skewness are left alone, so ``M @ S`` is
    preserved bit for bit.

    Returns
    -------
    S_out : ndarray
    M_out : ndarray or None
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    signs = np.where(skewness(S) < 0, -1.0, 1.0)
    S_out = S * signs[:, None]
    if M is None:
        return S_out, None
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] != S.shape[0]:
        raise InvalidInputError(f"M shape {M.shape} does not match S shape {S.shape}")
    return S_out, M * signs[None, :]
