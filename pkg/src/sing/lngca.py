"""Linear non-Gaussian component analysis of a single dataset."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, InvalidRankError
from .nongauss import DEFAULT_ALPHA, jb_rows, skewness
from .preprocess import Whitener, check_data, double_center, whiten
from .solver import _single_block

__all__ = [
    "Decomposition",
    "lngca",
    "random_unmixing",
    "estimate_mixing_ols",
    "estimate_rank",
    "worker_count",
]


def worker_count():
    """Thread cap taken from ``SING_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SING_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class Decomposition:
    """Single-dataset decomposition.

    Attributes
    ----------
    U : ndarray, shape (r, n)
        Unmixing matrix with orthonormal rows.
    S : ndarray, shape (r, p)
        Component loadings ``U @ whitened``.
    M : ndarray, shape (n, r)
        Subject scores ``inverse_whitener @ U.T``.
    jb_values : ndarray, shape (r,)
        JB statistic per component, descending.
    converged : bool
    objective_trace : list of float
        Objective per iteration of the winning restart.
    max_feasibility_error : float
        Largest ``||U U^T - I||_F`` seen at any iterate of any restart.
    """

    U: np.ndarray
    S: np.ndarray
    M: np.ndarray
    jb_values: np.ndarray
    converged: bool
    objective_trace: list
    whitener: Whitener | None = None
    objective: float = np.nan
    best_restart: int = 0
    restart_objectives: list = field(default_factory=list)
    feasibility_trace: list = field(default_factory=list)
    max_feasibility_error: float = np.nan


def random_unmixing(r, basis, rng):
    """Random ``r x n`` matrix with orthonormal rows inside ``span(basis)``."""
    k = basis.shape[1]
    Z = rng.standard_normal((k, r))
    Q, R = np.linalg.qr(Z)
    Q = Q * np.sign(np.diag(R))
    return (basis @ Q).T


def _solve_one(U0, Xw, alpha, tol, max_iter, restart):
    return _single_block(U0, Xw, alpha, tol, max_iter, restart)


def _prepare(data, center, divisor):
    x = check_data(data)
    if center:
        x = double_center(x)
    return x, whiten(x, divisor=divisor)


def lngca(data, r, alpha=DEFAULT_ALPHA, restarts=20, seed=0, max_iter=1500, tol=1e-10,
          center=True, divisor="p", init=None, whitener=None):
    """Extract ``r`` maximally non-Gaussian components from one dataset.

    Parameters
    ----------
    data : array_like, shape (n, p)
        Raw data (double-centered internally unless ``center=False``).
    r : int
        Number of components, ``1 <= r <= n - 2``.
    alpha : float
        Skewness weight in the JB statistic.
    restarts : int
        Number of random orthonormal starting points; the lowest objective wins.
    seed : int
        Seed for the starting points.
    max_iter, tol : int, float
        Per-restart iteration cap and relative objective-change tolerance.
    center : bool
        Double-center ``data`` before whitening.
    divisor : {"p", "p-1"}
        Covariance normalization for whitening.
    init : ndarray, shape (r, n), optional
        Explicit starting point; disables random restarts.
    whitener : Whitener, optional
        Precomputed whitening of the (centered) data.

    Returns
    -------
    Decomposition
    """
    if whitener is None:
        _, whitener = _prepare(data, center, divisor)
    n = whitener.whitened.shape[0]
    if not 1 <= r <= n - 2:
        raise InvalidRankError(f"r must satisfy 1 <= r <= n - 2 = {n - 2}, got {r}")
    if r > whitener.eigen_rank:
        raise InvalidRankError(f"r={r} exceeds the data rank {whitener.eigen_rank}")
    if init is None and restarts < 1:
        raise InvalidInputError("restarts must be at least 1")
    Xw = whitener.whitened

    if init is not None:
        starts = [np.asarray(init, dtype=np.float64)]
        if starts[0].shape != (r, n):
            raise InvalidInputError(f"init must have shape {(r, n)}, got {starts[0].shape}")
    else:
        children = np.random.SeedSequence(seed).spawn(restarts)
        starts = [random_unmixing(r, whitener.basis, np.random.default_rng(c)) for c in children]

    def run(i):
        return _solve_one(starts[i], Xw, alpha, tol, max_iter, i)

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(len(starts))))
    else:
        results = [run(i) for i in range(len(starts))]

    objectives = [t.objective[-1] for _, t in results]
    # first minimum in restart order, independent of execution order
    best = int(np.argmin(objectives))
    U, trace = results[best]

    S = U @ Xw
    jb = jb_rows(S, alpha)
    order = np.argsort(-jb, kind="stable")
    U, S, jb = U[order], S[order], jb[order]
    flip = np.where(skewness(S) < 0, -1.0, 1.0)
    U = U * flip[:, None]
    S = S * flip[:, None]
    M = whitener.inverse @ U.T
    return Decomposition(
        U=U,
        S=S,
        M=M,
        jb_values=jb,
        converged=trace.converged,
        objective_trace=trace.objective,
        whitener=whitener,
        objective=objectives[best],
        best_restart=best,
        restart_objectives=objectives,
        feasibility_trace=trace.feasibility,
        max_feasibility_error=float(max(max(t.feasibility) for _, t in results)),
    )


def estimate_mixing_ols(S, data, full=True):
    """Least-squares subject scores for fixed loadings.

    Parameters
    ----------
    S : array_like, shape (r, p)
    data : array_like, shape (n, p)
        Centered data.
    full : bool
        If True return ``X S^T (S S^T)^{-1}``; otherwise the cross-product
        ``X S^T`` alone.

    Returns
    -------
    ndarray, shape (n, r)
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != S.shape[1]:
        raise InvalidInputError(f"S shape {S.shape} does not match data shape {x.shape}")
    cross = x @ S.T
    if not full:
        return cross
    gram = S @ S.T
    svals = np.linalg.svd(gram, compute_uv=False)
    if svals[-1] <= 1e-12 * max(svals[0], 1e-300):
        raise DegenerateInputError("loadings are rank deficient; S S^T is singular")
    return np.linalg.solve(gram, cross.T).T


def estimate_rank(data, r_max=None, alpha=DEFAULT_ALPHA, n_null=20, quantile=0.99, seed=0,
                  restarts=5, max_iter=500, center=True):
    """Count components whose JB exceeds a Monte Carlo Gaussian null.

    A convenience screen, not a formal test: the threshold is the
    ``quantile`` of the largest single-component JB found on ``n_null``
    Gaussian matrices of the same shape, and the count is the number of
    components in an ``r_max``-component fit above it.

    Returns
    -------
    rank : int
    threshold : float
    """
    x, wh = _prepare(data, center, "p")
    n, p = x.shape
    if r_max is None:
        r_max = min(n - 2, wh.eigen_rank)
    rng = np.random.default_rng(seed)
    null = []
    for _ in range(n_null):
        g = rng.standard_normal((n, p))
        dec = lngca(g, 1, alpha=alpha, restarts=restarts, seed=int(rng.integers(2**31)),
                    max_iter=max_iter)
        null.append(dec.jb_values[0])
    threshold = float(np.quantile(null, quantile))
    fit = lngca(x, r_max, alpha=alpha, restarts=restarts, seed=seed, max_iter=max_iter,
                center=False, whitener=wh)
    return int(np.sum(fit.jb_values > threshold)), threshold
