"""Matching score columns across datasets and testing how many are shared."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateInputError,
    InsufficientPermutationsError,
    InsufficientSubjectsError,
    InvalidInputError,
)

__all__ = [
    "MatchResult",
    "JointRankTest",
    "chordal_distance_matrix",
    "greedy_match",
    "perm_test_joint_rank",
    "average_joint_scores",
    "pmse",
]

MIN_PERMUTATIONS = 100
MIN_SUBJECTS = 5


def _as_scores(M, name):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} must be a finite 2-d array")
    return M


def chordal_distance_matrix(Mx, My):
    """Chordal distances between every column of ``Mx`` and every column of ``My``."""
    Mx = _as_scores(Mx, "Mx")
    My = _as_scores(My, "My")
    if Mx.shape[0] != My.shape[0]:
        raise InvalidInputError(f"row mismatch: {Mx.shape[0]} vs {My.shape[0]}")
    nx = np.sum(Mx * Mx, axis=0)
    ny = np.sum(My * My, axis=0)
    for name, norms in (("Mx", nx), ("My", ny)):
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise DegenerateInputError(f"column {int(zero[0])} of {name} has zero norm")
    cross = Mx.T @ My
    return np.maximum(0.0, 2.0 - 2.0 * cross**2 / np.outer(nx, ny))


@dataclass
class MatchResult:
    """Greedy pairing of score columns.

    ``order_x[:k]`` and ``order_y[:k]`` (``k = min(r_x, r_y)``) are the
    matched pairs in order of increasing distance; the leftover indices of
    the larger side follow in their original order.
    """

    order_x: np.ndarray
    order_y: np.ndarray
    matched_distances: np.ndarray
    Mx: np.ndarray
    My: np.ndarray
    Ux: np.ndarray | None = None
    Uy: np.ndarray | None = None


def greedy_match(Mx, My, Ux=None, Uy=None):
    """Pair columns of ``Mx`` and ``My`` greedily by chordal distance.

    The globally closest unmatched pair is taken first, both columns are
    removed, and the search repeats. Rows of ``Ux`` and ``Uy`` (one per
    score column) are permuted the same way.

    Parameters
    ----------
    Mx : array_like, shape (n, r_x)
        Column-centered scores.
    My : array_like, shape (n, r_y)
    Ux : array_like, shape (r_x, n), optional
    Uy : array_like, shape (r_y, n), optional

    Returns
    -------
    MatchResult
    """
    Mx = _as_scores(Mx, "Mx")
    My = _as_scores(My, "My")
    D = chordal_distance_matrix(Mx, My)
    rx, ry = D.shape
    k = min(rx, ry)
    free_x = np.ones(rx, dtype=bool)
    free_y = np.ones(ry, dtype=bool)
    px, py, dist = [], [], []
    for _ in range(k):
        masked = np.where(np.outer(free_x, free_y), D, np.inf)
        i, j = np.unravel_index(np.argmin(masked), D.shape)
        px.append(i)
        py.append(j)
        dist.append(D[i, j])
        free_x[i] = False
        free_y[j] = False
    order_x = np.array(px + list(np.flatnonzero(free_x)), dtype=int)
    order_y = np.array(py + list(np.flatnonzero(free_y)), dtype=int)

    def reorder(U, order, name, r):
        if U is None:
            return None
        U = np.asarray(U, dtype=np.float64)
        if U.ndim != 2 or U.shape[0] != r:
            raise InvalidInputError(f"{name} must have {r} rows, got shape {U.shape}")
        return U[order]

    return MatchResult(
        order_x=order_x,
        order_y=order_y,
        matched_distances=np.array(dist),
        Mx=Mx[:, order_x],
        My=My[:, order_y],
        Ux=reorder(Ux, order_x, "Ux", rx),
        Uy=reorder(Uy, order_y, "Uy", ry),
    )


@dataclass
class JointRankTest:
    """Outcome of :func:`perm_test_joint_rank`."""

    r_j: int
    pvalues_fwer: np.ndarray
    correlations: np.ndarray
    n_perm: int
    alpha_level: float
    seed: int
    null_max: np.ndarray
    permuted: str = "My rows"


def _standardize_columns(M):
    c = M - M.mean(axis=0)
    sd = np.sqrt(np.sum(c * c, axis=0))
    zero = np.flatnonzero(sd == 0)
    if zero.size:
        raise DegenerateInputError(f"score column {int(zero[0])} is constant")
    return c / sd


def perm_test_joint_rank(Mx, My, n_perm=1000, alpha_level=0.01, seed=0):
    """Max-statistic permutation test of the correlation of matched score columns.

    Pair ``l`` is column ``l`` of ``Mx`` with column ``l`` of ``My``. The
    null distribution permutes the subject rows of ``My`` and records the
    largest absolute correlation over all ``r_x * r_y`` column pairs, which
    controls the familywise error rate across pairs. Each replicate draws
    its permutation from its own child of ``SeedSequence(seed)``.

    Returns
    -------
    JointRankTest
        ``pvalues_fwer[l] = (1 + #{null max >= |r_l|}) / (n_perm + 1)`` and
        ``r_j`` the number of pairs with p-value below ``alpha_level``.
    """
    Mx = _as_scores(Mx, "Mx")
    My = _as_scores(My, "My")
    n = Mx.shape[0]
    if My.shape[0] != n:
        raise InvalidInputError(f"row mismatch: {n} vs {My.shape[0]}")
    if n < MIN_SUBJECTS:
        raise InsufficientSubjectsError(f"need at least {MIN_SUBJECTS} subjects, got {n}")
    if n_perm < MIN_PERMUTATIONS:
        raise InsufficientPermutationsError(
            f"need at least {MIN_PERMUTATIONS} permutations, got {n_perm}"
        )
    if not 0 < alpha_level < 1:
        raise InvalidInputError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    Zx = _standardize_columns(Mx)
    Zy = _standardize_columns(My)
    k = min(Zx.shape[1], Zy.shape[1])
    observed = np.abs(np.sum(Zx[:, :k] * Zy[:, :k], axis=0))

    children = np.random.SeedSequence(seed).spawn(n_perm)
    perms = np.stack([np.random.default_rng(c).permutation(n) for c in children])
    null = np.abs(np.einsum("ni,bnj->bij", Zx, Zy[perms]))
    null_max = null.reshape(n_perm, -1).max(axis=1)
    # tolerance guards ties between an exact null replicate and the observed value
    exceed = null_max[None, :] >= observed[:, None] - 1e-12
    pvalues = (1.0 + exceed.sum(axis=1)) / (n_perm + 1.0)
    return JointRankTest(
        r_j=int(np.sum(pvalues < alpha_level)),
        pvalues_fwer=pvalues,
        correlations=np.sum(Zx[:, :k] * Zy[:, :k], axis=0),
        n_perm=n_perm,
        alpha_level=alpha_level,
        seed=seed,
        null_max=null_max,
    )


def _unit_columns(M):
    norms = np.linalg.norm(M, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateInputError(f"score column {int(zero[0])} has zero norm")
    return M / norms


def average_joint_scores(Mx_joint, My_joint):
    """Average of sign-aligned joint score columns, renormalized to unit length.

    Raises
    ------
    AlignmentError
        If any pair of columns is negatively correlated; flip the sign of
        one column first.
    """
    Mx = _as_scores(Mx_joint, "Mx_joint")
    My = _as_scores(My_joint, "My_joint")
    if Mx.shape != My.shape:
        raise InvalidInputError(f"shape mismatch: {Mx.shape} vs {My.shape}")
    if Mx.shape[1] == 0:
        return Mx.copy()
    cx = Mx - Mx.mean(axis=0)
    cy = My - My.mean(axis=0)
    bad = np.flatnonzero(np.sum(cx * cy, axis=0) < 0)
    if bad.size:
        raise AlignmentError(
            f"joint column {int(bad[0])} is negatively correlated across datasets; "
            "flip its sign in one dataset before averaging"
        )
    return _unit_columns((_unit_columns(Mx) + _unit_columns(My)) / 2)


def pmse(Mx, My):
    """Mean chordal distance between corresponding columns of two score matrices."""
    Mx = _as_scores(Mx, "Mx")
    My = _as_scores(My, "My")
    if Mx.shape != My.shape:
        raise InvalidInputError(f"shape mismatch: {Mx.shape} vs {My.shape}")
    if Mx.shape[1] == 0:
        return 0.0
    return float(np.mean(np.diag(chordal_distance_matrix(Mx, My))))
