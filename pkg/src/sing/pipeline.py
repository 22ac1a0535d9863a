"""End-to-end joint decomposition of two datasets measured on the same subjects."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidRankError, MissingRankError
from .lngca import estimate_mixing_ols, estimate_rank, lngca
from .matcher import average_joint_scores, greedy_match, perm_test_joint_rank, pmse
from .nongauss import DEFAULT_ALPHA, sign_normalize
from .preprocess import check_data, double_center, standardize_iterative, whiten
from .solver import JointProblem, curvilinear_solve, select_rho

__all__ = ["SingConfig", "SingResult", "StageInit", "preprocess_pair", "sing_decompose"]


@dataclass
class SingConfig:
    """Settings for :func:`sing_decompose`.

    ``rank_x`` and ``rank_y`` are required unless ``estimate_ranks`` is set,
    in which case a Monte Carlo JB screen (see
    :func:`sing.lngca.estimate_rank`) picks them. ``rank_j`` overrides the
    permutation test.
    """

    rank_x: int | None = None
    rank_y: int | None = None
    rank_j: int | None = None
    standardize: bool = False
    individual: bool = True
    rho_extent: str | float = "small"
    alpha: float = DEFAULT_ALPHA
    n_perm: int = 1000
    alpha_level: float = 0.01
    restarts: int = 20
    max_iter: int = 1500
    tol: float = 1e-10
    seed: int = 0
    divisor: str = "p"
    ols_scores: bool = False
    estimate_ranks: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class StageInit:
    """Matched unmixing matrices and joint rank from a staged run."""

    Ux: np.ndarray
    Uy: np.ndarray
    r_j: int


@dataclass
class SingResult:
    """Joint and individual loadings and scores.

    Joint rows/columns come first in every block. ``scale_x``/``scale_y``
    hold the norms of the joint score columns before unit normalization.
    """

    S_jx: np.ndarray
    S_jy: np.ndarray
    M_j: np.ndarray
    M_jx: np.ndarray
    M_jy: np.ndarray
    scale_x: np.ndarray
    scale_y: np.ndarray
    S_ix: np.ndarray | None = None
    S_iy: np.ndarray | None = None
    M_ix: np.ndarray | None = None
    M_iy: np.ndarray | None = None
    Ux: np.ndarray | None = None
    Uy: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def r_j(self):
        return self.S_jx.shape[0]

    def arrays(self):
        """Output matrices keyed by name, skipping absent individual blocks."""
        names = ["S_jx", "S_jy", "M_j", "M_jx", "M_jy", "S_ix", "S_iy", "M_ix", "M_iy"]
        return {k: getattr(self, k) for k in names if getattr(self, k) is not None}


def preprocess_pair(X, Y, standardize=False):
    """Center (and optionally standardize) both datasets; checks subject counts."""
    X = check_data(X, "X")
    Y = check_data(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(
            f"X and Y must have the same number of subjects: X is {X.shape[0]}x{X.shape[1]}, "
            f"Y is {Y.shape[0]}x{Y.shape[1]}"
        )
    if standardize:
        return standardize_iterative(X), standardize_iterative(Y)
    return double_center(X), double_center(Y)


def _check_rank(r, n, name):
    if r is None:
        raise MissingRankError(
            f"{name} is required: supply the number of non-Gaussian components "
            "(or enable estimate_ranks for the Monte Carlo JB screen)"
        )
    if not 1 <= int(r) <= n - 2:
        raise InvalidRankError(f"{name} must satisfy 1 <= {name} <= n - 2 = {n - 2}, got {r}")
    return int(r)


def _signed_unit(M):
    scale = np.linalg.norm(M, axis=0)
    return M / np.where(scale > 0, scale, 1.0), scale


def sing_decompose(X, Y, config=None, init=None):
    """Joint non-Gaussian decomposition of ``X`` and ``Y``.

    Runs centering/standardization, whitening, a separate LNGCA fit per
    dataset, greedy matching of the fitted scores, the permutation test
    for the joint rank, penalty selection and the joint curvilinear solve,
    then assembles sign-normalized joint and individual blocks.

    Parameters
    ----------
    X : array_like, shape (n, p_x)
    Y : array_like, shape (n, p_y)
    config : SingConfig, optional
    init : StageInit, optional
        Skip the per-dataset fits, matching and permutation test and start
        the joint solve from these matrices.

    Returns
    -------
    SingResult
    """
    cfg = SingConfig() if config is None else config
    Xc, Yc = preprocess_pair(X, Y, cfg.standardize)
    n = Xc.shape[0]
    wx = whiten(Xc, divisor=cfg.divisor)
    wy = whiten(Yc, divisor=cfg.divisor)
    diag = {"divisor": cfg.divisor}

    if init is None:
        rank_x, rank_y = cfg.rank_x, cfg.rank_y
        if cfg.estimate_ranks:
            if rank_x is None:
                rank_x, thr = estimate_rank(Xc, alpha=cfg.alpha, seed=cfg.seed, center=False)
                diag["rank_x_screen_threshold"] = thr
            if rank_y is None:
                rank_y, thr = estimate_rank(Yc, alpha=cfg.alpha, seed=cfg.seed, center=False)
                diag["rank_y_screen_threshold"] = thr
        rank_x = _check_rank(rank_x, n, "rank_x")
        rank_y = _check_rank(rank_y, n, "rank_y")

        common = dict(alpha=cfg.alpha, restarts=cfg.restarts, seed=cfg.seed,
                      max_iter=cfg.max_iter, tol=cfg.tol)
        dx = lngca(Xc, rank_x, whitener=wx, **common)
        dy = lngca(Yc, rank_y, whitener=wy, **common)
        Mx = estimate_mixing_ols(dx.S, Xc)
        My = estimate_mixing_ols(dy.S, Yc)
        match = greedy_match(Mx - Mx.mean(axis=0), My - My.mean(axis=0), dx.U, dy.U)
        test = perm_test_joint_rank(match.Mx, match.My, n_perm=cfg.n_perm,
                                    alpha_level=cfg.alpha_level, seed=cfg.seed)
        r_j = test.r_j if cfg.rank_j is None else int(cfg.rank_j)
        Ux0, Uy0 = match.Ux, match.Uy
        diag.update(
            lngca_converged_x=bool(dx.converged),
            lngca_converged_y=bool(dy.converged),
            lngca_max_feasibility_error=max(dx.max_feasibility_error, dy.max_feasibility_error),
            jb_x=dx.jb_values.tolist(),
            jb_y=dy.jb_values.tolist(),
            order_x=match.order_x.tolist(),
            order_y=match.order_y.tolist(),
            matched_distances=match.matched_distances.tolist(),
            rank_test={
                "r_j": test.r_j,
                "pvalues_fwer": test.pvalues_fwer.tolist(),
                "correlations": test.correlations.tolist(),
                "n_perm": test.n_perm,
                "alpha_level": test.alpha_level,
                "permuted": test.permuted,
            },
        )
    else:
        Ux0 = np.asarray(init.Ux, dtype=np.float64)
        Uy0 = np.asarray(init.Uy, dtype=np.float64)
        r_j = int(init.r_j) if cfg.rank_j is None else int(cfg.rank_j)
        _check_rank(Ux0.shape[0], n, "rank_x")
        _check_rank(Uy0.shape[0], n, "rank_y")
        diag["init"] = "staged"

    if not 0 <= r_j <= min(Ux0.shape[0], Uy0.shape[0]):
        raise InvalidRankError(f"joint rank {r_j} exceeds min(rank_x, rank_y)")
    diag["r_j"] = r_j

    if r_j == 0:
        warnings.warn("no joint components detected (r_j = 0); joint blocks are empty",
                      UserWarning, stacklevel=2)
        Ux, Uy = Ux0, Uy0
        rho = 0.0
        diag.update(rho=0.0, joint_distance=0.0, joint_converged=True, joint_iterations=0,
                    step_size="none")
    else:
        rho = select_rho(Ux0[:r_j] @ wx.whitened, Uy0[:r_j] @ wy.whitened,
                         cfg.rho_extent, cfg.alpha, check=False)
        problem = JointProblem(wx.whitened, wy.whitened, wx.inverse, wy.inverse, Ux0, Uy0,
                               rho=rho, r_j=r_j, alpha=cfg.alpha, tol=cfg.tol,
                               max_iter=cfg.max_iter)
        sol = curvilinear_solve(problem)
        Ux, Uy = sol.Ux, sol.Uy
        diag.update(
            rho=rho,
            joint_distance=sol.joint_distance,
            joint_converged=bool(sol.converged),
            joint_iterations=sol.iterations,
            joint_objective=sol.objective,
            max_feasibility_error=float(max(sol.feasibility_trace)),
            step_size=sol.step_size,
        )
    diag["rho_extent"] = cfg.rho_extent

    Sx = Ux @ wx.whitened
    Sy = Uy @ wy.whitened
    if cfg.ols_scores:
        Mx_all = estimate_mixing_ols(Sx, Xc)
        My_all = estimate_mixing_ols(Sy, Yc)
    else:
        Mx_all = wx.inverse @ Ux.T
        My_all = wy.inverse @ Uy.T

    M_jx, scale_x = _signed_unit(Mx_all[:, :r_j])
    M_jy, scale_y = _signed_unit(My_all[:, :r_j])
    S_jx, M_jx = sign_normalize(Sx[:r_j], M_jx)
    S_jy, M_jy = sign_normalize(Sy[:r_j], M_jy)

    if r_j:
        cx = M_jx - M_jx.mean(axis=0)
        cy = M_jy - M_jy.mean(axis=0)
        align = np.where(np.sum(cx * cy, axis=0) < 0, -1.0, 1.0)
        M_j = average_joint_scores(M_jx, M_jy * align)
        diag["pmse"] = pmse(M_jx, M_jy)
        diag["joint_sign_x_vs_y"] = align.tolist()
    else:
        M_j = np.zeros((n, 0))
        diag["pmse"] = 0.0

    result = SingResult(S_jx=S_jx, S_jy=S_jy, M_j=M_j, M_jx=M_jx, M_jy=M_jy,
                        scale_x=scale_x, scale_y=scale_y, Ux=Ux, Uy=Uy, diagnostics=diag)
    if cfg.individual:
        result.S_ix, result.M_ix = sign_normalize(Sx[r_j:], Mx_all[:, r_j:])
        result.S_iy, result.M_iy = sign_normalize(Sy[r_j:], My_all[:, r_j:])
    return result
