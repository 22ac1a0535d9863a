"""Curvilinear (Cayley retraction) descent over semiorthogonal matrices.

The joint problem minimizes

    -sum_l f(Ux[l] @ Xw) - sum_l f(Uy[l] @ Yw)
        + rho * sum_{l < r_j} d(invLx @ Ux[l], invLy @ Uy[l])

subject to ``Ux @ Ux.T = I`` and ``Uy @ Uy.T = I``, where ``f`` is the JB
statistic and ``d`` the chordal distance between score directions. The
single-dataset problem is the special case with one block and no penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidInputError, NumericError
from .nongauss import DEFAULT_ALPHA, jb_rows, jb_total

__all__ = [
    "JointProblem",
    "JointSolution",
    "CurvilinearTrace",
    "chordal_distance",
    "curvilinear_solve",
    "joint_objective",
    "joint_gradient",
    "select_rho",
    "feasibility",
]

TAU0 = 0.01
SHRINK = 0.5
ARMIJO = 1e-4
MAX_BACKTRACKS = 30


def chordal_distance(x, y):
    """Squared Frobenius distance between the rank-one projectors of ``x`` and ``y``.

    Equals ``2 * (1 - cos(theta)**2)`` for the angle ``theta`` between them.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InvalidInputError(f"length mismatch: {x.size} vs {y.size}")
    xx = x @ x
    yy = y @ y
    if xx == 0 or yy == 0:
        raise DomainError("chordal distance is undefined for a zero vector")
    xy = x @ y
    return max(0.0, 2.0 - 2.0 * (xy * xy) / (xx * yy))


def feasibility(U):
    """Frobenius distance of ``U @ U.T`` from the identity."""
    U = np.atleast_2d(U)
    return float(np.linalg.norm(U @ U.T - np.eye(U.shape[0])))


def _jb_grad_rows(U, Xw, alpha):
    # gradient of sum_l f(U[l] @ Xw) with respect to U
    p = Xw.shape[1]
    S = U @ Xw
    S2 = S * S
    S3 = S2 * S
    m3 = S3.mean(axis=1)
    m4 = (S2 * S2).mean(axis=1)
    f = alpha * m3**2 + (1 - alpha) * (m4 - 3) ** 2
    A = (alpha * 6.0 / p * m3)[:, None] * S2 + ((1 - alpha) * 8.0 / p * (m4 - 3))[:, None] * S3
    return f, A @ Xw.T


def _penalty(Mx, My):
    # Mx, My: (n, r_j) score columns
    xy = np.sum(Mx * My, axis=0)
    xx = np.sum(Mx * Mx, axis=0)
    yy = np.sum(My * My, axis=0)
    return np.maximum(0.0, 2.0 - 2.0 * xy * xy / (xx * yy))


def _penalty_grad(Mx, My):
    xy = np.sum(Mx * My, axis=0)
    xx = np.sum(Mx * Mx, axis=0)
    yy = np.sum(My * My, axis=0)
    gx = -4.0 * (xy / (xx * yy) * My - xy * xy / (xx * xx * yy) * Mx)
    gy = -4.0 * (xy / (xx * yy) * Mx - xy * xy / (yy * yy * xx) * My)
    return gx, gy


@dataclass
class JointProblem:
    """Inputs to :func:`curvilinear_solve`.

    ``Ux0`` and ``Uy0`` hold the joint rows first.
    """

    Xw: np.ndarray
    Yw: np.ndarray
    invLx: np.ndarray
    invLy: np.ndarray
    Ux0: np.ndarray
    Uy0: np.ndarray
    rho: float
    r_j: int
    alpha: float = DEFAULT_ALPHA
    tol: float = 1e-10
    max_iter: int = 1500

    def validate(self):
        for name in ("Xw", "Yw", "invLx", "invLy", "Ux0", "Uy0"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 2 or not np.all(np.isfinite(a)):
                raise InvalidInputError(f"{name} must be a finite 2-d array")
            setattr(self, name, a)
        n = self.Xw.shape[0]
        if self.Yw.shape[0] != n or self.invLx.shape != (n, n) or self.invLy.shape != (n, n):
            raise InvalidInputError("whitened data and inverse whiteners disagree on n")
        if self.Ux0.shape[1] != n or self.Uy0.shape[1] != n:
            raise InvalidInputError("unmixing matrices must have n columns")
        rx, ry = self.Ux0.shape[0], self.Uy0.shape[0]
        if not 0 <= self.r_j <= min(rx, ry):
            raise InvalidInputError(f"r_j={self.r_j} must lie in [0, min(r_x, r_y)={min(rx, ry)}]")
        if self.rho < 0 or not np.isfinite(self.rho):
            raise InvalidInputError(f"rho must be a finite nonnegative number, got {self.rho}")
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("Ux0", "Uy0"):
            err = feasibility(getattr(self, name))
            if err > 1e-8:
                raise InvalidInputError(f"{name} is not semiorthogonal (||UU^T - I||_F = {err:.2e})")


@dataclass
class CurvilinearTrace:
    objective: list = field(default_factory=list)
    feasibility: list = field(default_factory=list)
    step: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    stalled: bool = False


@dataclass
class JointSolution:
    """Result of :func:`curvilinear_solve`."""

    Ux: np.ndarray
    Uy: np.ndarray
    objective: float
    jb_x: float
    jb_y: float
    joint_distance: float
    converged: bool
    iterations: int
    objective_trace: list
    feasibility_trace: list
    step_size: str = "shared"


def joint_objective(Ux, Uy, Xw, Yw, invLx, invLy, rho, r_j, alpha=DEFAULT_ALPHA):
    """Value of the joint objective (to be minimized)."""
    val = -np.sum(jb_rows(Ux @ Xw, alpha)) - np.sum(jb_rows(Uy @ Yw, alpha))
    if rho and r_j:
        val += rho * np.sum(_penalty(invLx @ Ux[:r_j].T, invLy @ Uy[:r_j].T))
    return float(val)


def joint_gradient(Ux, Uy, Xw, Yw, invLx, invLy, rho, r_j, alpha=DEFAULT_ALPHA):
    """Euclidean gradient of :func:`joint_objective` with respect to ``(Ux, Uy)``."""
    _, gx = _jb_grad_rows(Ux, Xw, alpha)
    _, gy = _jb_grad_rows(Uy, Yw, alpha)
    gx, gy = -gx, -gy
    if rho and r_j:
        px, py = _penalty_grad(invLx @ Ux[:r_j].T, invLy @ Uy[:r_j].T)
        gx[:r_j] += rho * (invLx.T @ px).T
        gy[:r_j] += rho * (invLy.T @ py).T
    return gx, gy


def _cayley(V, W, tau):
    n = V.shape[0]
    half = 0.5 * tau * W
    eye = np.eye(n)
    return np.linalg.solve(eye + half, V - half @ V)


def cayley_descent(Us, value, value_and_grad, *, tol=1e-10, max_iter=1500, tau0=TAU0,
                   shrink=SHRINK, armijo=ARMIJO, max_backtracks=MAX_BACKTRACKS,
                   step_rule="bb", restart=None):
    """Monotone curvilinear search with Cayley retractions and a shared step.

    Each iteration forms the skew matrix ``W = G V^T - V G^T`` per block
    (``V = U^T``, ``G`` the Euclidean gradient in ``V``), moves every block
    along ``V(t) = (I + t/2 W)^{-1} (I - t/2 W) V`` with one common ``t``
    and accepts the first ``t`` in ``t0, t0/2, ...`` that satisfies the
    Armijo condition. ``t0`` is ``tau0`` on the first iteration; afterwards
    it is the Barzilai-Borwein step (``step_rule="bb"``) or ``tau0`` again
    (``step_rule="fixed"``).

    Parameters
    ----------
    Us : list of ndarray
        Semiorthogonal starting blocks, each ``r_k x n_k`` with orthonormal rows.
    value : callable
        ``value(Us) -> float``.
    value_and_grad : callable
        ``value_and_grad(Us) -> (float, list of gradients shaped like Us)``.

    Returns
    -------
    Us : list of ndarray
    trace : CurvilinearTrace
    """
    if step_rule not in ("bb", "fixed"):
        raise InvalidInputError(f"unknown step rule {step_rule!r}")
    Vs = [np.array(U, dtype=np.float64).T for U in Us]
    trace = CurvilinearTrace()
    F, Gs = value_and_grad([V.T for V in Vs])
    if not np.isfinite(F):
        raise NumericError("non-finite objective at the starting point", restart=restart, iteration=0)
    trace.objective.append(F)
    trace.feasibility.append(max(feasibility(V.T) for V in Vs))
    prev = None

    for it in range(1, max_iter + 1):
        Ws, Zs = [], []
        slope = 0.0
        for V, G in zip(Vs, Gs):
            GV = G.T @ V.T
            W = GV - GV.T
            Ws.append(W)
            Zs.append(W @ V)
            slope -= 0.5 * np.sum(W * W)
        if slope == 0.0:
            trace.converged = True
            break

        tau = tau0
        if step_rule == "bb" and prev is not None:
            dV = np.concatenate([(V - Vp).ravel() for V, Vp in zip(Vs, prev[0])])
            dZ = np.concatenate([(Z - Zp).ravel() for Z, Zp in zip(Zs, prev[1])])
            sy = abs(dV @ dZ)
            if sy > 0:
                tau = (dV @ dV) / sy if it % 2 else sy / (dZ @ dZ)
                tau = min(max(tau, 1e-12), 1e12)

        step = tau
        accepted = None
        for _ in range(max_backtracks + 1):
            trial = [_cayley(V, W, step) for V, W in zip(Vs, Ws)]
            F_new = value([T.T for T in trial])
            if np.isfinite(F_new) and F_new <= F + armijo * step * slope:
                accepted = trial
                break
            step *= shrink
        if accepted is None:
            if not all(np.all(np.isfinite(T)) for T in trial) or not np.isfinite(F_new):
                raise NumericError("non-finite objective during line search", restart=restart, iteration=it)
            # no sufficient decrease within the backtracking budget: the
            # iterate is stationary to working precision
            trace.stalled = True
            trace.converged = True
            break

        prev = (Vs, Zs)
        Vs = accepted
        F_old = F
        F, Gs = value_and_grad([V.T for V in Vs])
        if not np.isfinite(F):
            raise NumericError("non-finite objective", restart=restart, iteration=it)
        trace.objective.append(F)
        trace.feasibility.append(max(feasibility(V.T) for V in Vs))
        trace.step.append(step)
        trace.iterations = it
        if abs(F - F_old) <= tol * max(abs(F_old), 1e-300):
            trace.converged = True
            break
    return [V.T for V in Vs], trace


def _single_block(U0, Xw, alpha, tol, max_iter, restart=None):
    def value(Us):
        return -float(np.sum(jb_rows(Us[0] @ Xw, alpha)))

    def value_and_grad(Us):
        f, g = _jb_grad_rows(Us[0], Xw, alpha)
        return -float(np.sum(f)), [-g]

    (U,), trace = cayley_descent([U0], value, value_and_grad, tol=tol, max_iter=max_iter,
                                 restart=restart)
    return U, trace


def _merge_traces(tx, ty):
    # combined objective per iteration, holding a finished block at its last value
    k = max(len(tx.objective), len(ty.objective))

    def pad(v):
        return list(v) + [v[-1]] * (k - len(v))

    ox, oy = pad(tx.objective), pad(ty.objective)
    fx, fy = pad(tx.feasibility), pad(ty.feasibility)
    return CurvilinearTrace(
        objective=[a + b for a, b in zip(ox, oy)],
        feasibility=[max(a, b) for a, b in zip(fx, fy)],
        step=[],
        converged=tx.converged and ty.converged,
        iterations=max(tx.iterations, ty.iterations),
        stalled=tx.stalled or ty.stalled,
    )


def curvilinear_solve(problem):
    """Solve the joint problem from the initial unmixing matrices.

    With ``rho == 0`` or ``r_j == 0`` the objective separates and each
    block is solved with its own line search; otherwise both blocks share
    one step size. ``JointSolution.step_size`` records which.

    Returns
    -------
    JointSolution
        Not converging within ``max_iter`` is reported through ``converged``
        rather than raised.
    """
    problem.validate()
    pr = problem
    args = (pr.Xw, pr.Yw, pr.invLx, pr.invLy, pr.rho, pr.r_j, pr.alpha)

    def value(Us):
        return joint_objective(Us[0], Us[1], *args)

    def value_and_grad(Us):
        return joint_objective(Us[0], Us[1], *args), list(joint_gradient(Us[0], Us[1], *args))

    if pr.rho == 0 or pr.r_j == 0:
        # the objective separates, so each block gets its own line search
        Ux, tx = _single_block(pr.Ux0, pr.Xw, pr.alpha, pr.tol, pr.max_iter)
        Uy, ty = _single_block(pr.Uy0, pr.Yw, pr.alpha, pr.tol, pr.max_iter)
        trace = _merge_traces(tx, ty)
        step_size = "separate"
    else:
        (Ux, Uy), trace = cayley_descent(
            [pr.Ux0, pr.Uy0], value, value_and_grad, tol=pr.tol, max_iter=pr.max_iter
        )
        step_size = "shared"
    jd = 0.0
    if pr.r_j:
        jd = float(np.sum(_penalty(pr.invLx @ Ux[: pr.r_j].T, pr.invLy @ Uy[: pr.r_j].T)))
    return JointSolution(
        Ux=Ux,
        Uy=Uy,
        objective=trace.objective[-1],
        jb_x=float(np.sum(jb_rows(Ux @ pr.Xw, pr.alpha))),
        jb_y=float(np.sum(jb_rows(Uy @ pr.Yw, pr.alpha))),
        joint_distance=jd,
        converged=trace.converged,
        iterations=trace.iterations,
        objective_trace=trace.objective,
        feasibility_trace=trace.feasibility,
        step_size=step_size,
    )


RHO_LADDER = {"small": 1.0, "medium": 10.0, "large": 100.0}


def select_rho(Sx_joint, Sy_joint, extent="small", alpha=DEFAULT_ALPHA, check=True):
    """Penalty weight from the JB content of the candidate joint loadings.

    ``"small"`` is the summed JB of both candidate sets divided by 10;
    ``"medium"`` and ``"large"`` multiply that by 10 and 100. A number is
    returned unchanged.
    """
    if isinstance(extent, str):
        if extent not in RHO_LADDER:
            raise InvalidInputError(f"rho extent must be one of {sorted(RHO_LADDER)} or a number")
        base = (jb_total(Sx_joint, alpha, check=check) + jb_total(Sy_joint, alpha, check=check)) / 10
        return RHO_LADDER[extent] * base
    value = float(extent)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInputError(f"numeric rho must be positive, got {extent}")
    return value
