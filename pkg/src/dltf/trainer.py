"""Alternating-direction trainer for thresholded-feature dictionaries.

The objective couples a squared (2k,2) gauge penalty on residual
correlations Q = W^T (X - WZ), a Gram penalty ||W^T W - I||_F^2, and a
reconstruction term (theta/2) ||X - WZ||_F^2, subject to k-sparse codes
and unit-norm atoms. The augmented Lagrangian splits it into four
updates per round:

    Z: iterative hard thresholding on the smooth part (step 1/L),
    Q: per-column prox of the squared (2k,2) norm (gamma = lambda/beta),
    W: Riemannian descent on the product of spheres (Barzilai-Borwein
       step, nonmonotone backtracking, renormalization retraction),
    Y: dual ascent  Y += beta (Q - W^T (X - WZ)).

All updates are deterministic given their inputs; train() is
deterministic given (X, hyperparams, seed).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import DataMatrix, Dictionary, SparseCodeBatch, normalize_columns
from .encoder import max_k_columns
from .errors import InvalidK, LineSearchFailed, PowerIterationDiverged
from .prox import prox_k2


@dataclass(frozen=True)
class Hyperparams:
    """Trainer knobs. beta must be positive; lam and theta nonnegative."""

    m: int
    k: int
    lam: float = 0.05
    theta: float = 0.01
    beta: float = 1.0
    outer_iters: int = 30
    iht_iters: int = 50
    iht_tol: float = 1e-8
    w_iters: int = 30
    w_grad_tol: float = 1e-6
    power_iters: int = 20
    primal_tol: float = 1e-5

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m={self.m} must be positive")
        if self.k < 1 or self.k > self.m:
            raise InvalidK(f"k={self.k} outside [1, {self.m}]")
        if not (self.beta > 0.0) or not math.isfinite(self.beta):
            raise ValueError(f"beta={self.beta} must be positive")
        if self.lam < 0.0 or self.theta < 0.0:
            raise ValueError("lam and theta must be nonnegative")
        for name in ("outer_iters", "iht_iters", "w_iters", "power_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    @property
    def kprime(self) -> int:
        """Sparsity level of the gauge penalty (2k capped at m)."""
        return min(2 * self.k, self.m)


@dataclass
class TrainerState:
    """Mutable optimization state plus per-round diagnostics. Not
    shareable across threads while training."""

    W: Dictionary
    Z: SparseCodeBatch
    Q: np.ndarray
    Y: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)


def _sum_k2_columns(M: np.ndarray, kprime: int) -> float:
    """Sum over columns of the squared (k',2) norm."""
    sq = M * M
    m = M.shape[0]
    if kprime >= m:
        return float(sq.sum())
    return float(np.partition(sq, m - kprime, axis=0)[m - kprime:].sum())


def lagrangian_value(state: TrainerState, X: DataMatrix, hp: Hyperparams) -> float:
    """Augmented Lagrangian at the current state."""
    W = state.W.data
    Z = state.Z.data
    resid = X.data - W @ Z
    R = state.Q - W.T @ resid
    G = W.T @ W
    gram_dev = G - np.eye(hp.m)
    return (
        0.5 * hp.lam * _sum_k2_columns(state.Q, hp.kprime)
        + float((gram_dev * gram_dev).sum())
        + 0.5 * hp.theta * float((resid * resid).sum())
        + float((state.Y * R).sum())
        + 0.5 * hp.beta * float((R * R).sum())
    )


def primal_residual(state: TrainerState, X: DataMatrix) -> float:
    """Frobenius norm of Q - W^T (X - WZ)."""
    W = state.W.data
    R = state.Q - W.T @ (X.data - W @ state.Z.data)
    return float(np.linalg.norm(R))


def _smooth_step_bound(G: np.ndarray, hp: Hyperparams) -> float:
    """Largest eigenvalue of theta*G + beta*G^2 via power iteration."""
    H = hp.theta * G + hp.beta * (G @ G)
    m = G.shape[0]
    v = 1.0 + np.arange(m) / (10.0 * m)
    v /= np.linalg.norm(v)
    for _ in range(hp.power_iters):
        w = H @ v
        nrm = float(np.linalg.norm(w))
        if not math.isfinite(nrm) or nrm <= 0.0:
            raise PowerIterationDiverged(f"power iteration produced norm {nrm}")
        v = w / nrm
    L = float(v @ (H @ v))
    if not math.isfinite(L) or L <= 0.0:
        raise PowerIterationDiverged(f"step bound estimate {L} is unusable")
    return L


def update_Z(state: TrainerState, X: DataMatrix, hp: Hyperparams,
             trace: list | None = None) -> SparseCodeBatch:
    """Code update: hard-thresholded gradient steps on the smooth part of
    the Lagrangian.

    The inner loop starts from whichever of the current codes or the
    thresholded feature max_k(W^T X) scores lower; codes must keep
    tracking the dictionary as it moves, and the previous round's codes
    alone can pin the iteration to a stale support set. The smooth
    objective value is non-increasing across inner iterations (asserted);
    iteration stops early once its relative change falls below iht_tol.
    When trace is a list it receives the objective value per inner step.
    """
    W = state.W.data
    Q, Y = state.Q, state.Y
    Xd = X.data
    G = W.T @ W
    WtX = W.T @ Xd
    GY = G @ Y
    x_sq = float((Xd * Xd).sum())
    eta = 0.99 / _smooth_step_bound(G, hp)

    def value(Z, GZ):
        recon = x_sq - 2.0 * float((WtX * Z).sum()) + float((GZ * Z).sum())
        coupling = GZ - WtX + Q
        return (
            0.5 * hp.theta * recon
            + float((Y * GZ).sum())
            + 0.5 * hp.beta * float((coupling * coupling).sum())
        )

    Z = state.Z.data
    GZ = G @ Z
    f_prev = value(Z, GZ)
    Z_thr = max_k_columns(WtX, hp.k)
    GZ_thr = G @ Z_thr
    f_thr = value(Z_thr, GZ_thr)
    if f_thr < f_prev:
        Z, GZ, f_prev = Z_thr, GZ_thr, f_thr
    if trace is not None:
        trace.append(f_prev)
    for _ in range(hp.iht_iters):
        grad = -hp.theta * (WtX - GZ) + GY + hp.beta * (G @ (GZ - WtX + Q))
        Z_new = max_k_columns(Z - eta * grad, hp.k)
        GZ = G @ Z_new
        f = value(Z_new, GZ)
        assert f <= f_prev + 1e-12 * max(1.0, abs(f_prev)), "hard-thresholding step ascended"
        if trace is not None:
            trace.append(f)
        Z = Z_new
        if abs(f_prev - f) <= hp.iht_tol * max(1.0, abs(f_prev)):
            break
        f_prev = f
    return SparseCodeBatch(Z, hp.k)


def update_Q(state: TrainerState, X: DataMatrix, hp: Hyperparams) -> np.ndarray:
    """Split-variable update: per-column prox of the squared (2k,2) norm
    at W^T X - W^T W Z - Y / beta, with gamma = lambda / beta."""
    W = state.W.data
    C = W.T @ X.data - (W.T @ W) @ state.Z.data - state.Y / hp.beta
    if hp.lam == 0.0:
        return C
    gamma = hp.lam / hp.beta
    Q = np.empty_like(C)
    for i in range(C.shape[1]):
        Q[:, i] = prox_k2(C[:, i], hp.kprime, gamma)
    return Q


class _WSubproblem:
    """Dictionary-step objective and gradient with data-size work hoisted
    out: after the one-time products every evaluation is O(n m^2 + m^3),
    independent of the sample count."""

    def __init__(self, Xd, Z, Q, Y, hp: Hyperparams):
        self.theta = hp.theta
        self.beta = hp.beta
        self.eye = np.eye(Z.shape[0])
        self.XXt = Xd @ Xd.T
        self.XZt = Xd @ Z.T
        self.ZZt = Z @ Z.T
        self.XYt = Xd @ Y.T
        self.XQt = Xd @ Q.T
        self.YZt = Y @ Z.T
        self.QZt = Q @ Z.T
        self.x_sq = float((Xd * Xd).sum())
        self.q_sq = float((Q * Q).sum())

    def value(self, W: np.ndarray) -> float:
        G = W.T @ W
        dev = G - self.eye
        gram_pen = float((dev * dev).sum())
        recon = self.x_sq - 2.0 * float((W * self.XZt).sum()) + float((G * self.ZZt).sum())
        y_dot_A = float((W * self.XYt).sum()) - float((G * self.YZt).sum())
        q_dot_A = float((W * self.XQt).sum()) - float((G * self.QZt).sum())
        M = self.XZt.T @ W
        a_sq = (
            float((W * (self.XXt @ W)).sum())
            - 2.0 * float((G * M.T).sum())
            + float(((G @ G) * self.ZZt).sum())
        )
        return (
            gram_pen
            + 0.5 * self.theta * recon
            - y_dot_A
            + 0.5 * self.beta * (self.q_sq - 2.0 * q_dot_A + a_sq)
        )

    def grad(self, W: np.ndarray) -> np.ndarray:
        G = W.T @ W
        ZAt = self.XZt.T @ W - self.ZZt @ G
        XAt = self.XXt @ W - self.XZt @ G
        RYt = self.XYt - W @ self.YZt.T
        RQt = self.XQt - W @ self.QZt.T
        RAt = XAt - W @ ZAt
        RSt = -RYt + self.beta * (RAt - RQt)
        SZt = -self.YZt + self.beta * (ZAt.T - self.QZt)
        return (
            4.0 * (W @ (G - self.eye))
            - self.theta * (self.XZt - W @ self.ZZt)
            + RSt
            - W @ SZt
        )


def w_objective(W, X: DataMatrix, Z, Q, Y, hp: Hyperparams) -> float:
    """Dictionary-step objective at an arbitrary (not necessarily
    unit-norm) W; exposed for derivative checks."""
    return _WSubproblem(X.data, np.asarray(Z, float), Q, Y, hp).value(np.asarray(W, float))


def w_gradient(W, X: DataMatrix, Z, Q, Y, hp: Hyperparams) -> np.ndarray:
    """Euclidean gradient of w_objective with respect to W."""
    return _WSubproblem(X.data, np.asarray(Z, float), Q, Y, hp).grad(np.asarray(W, float))


def _project_tangent(W: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Per-column tangent projection on the product of unit spheres."""
    return g - W * (W * g).sum(axis=0)


def _retract(W: np.ndarray, direction: np.ndarray, tau: float):
    """Step then renormalize columns; None when a column collapses."""
    A = W - tau * direction
    norms = np.linalg.norm(A, axis=0)
    if np.min(norms) < 1e-12:
        return None
    return A / norms


def update_W(state: TrainerState, X: DataMatrix, hp: Hyperparams) -> Dictionary:
    """Dictionary update: projected-gradient descent on the product of
    spheres with a Barzilai-Borwein step and nonmonotone backtracking
    (reference value = max of the last five accepted objectives).

    The objective never exceeds its input value plus the nonmonotone
    allowance (asserted). If backtracking exhausts its budget the update
    stops where it is and emits a LineSearchFailed warning; progress
    already accepted is kept, so a first-step failure returns the input
    dictionary unchanged.
    """
    P = _WSubproblem(X.data, state.Z.data, state.Q, state.Y, hp)
    W = state.W.data.copy()
    f = P.value(W)
    hist = [f]
    pg = _project_tangent(W, P.grad(W))
    pg_sq = float((pg * pg).sum())
    tau = 1.0 / (1.0 + math.sqrt(pg_sq))
    for it in range(hp.w_iters):
        if math.sqrt(pg_sq) < hp.w_grad_tol:
            break
        ref = max(hist[-5:])
        t = tau
        accepted = False
        for _ in range(20):
            W_new = _retract(W, pg, t)
            if W_new is not None:
                f_new = P.value(W_new)
                if f_new <= ref - 1e-4 * t * pg_sq:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            warnings.warn(
                "dictionary line search exhausted its backtracking budget; "
                "keeping the current iterate",
                LineSearchFailed,
            )
            break
        s = W_new - W
        pg_new = _project_tangent(W_new, P.grad(W_new))
        y = pg_new - pg
        sy = float((s * y).sum())
        if sy != 0.0 and math.isfinite(sy):
            if it % 2 == 0:
                tau = float((s * s).sum()) / abs(sy)
            else:
                tau = abs(sy) / float((y * y).sum())
            tau = min(max(tau, 1e-10), 1e10)
        else:
            tau = t
        W = W_new
        f = f_new
        hist.append(f)
        pg = pg_new
        pg_sq = float((pg * pg).sum())
    assert f <= hist[0] + 1e-10 * max(1.0, abs(hist[0])), "dictionary step ascended"
    return normalize_columns(W)


def update_Y(state: TrainerState, X: DataMatrix, hp: Hyperparams) -> np.ndarray:
    """Dual ascent on the splitting constraint."""
    W = state.W.data
    return state.Y + hp.beta * (state.Q - W.T @ X.data + (W.T @ W) @ state.Z.data)


def init_state(X: DataMatrix, hp: Hyperparams, seed) -> TrainerState:
    """Seeded Gaussian dictionary, zero codes, zero split and dual."""
    rng = np.random.default_rng(seed)
    W = normalize_columns(rng.standard_normal((X.n, hp.m)))
    shape = (hp.m, X.N)
    return TrainerState(
        W=W,
        Z=SparseCodeBatch(np.zeros(shape), hp.k),
        Q=np.zeros(shape),
        Y=np.zeros(shape),
    )


def train(X: DataMatrix, hp: Hyperparams, seed):
    """Run the alternating updates and return (dictionary, final state).

    Stops after outer_iters rounds or once the primal residual falls
    below primal_tol * sqrt(m N). Deterministic given (X, hp, seed).
    Each history record carries the Lagrangian value, primal residual,
    worst column-norm deviation, reconstruction error, and wall time.
    """
    state = init_state(X, hp, seed)
    stop = hp.primal_tol * math.sqrt(hp.m * X.N)
    for it in range(hp.outer_iters):
        tic = time.perf_counter()
        state.Z = update_Z(state, X, hp)
        state.Q = update_Q(state, X, hp)
        state.W = update_W(state, X, hp)
        state.Y = update_Y(state, X, hp)
        state.iteration = it + 1
        primal = primal_residual(state, X)
        colnorms = np.linalg.norm(state.W.data, axis=0)
        recon = float(np.linalg.norm(X.data - state.W.data @ state.Z.data))
        state.history.append(
            {
                "iteration": it + 1,
                "lagrangian": lagrangian_value(state, X, hp),
                "primal_residual": primal,
                "max_colnorm_dev": float(np.max(np.abs(colnorms - 1.0))),
                "recon_error": recon,
                "wall_ms": (time.perf_counter() - tic) * 1e3,
            }
        )
        if primal < stop:
            break
    return state.W, state
