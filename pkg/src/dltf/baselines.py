"""Reference methods the benchmark compares against.

Provides a random-dictionary control, orthogonal matching pursuit for
per-sample sparse coding, and a K-SVD dictionary learner whose codes come
from OMP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .errors import DimensionMismatch, InvalidK, SingularSubproblem

RIDGE = 1e-12
RESIDUAL_FLOOR = 1e-10


def random_dictionary(n: int, m: int, seed: int) -> core.Dictionary:
    """Seeded Gaussian dictionary with unit-norm columns."""
    rng = np.random.default_rng(seed)
    return core.normalize_columns(rng.standard_normal((n, m)))


@dataclass(frozen=True)
class OmpResult:
    code: np.ndarray
    residual_norm: float
    atoms: tuple[int, ...]


def omp(W: core.Dictionary, x: np.ndarray, k: int) -> OmpResult:
    """Greedy sparse coding of one sample: pick the atom most correlated
    with the residual, refit all picked coefficients by least squares,
    repeat k times. Atoms are never reselected. Stops early if the
    residual is numerically zero.
    """
    n, m = W.data.shape
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != n:
        raise DimensionMismatch(f"sample has {x.shape[0]} rows, dictionary has {n}")
    if not 1 <= k <= m:
        raise InvalidK(f"k={k} outside [1, {m}]")

    picked: list[int] = []
    residual = x.copy()
    coef = np.zeros(0)
    for _ in range(k):
        rnorm = float(np.linalg.norm(residual))
        if rnorm < RESIDUAL_FLOOR:
            break
        corr = np.abs(W.data.T @ residual)
        corr[picked] = -1.0
        picked.append(int(np.argmax(corr)))
        S = W.data[:, picked]
        # normal equations with a tiny ridge; S has at most k <= m columns
        A = S.T @ S + RIDGE * np.eye(len(picked))
        try:
            coef = np.linalg.solve(A, S.T @ x)
        except np.linalg.LinAlgError as exc:
            raise SingularSubproblem(
                f"normal equations singular with atoms {picked}"
            ) from exc
        residual = x - S @ coef

    code = np.zeros(m)
    code[picked] = coef
    return OmpResult(code=code, residual_norm=float(np.linalg.norm(residual)),
                     atoms=tuple(picked))


def omp_batch(W: core.Dictionary, X: core.DataMatrix, k: int) -> np.ndarray:
    """Code every column of X independently with omp."""
    if X.data.shape[0] != W.data.shape[0]:
        raise DimensionMismatch("data rows do not match dictionary rows")
    m = W.data.shape[1]
    Z = np.zeros((m, X.data.shape[1]))
    for i in range(X.data.shape[1]):
        Z[:, i] = omp(W, X.data[:, i], k).code
    return Z


def _dominant_pair(R: np.ndarray, v0: np.ndarray,
                   iters: int = 50, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Dominant singular pair of the small residual block R (n x uses)
    by alternating power iteration, started from v0.
    Returns (u, s*v) with u unit-norm.
    """
    u = v0 / max(np.linalg.norm(v0), 1e-300)
    for _ in range(iters):
        v = R.T @ u
        u_new = R @ v
        nrm = np.linalg.norm(u_new)
        if nrm < 1e-300:
            return u, R.T @ u
        u_new /= nrm
        if np.linalg.norm(u_new - u) < tol:
            u = u_new
            break
        u = u_new
    return u, R.T @ u


def ksvd_train(X: core.DataMatrix, m: int, k: int, iters: int = 30,
               seed: int = 0) -> core.Dictionary:
    """K-SVD dictionary learning with OMP sparse coding.

    Each sweep recodes X with OMP, then updates atoms one at a time by the
    dominant singular pair of the residual restricted to the samples using
    that atom. Unused atoms are replaced by the currently worst-represented
    sample (each sample claimed at most once per sweep).
    """
    n, N = X.data.shape
    if not 1 <= k <= m:
        raise InvalidK(f"k={k} outside [1, {m}]")
    W = random_dictionary(n, m, seed).data.copy()

    for _ in range(iters):
        Z = omp_batch(core.Dictionary(W), X, k)
        E = X.data - W @ Z
        err = np.einsum("ij,ij->j", E, E)
        claimed: set[int] = set()
        for j in range(m):
            uses = np.flatnonzero(Z[j])
            if uses.size == 0:
                order = np.argsort(-err)
                # dedup reseed targets within a sweep; with more dead atoms
                # than samples, fall back to the worst sample
                pick = next((int(i) for i in order if int(i) not in claimed),
                            int(order[0]))
                claimed.add(pick)
                col = X.data[:, pick]
                nrm = np.linalg.norm(col)
                if nrm > 1e-12:
                    W[:, j] = col / nrm
                continue
            # residual block with atom j's contribution restored
            Rj = E[:, uses] + np.outer(W[:, j], Z[j, uses])
            u, sv = _dominant_pair(Rj, W[:, j])
            nz = np.flatnonzero(u)
            if nz.size and u[nz[0]] < 0:
                u, sv = -u, -sv
            W[:, j] = u
            Z[j, uses] = sv
            E[:, uses] = Rj - np.outer(u, sv)
    return core.normalize_columns(W)
