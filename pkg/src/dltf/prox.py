"""Proximal operator of the squared (k,2) gauge norm.

The (k,2) norm of a vector is the Euclidean norm of its k
largest-magnitude entries. This module evaluates

    prox(c) = argmin_q  gamma * ||q||_{k,2}^2 + ||q - c||^2

exactly in O(m log m): reduce to nonnegative ascending-sorted input by
sign stripping and a stable sort, shrink the candidate top-k block by
1/(1+gamma), then repair any order violations with weighted isotonic
regression (pool-adjacent-violators). Signs and positions are restored
afterwards. ``reduce`` is the isotonic solver and is usable on its own.

The PAV stack is iterative on purpose: recursion depth would scale with
the worst-case merge chain, which is m-1.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidK,
    NegativeInput,
    NonpositiveWeight,
    UnsortedInput,
)


def _check_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_kprime(kprime: int, m: int) -> int:
    kprime = int(kprime)
    if kprime < 1 or kprime > m:
        raise InvalidK(f"k'={kprime} outside [1, {m}]")
    return kprime


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma < 0.0:
        raise ValueError(f"gamma must be finite and nonnegative, got {gamma}")
    return gamma


def k2_norm_sq(v, k: int) -> float:
    """Sum of the k largest squared magnitudes of v."""
    arr = _check_vector(v, "v")
    k = _check_kprime(k, arr.size)
    sq = arr * arr
    if k == arr.size:
        return float(np.sum(sq))
    return float(np.sum(np.partition(sq, arr.size - k)[arr.size - k:]))


def _pav(u: np.ndarray, t: np.ndarray):
    """Pool adjacent violators on (values u, weights t); returns block
    values, block lengths, and the number of merges performed."""
    uu = u.tolist()
    tt = t.tolist()
    J = len(uu)
    vals = [0.0] * J
    wts = [0.0] * J
    cnts = [0] * J
    top = -1
    merges = 0
    for i in range(J):
        v = uu[i]
        w = tt[i]
        c = 1
        while top >= 0 and vals[top] > v:
            pw = wts[top]
            v = (vals[top] * pw + v * w) / (pw + w)
            w = pw + w
            c += cnts[top]
            top -= 1
            merges += 1
        top += 1
        vals[top] = v
        wts[top] = w
        cnts[top] = c
    return vals[: top + 1], cnts[: top + 1], merges


def reduce(u, t, return_merges: bool = False):
    """Weighted isotonic regression: the nondecreasing x minimizing
    sum_j t_j (x_j - u_j)^2.

    Pooled blocks take the t-weighted mean of their members. With
    ``return_merges`` the merge count is returned as a second value
    (at most len(u) - 1).
    """
    u = _check_vector(u, "u")
    t = _check_vector(t, "t")
    if u.shape != t.shape:
        raise DimensionMismatch(f"u and t differ in shape: {u.shape} vs {t.shape}")
    if np.any(t <= 0.0):
        j = int(np.flatnonzero(t <= 0.0)[0])
        raise NonpositiveWeight(f"weight t[{j}]={t[j]:g} must be positive")
    vals, cnts, merges = _pav(u, t)
    x = np.repeat(vals, cnts)
    if return_merges:
        return x, merges
    return x


def prox_sorted_positive(c, kprime: int, gamma: float, return_merges: bool = False):
    """Prox of the squared (k',2) norm for nonnegative ascending input.

    The last k' positions are the candidate top block: their targets
    shrink by 1/(1+gamma) with weight 1+gamma, the rest keep weight 1,
    and isotonic regression repairs any violation at the block boundary.
    Validation is always on; there is no unsafe fast path.
    """
    c = _check_vector(c, "c")
    m = c.size
    kprime = _check_kprime(kprime, m)
    gamma = _check_gamma(gamma)
    if np.any(np.diff(c) < 0.0):
        raise UnsortedInput("c must be nondecreasing")
    if c[0] < 0.0:
        raise NegativeInput(f"c must be nonnegative, got c[0]={c[0]:g}")
    u = c.copy()
    t = np.ones(m)
    u[m - kprime:] /= 1.0 + gamma
    t[m - kprime:] = 1.0 + gamma
    x, merges = reduce(u, t, return_merges=True)
    if return_merges:
        return x, merges
    return x


def prox_k2(c, kprime: int, gamma: float, return_merges: bool = False):
    """Prox of the squared (k',2) norm at an arbitrary vector.

    Signs and positions are round-tripped through a stable magnitude
    sort (ties keep original index order), so the output preserves signs
    and the magnitude ordering of the input; zero entries stay zero.
    """
    c = _check_vector(c, "c")
    kprime = _check_kprime(kprime, c.size)
    gamma = _check_gamma(gamma)
    mags = np.abs(c)
    order = np.argsort(mags, kind="stable")
    res = prox_sorted_positive(mags[order], kprime, gamma, return_merges=True)
    sorted_q, merges = res
    q = np.empty_like(c)
    q[order] = sorted_q
    q *= np.sign(c)
    if return_merges:
        return q, merges
    return q


def prox_objective(q, c, kprime: int, gamma: float) -> float:
    """gamma * ||q||_{k',2}^2 + ||q - c||^2, the quantity prox_k2 minimizes."""
    q = _check_vector(q, "q")
    c = _check_vector(c, "c")
    if q.shape != c.shape:
        raise DimensionMismatch(f"q and c differ in shape: {q.shape} vs {c.shape}")
    gamma = _check_gamma(gamma)
    d = q - c
    return gamma * k2_norm_sq(q, kprime) + float(d @ d)
