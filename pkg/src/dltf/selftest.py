"""Self-contained optimality checks for the prox solver.

The reference point is a batched plain subgradient descent on the prox
objective with diminishing steps and best-iterate tracking. It is
slow but independent of the pool-adjacent-violators machinery, so agreement
certifies global optimality (the objective is strongly convex).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prox

PAD_M = 10
GAMMA_CHOICES = (0.0, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class ProxInstance:
    c: np.ndarray
    kprime: int
    gamma: float


def random_instances(count: int, seed: int) -> list[ProxInstance]:
    """Instances with m <= PAD_M, k' in [1, m], gamma cycling through
    GAMMA_CHOICES, and coefficient scales spanning three decades.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        m = int(rng.integers(1, PAD_M + 1))
        kprime = int(rng.integers(1, m + 1))
        gamma = GAMMA_CHOICES[i % len(GAMMA_CHOICES)]
        scale = 10.0 ** rng.uniform(-1, 1)
        c = scale * rng.standard_normal(m)
        out.append(ProxInstance(c=c, kprime=kprime, gamma=gamma))
    return out


def subgradient_best(instances: list[ProxInstance], total_iters: int = 100_000,
                     starts: int = 5, seed: int = 0) -> np.ndarray:
    """Best objective reached by subgradient descent, per instance.

    All instances are zero-padded to PAD_M columns and every (instance,
    start) pair becomes one row of a single batch; padding coordinates have
    c = 0 so their optimum is 0 and the padded problem's optimal value
    equals the original one. The iteration budget is split across starts.
    """
    rng = np.random.default_rng(seed)
    B = len(instances)
    R = B * starts
    C = np.zeros((R, PAD_M))
    kp = np.zeros(R, dtype=np.int64)
    gam = np.zeros(R)
    for i, inst in enumerate(instances):
        rows = slice(i * starts, (i + 1) * starts)
        C[rows, :inst.c.size] = inst.c
        kp[rows] = inst.kprime
        gam[rows] = inst.gamma

    iters = max(1, total_iters // starts)
    scale = np.maximum(np.abs(C).max(axis=1), 1.0)
    q = rng.standard_normal((R, PAD_M)) * scale[:, None]
    q[::starts] = C[::starts]  # one start from c itself
    best = np.full(R, np.inf)
    rows = np.arange(R)
    gcol = gam[:, None]
    for t in range(iters):
        q2 = q * q
        order = np.argsort(-q2, axis=1, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(PAD_M)[None, :], axis=1)
        mask = ranks < kp[:, None]
        sorted_sq = np.take_along_axis(q2, order, axis=1)
        top = np.cumsum(sorted_sq, axis=1)[rows, kp - 1]
        diff = q - C
        obj = gam * top + np.einsum("ij,ij->i", diff, diff)
        np.minimum(best, obj, out=best)
        # strongly convex with modulus 2 from the quadratic term
        step = 1.0 / (2.0 * (t + 1))
        q = q - step * (2.0 * diff + 2.0 * gcol * q * mask)
    return best.reshape(B, starts).min(axis=1)


def direction_sweep_margin(inst: ProxInstance, q: np.ndarray, ndirs: int,
                           eps: float, seed: int) -> float:
    """Smallest objective increase over random unit perturbations of q."""
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((ndirs, inst.c.size))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    base = prox.prox_objective(q, inst.c, inst.kprime, inst.gamma)
    worst = np.inf
    for d in D:
        val = prox.prox_objective(q + eps * d, inst.c, inst.kprime, inst.gamma)
        worst = min(worst, val - base)
    return float(worst)


def oracle_equivalence_suite(count: int = 1000, seed: int = 12345,
                             total_iters: int = 100_000, starts: int = 5,
                             ndirs: int = 200, eps: float = 1e-5) -> dict:
    """Run the full optimality suite and report the worst margins.

    Returns a dict with max_gap (solver objective minus oracle best,
    positive means the solver did worse), min_sweep_margin, and pass flags
    at the 1e-9 / -1e-10 thresholds.
    """
    instances = random_instances(count, seed)
    oracle = subgradient_best(instances, total_iters=total_iters,
                              starts=starts, seed=seed + 1)
    max_gap = -np.inf
    min_margin = np.inf
    for i, inst in enumerate(instances):
        q = prox.prox_k2(inst.c, inst.kprime, inst.gamma)
        val = prox.prox_objective(q, inst.c, inst.kprime, inst.gamma)
        max_gap = max(max_gap, val - oracle[i])
        min_margin = min(min_margin,
                         direction_sweep_margin(inst, q, ndirs, eps, seed + 2 + i))
    return {
        "count": count,
        "max_gap": float(max_gap),
        "min_sweep_margin": float(min_margin),
        "oracle_ok": bool(max_gap <= 1e-9),
        "sweep_ok": bool(min_margin >= -1e-10),
    }
