"""Thresholded feature encoding.

The encoder keeps, per sample, the k entries of W^T x with the largest
magnitudes and zeroes the rest. Selection uses a partial partition rather
than a full sort; when the k-th and (k+1)-th magnitudes tie, the lower
index wins, which makes the output independent of partition order.
"""

from __future__ import annotations

import numpy as np

from .core import DataMatrix, Dictionary
from .errors import DimensionMismatch, InvalidK


def _check_k(k: int, m: int) -> int:
    k = int(k)
    if k < 1 or k > m:
        raise InvalidK(f"k={k} outside [1, {m}]")
    return k


def max_k_columns(M: np.ndarray, k: int) -> np.ndarray:
    """Apply the top-k magnitude threshold to every column of M."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected 2-d array, got shape {M.shape}")
    m = M.shape[0]
    k = _check_k(k, m)
    if k == m:
        return M.copy()
    A = np.abs(M)
    # Magnitude of the k-th largest entry per column, via partial selection.
    part = np.partition(A, m - k, axis=0)
    thresh = part[m - k]
    keep = A > thresh
    # Fill remaining slots among boundary ties in ascending index order.
    need = k - keep.sum(axis=0)
    tied = A == thresh
    rank = np.cumsum(tied, axis=0)
    keep |= tied & (rank <= need)
    return np.where(keep, M, 0.0)


def max_k(v: np.ndarray, k: int) -> np.ndarray:
    """Top-k magnitude threshold of a single vector.

    Exactly min(k, nnz(v)) entries survive with their original signed
    values (selected exact zeros contribute nothing to the support).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected 1-d array, got shape {v.shape}")
    return max_k_columns(v[:, None], k)[:, 0]


def encode_batch(W: Dictionary, X: DataMatrix, k: int) -> np.ndarray:
    """Thresholded features for every column of X, as an m x N matrix."""
    if W.n != X.n:
        raise DimensionMismatch(f"dictionary has n={W.n}, data has n={X.n}")
    _check_k(k, W.m)
    return max_k_columns(W.data.T @ X.data, k)


def support(v: np.ndarray) -> np.ndarray:
    """Boolean mask of exactly-nonzero entries."""
    return np.asarray(v) != 0


def ave_dif(Z_hat: np.ndarray, Z_ref: np.ndarray) -> float:
    """Average support difference between two code batches.

    Counts per column the entries on which the supports disagree, halves
    the count, and averages over columns. Symmetric in its arguments and
    bounded by max nnz per column; identical supports give 0.
    """
    Z_hat = np.asarray(Z_hat)
    Z_ref = np.asarray(Z_ref)
    if Z_hat.shape != Z_ref.shape:
        raise DimensionMismatch(f"code shapes differ: {Z_hat.shape} vs {Z_ref.shape}")
    if Z_hat.ndim != 2:
        raise DimensionMismatch(f"expected 2-d code batches, got shape {Z_hat.shape}")
    mism = (Z_hat != 0) ^ (Z_ref != 0)
    return float(mism.sum()) / (2.0 * Z_hat.shape[1])
