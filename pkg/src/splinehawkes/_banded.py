"""Symmetric banded matrix helpers in scipy upper-banded storage.

All matrices here are m x m, symmetric, with half-bandwidth 3 (four
diagonals), stored as a (4, m) array where row 3 is the main diagonal and
row 3-d the d-th superdiagonal, matching ``scipy.linalg.cholesky_banded``.
Rank-one corrections rho * ones ones^T are handled through the
Sherman-Morrison identity and the matrix determinant lemma, keeping every
solve and log-determinant linear in m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

BAND = 4  # stored diagonals, i.e. half-bandwidth 3


def accumulate_outer(offsets: np.ndarray, vals: np.ndarray, weights: np.ndarray, m: int) -> np.ndarray:
    """sum_i weights[i] * v_i v_i^T for rows with four active entries each.

    ``vals[i]`` holds the active entries of row vector v_i starting at
    column ``offsets[i]``.
    """
    ab = np.zeros((BAND, m))
    for a in range(BAND):
        for b in range(a, BAND):
            w = weights * vals[:, a] * vals[:, b]
            ab[3 - (b - a)] += np.bincount(offsets + b, weights=w, minlength=m)
    return ab


def accumulate_vector(offsets: np.ndarray, vals: np.ndarray, weights: np.ndarray, m: int) -> np.ndarray:
    """sum_i weights[i] * v_i as a dense length-m vector."""
    idx = (offsets[:, None] + np.arange(BAND)[None, :]).ravel()
    wts = (weights[:, None] * vals).ravel()
    return np.bincount(idx, weights=wts, minlength=m)


def to_dense(ab: np.ndarray) -> np.ndarray:
    """Expand upper-banded storage into a full symmetric matrix."""
    m = ab.shape[1]
    out = np.zeros((m, m))
    for d in range(BAND):
        i = np.arange(m - d)
        out[i, i + d] = ab[BAND - 1 - d, d:]
        if d:
            out[i + d, i] = ab[BAND - 1 - d, d:]
    return out


def add_diagonal(ab: np.ndarray, value: float) -> np.ndarray:
    out = ab.copy()
    out[BAND - 1] += value
    return out


@dataclass(frozen=True)
class RankOneBandedFactor:
    """Cholesky-based factorization of B + rho * ones ones^T with B banded SPD."""

    chol: np.ndarray
    rho: float
    b_inv_ones: np.ndarray
    denom: float  # 1 + rho * ones^T B^{-1} ones

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = cho_solve_banded((self.chol, False), rhs)
        return y - (self.rho * np.sum(y) / self.denom) * self.b_inv_ones

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(self.chol[BAND - 1])) + np.log(self.denom))


def factor_rank_one(ab: np.ndarray, rho: float) -> RankOneBandedFactor:
    """Factor B + rho * ones ones^T; raises ``numpy.linalg.LinAlgError`` if B is not SPD."""
    try:
        chol = cholesky_banded(ab, lower=False)
    except Exception as exc:  # scipy raises LinAlgError subclasses
        raise np.linalg.LinAlgError(str(exc)) from exc
    if np.any(chol[BAND - 1] <= 0) or not np.all(np.isfinite(chol[BAND - 1])):
        raise np.linalg.LinAlgError("banded Cholesky produced a nonpositive pivot")
    ones = np.ones(ab.shape[1])
    b_inv_ones = cho_solve_banded((chol, False), ones)
    denom = 1.0 + rho * float(np.sum(b_inv_ones))
    if denom <= 0:
        raise np.linalg.LinAlgError("rank-one update is not positive definite")
    return RankOneBandedFactor(chol=chol, rho=rho, b_inv_ones=b_inv_ones, denom=denom)
