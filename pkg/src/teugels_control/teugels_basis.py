"""Orthonormal polynomial bases under the jump-variance inner product.

The inner product pairs polynomials through mu(dx) = x^2 nu(dx) + sigma2 at the
origin.  Orthonormalizing the monomials 1, x, x^2, .. against mu yields the
coefficient rows a_{nj} that turn compensated power-jump increments into
pairwise strongly orthogonal martingale increments with unit bracket rate.

Construction is a rank-revealing Cholesky factorization of the monomial Gram
matrix with compensated summation; the basis is truncated at the measure rank
(number of atoms of mu, counting the diffusion atom at zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levy_model import LevyModel

PIVOT_RTOL = 1e-10


@dataclass(frozen=True)
class OrthoBasis:
    """Lower-triangular coefficient rows of an orthonormal polynomial family.

    Row n (1-based) holds the coefficients of q_{n-1}(x) = sum_j a_{nj} x^{j-1}.
    K is the effective size after rank truncation; requested_K is what the
    caller asked for.
    """

    model: LevyModel
    K: int
    requested_K: int
    A: np.ndarray

    @property
    def a11(self) -> float:
        return float(self.A[0, 0])

    def a(self, n: int, j: int) -> float:
        """Coefficient a_{nj}, 1-based, zero above the diagonal."""
        if not (1 <= n <= self.K and 1 <= j <= self.K):
            raise ValueError(f"coefficient index ({n},{j}) outside 1..{self.K}")
        return float(self.A[n - 1, j - 1])

    @property
    def rank_truncated(self) -> bool:
        return self.K < self.requested_K


def build_basis(model: LevyModel, K: int, pivot_rtol: float = PIVOT_RTOL) -> OrthoBasis:
    """Orthonormalize 1, x, .., x^{K-1} against mu; truncate at the measure rank.

    Needs model.i_max >= 2K for the Gram entries.  The first zero pivot of the
    moment-matrix Cholesky marks the rank; pivots are compared against
    pivot_rtol times the largest Gram diagonal.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    gram = model.gram(K)
    tol = pivot_rtol * float(np.max(np.diag(gram)))
    chol = np.zeros((K, K))
    rank = K
    for n in range(K):
        d = math.fsum([gram[n, n]] + [-chol[n, k] ** 2 for k in range(n)])
        if d <= tol:
            rank = n
            break
        chol[n, n] = math.sqrt(d)
        for m in range(n + 1, K):
            s = math.fsum([gram[m, n]] + [-chol[m, k] * chol[n, k] for k in range(n)])
            chol[m, n] = s / chol[n, n]
    if rank == 0:
        raise ValueError("measure has rank 0 (sigma2 = 0 and no jumps); no basis exists")
    coeffs = _invert_lower(chol[:rank, :rank])
    return OrthoBasis(model=model, K=rank, requested_K=K, A=coeffs)


def _invert_lower(low: np.ndarray) -> np.ndarray:
    """Forward substitution inverse of a lower-triangular matrix."""
    k = low.shape[0]
    inv = np.zeros_like(low)
    for j in range(k):
        inv[j, j] = 1.0 / low[j, j]
        for i in range(j + 1, k):
            s = math.fsum(low[i, m] * inv[m, j] for m in range(j, i))
            inv[i, j] = -s / low[i, i]
    return inv


def eval_q(basis: OrthoBasis, n: int, x) -> np.ndarray | float:
    """q_{n-1}(x), the n-th orthonormal polynomial (degree n-1), vectorized."""
    if not 1 <= n <= basis.K:
        raise ValueError(f"basis index {n} outside 1..{basis.K}")
    coeffs = basis.A[n - 1, :n]
    arr = np.asarray(x, dtype=np.float64)
    out = np.full(arr.shape, coeffs[-1], dtype=np.float64)
    for c in coeffs[-2::-1]:
        out = out * arr + c
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def eval_p(basis: OrthoBasis, n: int, x) -> np.ndarray | float:
    """p_n(x) = x * q_{n-1}(x); the jump of the n-th basis martingale at a jump of size x."""
    q = eval_q(basis, n, x)
    arr = np.asarray(x, dtype=np.float64)
    if np.isscalar(x) or arr.ndim == 0:
        return float(arr) * q
    return arr * q


def verify_orthonormal(basis: OrthoBasis) -> float:
    """Max-norm defect of A G A^T against the identity, with G rebuilt from the model."""
    gram = basis.model.gram(basis.K)
    defect = basis.A @ gram @ basis.A.T - np.eye(basis.K)
    return float(np.max(np.abs(defect)))
