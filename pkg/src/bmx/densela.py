"""Self-contained dense kernels for real matrices: QR, SVD, pseudoinverse.

Everything in this module works on plain float64 ndarrays (row-major,
real entries). The SVD is a one-sided Jacobi iteration, chosen for its
accuracy on the small matrices this package deals with; no LAPACK
factorization routines are used here so the kernels stay self-contained
and bit-deterministic across runs.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import RankDeficient, ZeroMatrix

DEFAULT_RTOL = 1e-12


class DenseSvdResult(NamedTuple):
    """Compact SVD: M = U @ diag(sigma) @ V.T with sigma > 0 nonincreasing."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.sigma)


def as_matrix(M) -> np.ndarray:
    """Validate and return a 2-D float64 array with finite entries."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return A


def dense_qr(M, rtol: float = DEFAULT_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of a full-column-rank matrix by modified Gram-Schmidt.

    One reorthogonalization pass keeps Q.T @ Q close to the identity.
    R has a positive diagonal, which makes the factorization unique and
    the function deterministic.

    Raises RankDeficient when a column's residual norm drops below
    rtol times that column's original norm.
    """
    A = as_matrix(M)
    m, n = A.shape
    Q = np.zeros((m, n))
    R = np.zeros((n, n))
    work = A.copy()
    col_norms = np.sqrt(np.sum(A * A, axis=0))
    for j in range(n):
        v = work[:, j].copy()
        for _ in range(2):  # MGS + one reorthogonalization
            for i in range(j):
                c = Q[:, i] @ v
                R[i, j] += c
                v -= c * Q[:, i]
        nrm = float(np.sqrt(v @ v))
        if nrm <= rtol * col_norms[j] or col_norms[j] == 0.0:
            raise RankDeficient(f"column {j + 1} is numerically dependent")
        R[j, j] = nrm
        Q[:, j] = v / nrm
    return Q, R


def _jacobi_sweeps(W: np.ndarray, V: np.ndarray, tol: float, max_sweeps: int) -> None:
    """Orthogonalize the columns of W in place by plane rotations.

    V accumulates the rotations so that W_final = W_initial @ V holds.
    """
    n = W.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp = W[:, p]
                wq = W[:, q]
                app = wp @ wp
                aqq = wq @ wq
                apq = wp @ wq
                if abs(apq) <= tol * np.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                new_p = cs * wp - sn * wq
                new_q = sn * wp + cs * wq
                W[:, p] = new_p
                W[:, q] = new_q
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = cs * vp - sn * vq
                V[:, q] = sn * vp + cs * vq
        if not rotated:
            return


def dense_svd(M, rtol: float = DEFAULT_RTOL) -> DenseSvdResult:
    """Compact SVD of a nonzero matrix via one-sided Jacobi.

    Singular values below rtol * sigma_max are dropped, so the returned
    rank is the numerical rank at that threshold. Raises ZeroMatrix on
    an identically zero input.
    """
    A = as_matrix(M)
    if A.size == 0 or np.max(np.abs(A)) == 0.0:
        raise ZeroMatrix("SVD of a zero matrix is undefined")
    m, n = A.shape
    transposed = m < n
    W = (A.T if transposed else A).copy()
    V = np.eye(W.shape[1])
    _jacobi_sweeps(W, V, tol=1e-15, max_sweeps=60)
    sigma = np.sqrt(np.sum(W * W, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    W = W[:, order]
    V = V[:, order]
    keep = sigma > rtol * sigma[0]
    sigma = sigma[keep]
    U = W[:, keep] / sigma
    V = V[:, keep]
    if transposed:
        U, V = V, U
    return DenseSvdResult(U=U, sigma=sigma, V=V)


def dense_pinv(M, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse via the compact SVD.

    A zero matrix maps to the zero matrix of transposed shape.
    """
    A = as_matrix(M)
    if A.size == 0 or np.max(np.abs(A)) == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    U, sigma, V = dense_svd(A, rtol)
    return (V / sigma) @ U.T


def numerical_rank(M, rtol: float = DEFAULT_RTOL) -> int:
    """Number of singular values above rtol * sigma_max; 0 for a zero matrix."""
    A = as_matrix(M)
    if A.size == 0 or np.max(np.abs(A)) == 0.0:
        return 0
    return dense_svd(A, rtol).rank
