"""Factorizations of matrices with inner-product-space entries.

The QR decomposition orthogonalizes columns in the geometry that the
shared entry spec induces on column vectors; pivoted QR adds greedy
column selection and is the engine behind the SVD, the pseudoinverse,
least squares, rank computation, and the two-sided projection that
produces low Tucker-rank approximants.

All rank decisions in this module use one relative tolerance ``rtol``
(default 1e-10) measured against the largest column norm or singular
value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import densela
from .core import BochnerMatrix, _with_whitened, adjoint_product, lmul, lp_norm, rmul, transpose
from .errors import BadRank, PivotBreakdown, RankDeficient, ShapeMismatch, ZeroMatrix
from .hilbert import HElement, InnerProductSpec, same_spec

DEFAULT_RTOL = 1e-10


@dataclass
class BochnerQr:
    """A (column-permuted) = Q R with Q of orthonormal columns.

    ``perm`` lists the source column of each position, 1-based; it is the
    identity for the non-pivoted decomposition. R is r x n with its
    leading r x r block upper triangular with positive diagonal.
    """

    Q: BochnerMatrix
    R: np.ndarray
    perm: tuple[int, ...]

    @property
    def rank(self) -> int:
        return self.Q.n


@dataclass
class BochnerSvd:
    """A = U diag(sigma) V.T with orthonormal U (entry-valued) and V (real)."""

    U: BochnerMatrix
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.sigma)


@dataclass
class BochnerLu:
    """A = L U with unit lower triangular real L.

    Each diagonal entry of U is orthogonal to the entries below it in the
    same column, the elimination analogue of an upper triangular factor.
    """

    L: np.ndarray
    U: BochnerMatrix


@dataclass
class TuckerForm:
    """Factored form X @ core @ Y: real m x rho, entry-valued rho x kappa, real kappa x n."""

    X: np.ndarray
    core: BochnerMatrix
    Y: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.X.shape[0], self.Y.shape[1])

    def densify(self) -> BochnerMatrix:
        return lmul(self.X, rmul(self.core, self.Y))


@dataclass
class ColumnSideForm:
    """Factored form B @ C with an entry-valued m x kappa left factor."""

    B: BochnerMatrix
    C: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.B.m, self.C.shape[1])

    def densify(self) -> BochnerMatrix:
        return rmul(self.B, self.C)


@dataclass
class DyadicForm:
    """Sum of rank-one terms g * (u v.T) with entry-valued coefficients g."""

    m: int
    n: int
    spec: InnerProductSpec
    terms: list = field(default_factory=list)  # (g: HElement, u: (m,), v: (n,))

    def append(self, g: HElement, u: np.ndarray, v: np.ndarray) -> None:
        same_spec(self.spec, g.spec)
        self.terms.append((g, np.asarray(u, dtype=float), np.asarray(v, dtype=float)))

    def densify(self) -> BochnerMatrix:
        data = np.zeros((self.m, self.n, self.spec.dim))
        if self.terms:
            G = np.stack([g.coeffs for g, _, _ in self.terms])
            U = np.stack([u for _, u, _ in self.terms])
            V = np.stack([v for _, _, v in self.terms])
            data = np.einsum("sm,sn,sd->mnd", U, V, G)
        return BochnerMatrix(data, self.spec, _copy=False)

    def __len__(self) -> int:
        return len(self.terms)


def _qr_engine(A: BochnerMatrix, rtol: float, pivot: bool):
    """Modified Gram-Schmidt on columns, with reorthogonalization of each
    selected column and optional greedy pivoting on residual column norms."""
    m, n, dim = A.data.shape
    raw = A.data.copy()
    whi = A.whitened().copy()
    orig_norms = np.sqrt(np.einsum("ijd,ijd->j", whi, whi))
    max_orig = float(np.max(orig_norms))
    if pivot and max_orig == 0.0:
        raise ZeroMatrix("pivoted QR of a zero matrix is undefined")

    q_raw: list[np.ndarray] = []
    q_whi: list[np.ndarray] = []
    order: list[int] = []
    R = np.zeros((n, n))
    active = np.ones(n, dtype=bool)

    for step in range(n):
        res_norms = np.sqrt(np.maximum(np.einsum("ijd,ijd->j", whi, whi), 0.0))
        if pivot:
            masked = np.where(active, res_norms, -1.0)
            j = int(np.argmax(masked))
            if res_norms[j] <= rtol * max_orig:
                break
        else:
            j = step
            if res_norms[j] <= rtol * orig_norms[j] or orig_norms[j] == 0.0:
                raise RankDeficient(f"column {j + 1} is numerically dependent")
        v_w = whi[:, j, :].copy()
        v_r = raw[:, j, :].copy()
        for t, (qw, qr_) in enumerate(zip(q_whi, q_raw)):  # reorthogonalize
            c = float(np.sum(qw * v_w))
            v_w -= c * qw
            v_r -= c * qr_
            R[t, j] += c
        nrm = float(np.sqrt(np.sum(v_w * v_w)))
        if pivot and nrm <= rtol * max_orig:
            active[j] = False
            continue
        if not pivot and nrm <= rtol * orig_norms[j]:
            raise RankDeficient(f"column {j + 1} is numerically dependent")
        qw = v_w / nrm
        qr_ = v_r / nrm
        coeff = np.einsum("md,mjd->j", qw, whi)
        coeff[order] = 0.0  # processed columns stay exactly zeroed
        coeff[j] = nrm
        whi -= coeff[None, :, None] * qw[:, None, :]
        raw -= coeff[None, :, None] * qr_[:, None, :]
        s = len(order)
        R[s, :] += coeff
        R[s, j] = nrm
        q_whi.append(qw)
        q_raw.append(qr_)
        order.append(j)
        active[j] = False

    r = len(order)
    if r == 0:
        raise ZeroMatrix("matrix has no numerically independent columns")
    Q = _with_whitened(
        np.ascontiguousarray(np.stack(q_raw, axis=1)),
        A.spec,
        np.stack(q_whi, axis=1),
    )
    rest = [j for j in range(n) if j not in set(order)]
    perm0 = order + rest
    R_out = R[:r, :][:, perm0]
    return Q, R_out, tuple(p + 1 for p in perm0)


def bochner_qr(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> BochnerQr:
    """Thin QR of a full-column-rank matrix; unique, hence deterministic.

    Raises RankDeficient when a column's residual norm falls below rtol
    times the column's original norm (use pivoted_qr then).
    """
    Q, R, perm = _qr_engine(A, rtol, pivot=False)
    return BochnerQr(Q=Q, R=R, perm=perm)


def pivoted_qr(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> BochnerQr:
    """Greedy column-pivoted QR; stops at the numerical column rank.

    Columns are accepted by decreasing residual norm until the best
    remaining residual drops below rtol times the largest original
    column norm. Raises ZeroMatrix for a zero input.
    """
    Q, R, perm = _qr_engine(A, rtol, pivot=True)
    return BochnerQr(Q=Q, R=R, perm=perm)


def bochner_svd(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> BochnerSvd:
    """Compact SVD built from pivoted QR plus a dense SVD of its R factor."""
    qr = pivoted_qr(A, rtol)
    inv = np.empty(A.n, dtype=int)
    inv[np.asarray(qr.perm) - 1] = np.arange(A.n)
    B = qr.R[:, inv]  # columns back in original order: A = Q @ B
    res = densela.dense_svd(B, rtol)
    U = rmul(qr.Q, res.U)
    return BochnerSvd(U=U, sigma=res.sigma, V=res.V)


def truncated_svd(S: BochnerSvd, kappa: int) -> ColumnSideForm:
    """Best column-rank-kappa approximant, as (U_k Sigma_k) @ V_k.T.

    The truncation error in the l2(H) norm equals
    sqrt(sum of the squared dropped singular values).
    """
    if not 1 <= kappa <= S.rank:
        raise BadRank(f"kappa must lie in [1, {S.rank}], got {kappa}")
    B_data = S.U.data[:, :kappa, :] * S.sigma[None, :kappa, None]
    B = BochnerMatrix(B_data, S.U.spec, _copy=False)
    return ColumnSideForm(B=B, C=S.V[:, :kappa].T.copy())


def truncation_error(S: BochnerSvd, kappa: int) -> float:
    """sqrt(sum_{i>kappa} sigma_i^2), the exact l2(H) truncation error."""
    if not 1 <= kappa <= S.rank:
        raise BadRank(f"kappa must lie in [1, {S.rank}], got {kappa}")
    tail = S.sigma[kappa:]
    return float(np.sqrt(np.sum(tail * tail)))


def pinv_apply(S: BochnerSvd, y: BochnerMatrix) -> np.ndarray:
    """Apply the pseudoinverse V Sigma^-1 U* to a column vector of entries."""
    same_spec(S.U.spec, y.spec)
    if y.m != S.U.m or y.n != 1:
        raise ShapeMismatch(f"expected a {S.U.m} x 1 column, got {y.shape}")
    c = adjoint_product(S.U, y)[:, 0]
    return S.V @ (c / S.sigma)


def pinv_apply_matrix(S: BochnerSvd, B: BochnerMatrix) -> np.ndarray:
    """Columnwise pseudoinverse application; returns an n x k real matrix."""
    same_spec(S.U.spec, B.spec)
    if B.m != S.U.m:
        raise ShapeMismatch(f"column heights differ: {B.m} vs {S.U.m}")
    C = adjoint_product(S.U, B)
    return S.V @ (C / S.sigma[:, None])


def least_squares(A: BochnerMatrix, B: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Minimizer X of ||A X - B|| in the l2(H) norm, columnwise.

    A zero A yields the zero solution (pseudoinverse convention).
    """
    same_spec(A.spec, B.spec)
    if A.m != B.m:
        raise ShapeMismatch(f"column heights differ: {A.m} vs {B.m}")
    if lp_norm(A, np.inf) == 0.0:
        return np.zeros((A.n, B.n))
    return pinv_apply_matrix(bochner_svd(A, rtol), B)


def hosvd(A: BochnerMatrix, rho: int, kappa: int, rtol: float = DEFAULT_RTOL) -> TuckerForm:
    """Two-sided projection onto dominant singular subspaces of A and A.T.

    Returns X @ core @ Y with Tucker rank at most (rho, kappa); the error
    satisfies ||A - X core Y||^2 <= (column tail)^2 + (row tail)^2, which
    makes the result sqrt(2)-quasioptimal among Tucker approximants.
    """
    S_col = bochner_svd(A, rtol)
    S_row = bochner_svd(transpose(A), rtol)
    if not 1 <= rho <= S_row.rank:
        raise BadRank(f"rho must lie in [1, {S_row.rank}], got {rho}")
    if not 1 <= kappa <= S_col.rank:
        raise BadRank(f"kappa must lie in [1, {S_col.rank}], got {kappa}")
    X = S_row.V[:, :rho].copy()
    Vk = S_col.V[:, :kappa]
    core = lmul(X.T, rmul(A, Vk))
    return TuckerForm(X=X, core=core, Y=Vk.T.copy())


def hosvd_error_bound(S_col: BochnerSvd, S_row: BochnerSvd, rho: int, kappa: int) -> float:
    """sqrt(column tail^2 + row tail^2) for the two-sided projection."""
    col_tail = S_col.sigma[kappa:]
    row_tail = S_row.sigma[rho:]
    return float(np.sqrt(np.sum(col_tail * col_tail) + np.sum(row_tail * row_tail)))


def bochner_lu(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> BochnerLu:
    """Elimination A = L U orthogonalizing below-diagonal entries columnwise.

    Step k subtracts multiples of row k chosen so every entry below the
    diagonal of column k becomes orthogonal to the diagonal entry. Raises
    PivotBreakdown when a pivot norm falls below rtol times the largest
    entry norm of A.
    """
    if A.m != A.n:
        raise ShapeMismatch(f"LU requires a square matrix, got {A.m} x {A.n}")
    n = A.n
    raw = A.data.copy()
    whi = A.whitened().copy()
    max_entry = float(np.max(A.entry_norms()))
    L = np.eye(n)
    for k in range(n - 1):
        w = whi[k, k, :]
        nrm2 = float(np.sum(w * w))
        if np.sqrt(nrm2) <= rtol * max_entry:
            raise PivotBreakdown(k + 1)
        alphas = np.einsum("id,d->i", whi[k + 1 :, k, :], w) / nrm2
        raw[k + 1 :] -= alphas[:, None, None] * raw[k][None, :, :]
        whi[k + 1 :] -= alphas[:, None, None] * whi[k][None, :, :]
        L[k + 1 :, k] = alphas
    return BochnerLu(L=L, U=BochnerMatrix(raw, A.spec, _copy=False))


def column_rank(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> int:
    """Numerical dimension of the span of the columns; 0 for a zero matrix."""
    if lp_norm(A, np.inf) == 0.0:
        return 0
    return pivoted_qr(A, rtol).rank


def row_rank(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> int:
    return column_rank(transpose(A), rtol)


def tucker_rank(A: BochnerMatrix, rtol: float = DEFAULT_RTOL) -> tuple[int, int]:
    """(row rank, column rank) pair."""
    return (row_rank(A, rtol), column_rank(A, rtol))
