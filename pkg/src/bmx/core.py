"""Dense matrices with inner-product-space entries and their algebra.

A BochnerMatrix is an m x n grid of entries from one shared inner-product
space, stored as an (m, n, dim) coefficient array. There is no product of
two such matrices; instead they are multiplied by ordinary real matrices
from either side, transposed, and contracted against each other through
the adjoint product, which yields an ordinary real matrix.

Indices at this interface are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds, ShapeMismatch
from .hilbert import HElement, InnerProductSpec, same_spec


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing 1-based positions selecting rows or columns."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 1 for i in idx):
            raise OutOfBounds(f"indices must be >= 1, got {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing, got {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, iterable) -> "IndexSet":
        """Build from any iterable, sorting and deduplicating."""
        return cls(tuple(sorted(set(int(i) for i in iterable))))

    def array0(self) -> np.ndarray:
        """0-based numpy index array."""
        return np.asarray(self.indices, dtype=int) - 1

    def check_within(self, bound: int, what: str = "index") -> None:
        if self.indices and self.indices[-1] > bound:
            raise OutOfBounds(f"{what} {self.indices[-1]} exceeds extent {bound}")

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


class BochnerMatrix:
    """m x n grid of HElements sharing one InnerProductSpec."""

    __slots__ = ("data", "spec", "_whitened")

    def __init__(self, data: np.ndarray, spec: InnerProductSpec, *, _copy: bool = True):
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 3:
            raise ValueError(f"expected (m, n, dim) coefficients, got shape {arr.shape}")
        m, n, dim = arr.shape
        if m < 1 or n < 1:
            raise ValueError(f"matrix extents must be positive, got {m} x {n}")
        if dim != spec.dim:
            raise ValueError(f"coefficient length {dim} does not match spec dim {spec.dim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients contain non-finite values")
        if _copy:
            arr = arr.copy()
        arr.flags.writeable = False
        self.data = arr
        self.spec = spec
        self._whitened = None

    @classmethod
    def from_entries(cls, grid) -> "BochnerMatrix":
        """Build from a rectangular nested sequence of HElements."""
        rows = [list(r) for r in grid]
        if not rows or not rows[0]:
            raise ValueError("entry grid must be nonempty")
        spec = rows[0][0].spec
        for r in rows:
            if len(r) != len(rows[0]):
                raise ValueError("entry grid is ragged")
            for e in r:
                same_spec(spec, e.spec)
        data = np.stack([np.stack([e.coeffs for e in r]) for r in rows])
        return cls(data, spec)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def entry(self, i: int, j: int) -> HElement:
        self._check(i, j)
        return HElement(self.data[i - 1, j - 1], self.spec)

    def whitened(self) -> np.ndarray:
        """Coefficients mapped so entrywise inner products are dot products.

        Computed once per matrix; safe to cache because the data is frozen.
        """
        if self._whitened is None:
            w = self.spec.whiten(self.data)
            w.flags.writeable = False
            self._whitened = w
        return self._whitened

    def entry_norms(self) -> np.ndarray:
        """m x n array of the entry norms."""
        w = self.whitened()
        return np.sqrt(np.einsum("ijd,ijd->ij", w, w))

    def _check(self, i: int, j: int) -> None:
        if not (1 <= i <= self.m and 1 <= j <= self.n):
            raise OutOfBounds(f"entry ({i}, {j}) outside {self.m} x {self.n} matrix")

    def __repr__(self):
        return f"BochnerMatrix({self.m}x{self.n}, dim={self.spec.dim}, kind={self.spec.kind})"


def _with_whitened(data: np.ndarray, spec: InnerProductSpec, whit: np.ndarray | None) -> BochnerMatrix:
    out = BochnerMatrix(data, spec, _copy=False)
    if whit is not None:
        whit = np.ascontiguousarray(whit)
        whit.flags.writeable = False
        out._whitened = whit
    return out


def mode_multiply(side: str, M, A: BochnerMatrix) -> BochnerMatrix:
    """Multiply by an ordinary matrix: left gives M @ A, right gives A @ M."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D factor, got shape {M.shape}")
    if side == "left":
        if M.shape[1] != A.m:
            raise ShapeMismatch(f"left factor has {M.shape[1]} columns, matrix has {A.m} rows")
        data = np.tensordot(M, A.data, axes=(1, 0))
        whit = None if A._whitened is None else np.tensordot(M, A._whitened, axes=(1, 0))
    elif side == "right":
        if M.shape[0] != A.n:
            raise ShapeMismatch(f"right factor has {M.shape[0]} rows, matrix has {A.n} columns")
        data = np.einsum("itd,tj->ijd", A.data, M)
        whit = None if A._whitened is None else np.einsum("itd,tj->ijd", A._whitened, M)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return _with_whitened(data, A.spec, whit)


def lmul(M, A: BochnerMatrix) -> BochnerMatrix:
    return mode_multiply("left", M, A)


def rmul(A: BochnerMatrix, M) -> BochnerMatrix:
    return mode_multiply("right", M, A)


def transpose(A: BochnerMatrix) -> BochnerMatrix:
    data = np.ascontiguousarray(np.swapaxes(A.data, 0, 1))
    whit = None if A._whitened is None else np.swapaxes(A._whitened, 0, 1)
    return _with_whitened(data, A.spec, whit)


def add(A: BochnerMatrix, B: BochnerMatrix) -> BochnerMatrix:
    same_spec(A.spec, B.spec)
    if A.shape != B.shape:
        raise ShapeMismatch(f"cannot add {A.shape} and {B.shape}")
    return BochnerMatrix(A.data + B.data, A.spec, _copy=False)


def subtract(A: BochnerMatrix, B: BochnerMatrix) -> BochnerMatrix:
    same_spec(A.spec, B.spec)
    if A.shape != B.shape:
        raise ShapeMismatch(f"cannot subtract {B.shape} from {A.shape}")
    return BochnerMatrix(A.data - B.data, A.spec, _copy=False)


def scale(alpha: float, A: BochnerMatrix) -> BochnerMatrix:
    return BochnerMatrix(alpha * A.data, A.spec, _copy=False)


def adjoint_product(A: BochnerMatrix, B: BochnerMatrix) -> np.ndarray:
    """Columnwise adjoint application: the nA x nB matrix of column inner products.

    Entry (i, j) is the l2(H) inner product of column j of B with column i
    of A. With B = A the result is symmetric positive semidefinite, and
    A has orthonormal columns exactly when it equals the identity.
    """
    same_spec(A.spec, B.spec)
    if A.m != B.m:
        raise ShapeMismatch(f"column heights differ: {A.m} vs {B.m}")
    WA = A.whitened()
    WB = B.whitened()
    G = np.tensordot(WA, WB, axes=([0, 2], [0, 2]))
    if A is B:
        G = 0.5 * (G + G.T)
    return G


def apply_vector(A: BochnerMatrix, x) -> BochnerMatrix:
    """A @ x for a real vector x, returned as an m x 1 matrix."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return rmul(A, x)


def lp_norm(A: BochnerMatrix, p) -> float:
    """Entrywise lp norm of the grid of entry norms; p is 1, 2, or inf."""
    norms = A.entry_norms()
    if p == 1:
        return float(np.sum(norms))
    if p == 2:
        return float(np.sqrt(np.sum(norms * norms)))
    if p in (np.inf, "inf", float("inf")):
        return float(np.max(norms))
    raise ValueError(f"p must be 1, 2 or inf, got {p!r}")


def l2_inner(A: BochnerMatrix, B: BochnerMatrix) -> float:
    """Sum of entrywise inner products; induces the l2(H) norm."""
    same_spec(A.spec, B.spec)
    if A.shape != B.shape:
        raise ShapeMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    return float(np.sum(A.whitened() * B.whitened()))


def _top_eigpair(G: np.ndarray) -> tuple[float, np.ndarray]:
    vals, vecs = np.linalg.eigh(G)
    return float(vals[-1]), vecs[:, -1]


def spectral_norm_lb(A: BochnerMatrix, restarts: int = 8, iters: int = 50) -> float:
    """Certified lower bound on the spectral norm by alternating maximization.

    Maximizes ||sum_ij a_ij x_i y_j||_H over unit vectors x, y. Each half
    step is a top-eigenvector problem on a small Gram matrix. The first
    restart is seeded at the basis pair of the largest-norm entry, which
    makes the result at least the entrywise max norm; the remaining
    restarts use random unit vectors from a fixed-seed generator, so the
    bound is deterministic.
    """
    norms = A.entry_norms()
    i0, j0 = np.unravel_index(int(np.argmax(norms)), norms.shape)
    W = A.whitened()
    m, n = A.shape
    rng = np.random.default_rng(0x5EED)

    def climb(y: np.ndarray) -> float:
        best = 0.0
        for _ in range(iters):
            col = np.tensordot(W, y, axes=(1, 0))  # (m, dim): entries of A @ y
            lam, x = _top_eigpair(col @ col.T)
            row = np.tensordot(W, x, axes=(0, 0))  # (n, dim): entries of A.T @ x
            lam, y = _top_eigpair(row @ row.T)
            val = np.sqrt(max(lam, 0.0))
            if val <= best * (1.0 + 1e-10):
                return max(val, best)
            best = val
        return best

    start = np.zeros(n)
    start[j0] = 1.0
    best = max(float(norms[i0, j0]), climb(start))
    for _ in range(max(0, restarts - 1)):
        y = rng.standard_normal(n)
        y /= np.linalg.norm(y)
        best = max(best, climb(y))
    return best


def stock_dimension(A: BochnerMatrix, rtol: float = 1e-10, max_gram: int = 512):
    """Dimension of the span of all entries, as (value, lower_bound).

    Computed as the numerical rank of the Gram matrix of the entries
    (eigenvalues above rtol times the largest). When the matrix holds
    more than max_gram entries, the entries are first compressed into
    max_gram random mixtures; the result is then only a lower bound on
    the true span dimension, and the flag says so.
    """
    W = A.whitened().reshape(A.m * A.n, A.spec.dim)
    compressed = W.shape[0] > max_gram
    if compressed:
        rng = np.random.default_rng(0x570C)
        W = rng.standard_normal((max_gram, W.shape[0])) @ W
    G = W @ W.T
    vals = np.linalg.eigvalsh(0.5 * (G + G.T))
    top = float(vals[-1]) if len(vals) else 0.0
    if top <= 0.0:
        return 0, compressed
    value = int(np.sum(vals > rtol * top))
    return value, compressed


def submatrix(A: BochnerMatrix, I: IndexSet, J: IndexSet) -> BochnerMatrix:
    """Rows I and columns J of A, in the order listed (1-based)."""
    I.check_within(A.m, "row index")
    J.check_within(A.n, "column index")
    if len(I) == 0 or len(J) == 0:
        raise OutOfBounds("index sets must be nonempty")
    data = A.data[np.ix_(I.array0(), J.array0())]
    whit = None if A._whitened is None else A._whitened[np.ix_(I.array0(), J.array0())]
    return _with_whitened(np.ascontiguousarray(data), A.spec, whit)
