"""Cross components, rook pivoting, and adaptive cross-dyadic approximation.

The algorithms here touch a matrix only through a :class:`MatrixAccessor`,
which serves entries, rows, and columns from either an in-memory matrix
or an external oracle process, caching every fetched slice. Residuals
against accumulated rank-one corrections (or a factored cross component)
are evaluated lazily by deflation views, so the full residual matrix is
never materialized in oracle mode.

Indices are 1-based everywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BochnerMatrix, IndexSet, _with_whitened, lp_norm, transpose
from .decomp import DEFAULT_RTOL, DyadicForm, TuckerForm, bochner_svd, pinv_apply_matrix
from .errors import OutOfBounds, ZeroBlock, ZeroPivot
from .hilbert import HElement, InnerProductSpec

ZERO_PIVOT_RTOL = 1e-14  # pivots at or below this fraction of the largest norm seen are skipped


class _SliceSource:
    """Shared norm bookkeeping for accessors and deflation views.

    Subclasses provide ``row_raw/row_w/col_raw/col_w/entry_raw/entry_w``;
    the norm helpers update ``max_norm_seen``, the running maximum over
    every entry norm this source has evaluated, which the adaptive loop
    uses for its relative zero-pivot threshold.
    """

    max_norm_seen: float = 0.0

    def _track(self, norms) -> None:
        peak = float(np.max(norms)) if np.size(norms) else 0.0
        if peak > self.max_norm_seen:
            self.max_norm_seen = peak

    def row_norms(self, i: int) -> np.ndarray:
        w = self.row_w(i)
        norms = np.sqrt(np.einsum("nd,nd->n", w, w))
        self._track(norms)
        return norms

    def col_norms(self, j: int) -> np.ndarray:
        w = self.col_w(j)
        norms = np.sqrt(np.einsum("md,md->m", w, w))
        self._track(norms)
        return norms

    def entry_norm(self, i: int, j: int) -> float:
        w = self.entry_w(i, j)
        nrm = float(np.sqrt(w @ w))
        self._track(nrm)
        return nrm

    def _check(self, i: int | None = None, j: int | None = None) -> None:
        m, n = self.shape
        if i is not None and not 1 <= i <= m:
            raise OutOfBounds(f"row {i} outside extent {m}")
        if j is not None and not 1 <= j <= n:
            raise OutOfBounds(f"column {j} outside extent {n}")


class MatrixAccessor(_SliceSource):
    """Uniform entry/row/column access over a matrix or a remote oracle.

    Every slice obtained from the backing is cached, so repeated access
    is free and, in oracle mode, costs no second wire exchange. An entry
    already covered by a cached row or column is served from that cache.
    """

    def __init__(self, m: int, n: int, spec: InnerProductSpec, *, dense: BochnerMatrix | None = None,
                 fetcher=None, connection=None):
        if (dense is None) == (fetcher is None):
            raise ValueError("exactly one of dense or fetcher must be given")
        self._m = int(m)
        self._n = int(n)
        self._spec = spec
        self._dense = dense
        self._fetcher = fetcher
        self.connection = connection
        self._rows_raw: dict[int, np.ndarray] = {}
        self._cols_raw: dict[int, np.ndarray] = {}
        self._entries_raw: dict[tuple[int, int], np.ndarray] = {}
        self._rows_w: dict[int, np.ndarray] = {}
        self._cols_w: dict[int, np.ndarray] = {}
        self._entries_w: dict[tuple[int, int], np.ndarray] = {}
        self.max_norm_seen = 0.0

    @classmethod
    def from_matrix(cls, A: BochnerMatrix) -> "MatrixAccessor":
        return cls(A.m, A.n, A.spec, dense=A)

    @property
    def shape(self) -> tuple[int, int]:
        return (self._m, self._n)

    @property
    def spec(self) -> InnerProductSpec:
        return self._spec

    @property
    def is_oracle(self) -> bool:
        return self._fetcher is not None

    # -- raw/whitened slice access ------------------------------------

    def row_raw(self, i: int) -> np.ndarray:
        self._check(i=i)
        if self._dense is not None:
            return self._dense.data[i - 1]
        if i not in self._rows_raw:
            arr = np.asarray(self._fetcher.fetch_row(i - 1), dtype=float)
            self._validate(arr, (self._n, self._spec.dim), f"row {i}")
            self._rows_raw[i] = arr
        return self._rows_raw[i]

    def col_raw(self, j: int) -> np.ndarray:
        self._check(j=j)
        if self._dense is not None:
            return self._dense.data[:, j - 1]
        if j not in self._cols_raw:
            if len(self._rows_raw) == self._m:
                # every row is cached: assemble locally, no wire call
                arr = np.stack([self._rows_raw[i][j - 1] for i in range(1, self._m + 1)])
            else:
                arr = np.asarray(self._fetcher.fetch_col(j - 1), dtype=float)
                self._validate(arr, (self._m, self._spec.dim), f"column {j}")
            self._cols_raw[j] = arr
        return self._cols_raw[j]

    def entry_raw(self, i: int, j: int) -> np.ndarray:
        self._check(i=i, j=j)
        if self._dense is not None:
            return self._dense.data[i - 1, j - 1]
        if i in self._rows_raw:
            return self._rows_raw[i][j - 1]
        if j in self._cols_raw:
            return self._cols_raw[j][i - 1]
        key = (i, j)
        if key not in self._entries_raw:
            arr = np.asarray(self._fetcher.fetch_entry(i - 1, j - 1), dtype=float)
            self._validate(arr, (self._spec.dim,), f"entry ({i}, {j})")
            self._entries_raw[key] = arr
        return self._entries_raw[key]

    def row_w(self, i: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense.whitened()[i - 1]
        if i not in self._rows_w:
            self._rows_w[i] = self._spec.whiten(self.row_raw(i))
        return self._rows_w[i]

    def col_w(self, j: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense.whitened()[:, j - 1]
        if j not in self._cols_w:
            self._cols_w[j] = self._spec.whiten(self.col_raw(j))
        return self._cols_w[j]

    def entry_w(self, i: int, j: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense.whitened()[i - 1, j - 1]
        if i in self._rows_w:
            return self._rows_w[i][j - 1]
        if j in self._cols_w:
            return self._cols_w[j][i - 1]
        key = (i, j)
        if key not in self._entries_w:
            self._entries_w[key] = self._spec.whiten(self.entry_raw(i, j))
        return self._entries_w[key]

    @staticmethod
    def _validate(arr: np.ndarray, shape: tuple, what: str) -> None:
        if arr.shape != shape:
            raise ValueError(f"{what}: expected shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{what}: non-finite coefficients")

    # -- matrix-valued views ------------------------------------------

    def entry(self, i: int, j: int) -> HElement:
        return HElement(self.entry_raw(i, j), self._spec)

    def rows(self, I: IndexSet) -> BochnerMatrix:
        I.check_within(self._m, "row index")
        raw = np.stack([self.row_raw(i) for i in I])
        whi = np.stack([self.row_w(i) for i in I])
        return _with_whitened(raw, self._spec, whi)

    def cols(self, J: IndexSet) -> BochnerMatrix:
        J.check_within(self._n, "column index")
        raw = np.stack([self.col_raw(j) for j in J], axis=1)
        whi = np.stack([self.col_w(j) for j in J], axis=1)
        return _with_whitened(raw, self._spec, whi)

    def row(self, i: int) -> BochnerMatrix:
        return self.rows(IndexSet((i,)))

    def col(self, j: int) -> BochnerMatrix:
        return self.cols(IndexSet((j,)))

    def submatrix(self, I: IndexSet, J: IndexSet) -> BochnerMatrix:
        I.check_within(self._m, "row index")
        J.check_within(self._n, "column index")
        j0 = J.array0()
        raw = np.stack([self.row_raw(i)[j0] for i in I])
        whi = np.stack([self.row_w(i)[j0] for i in I])
        return _with_whitened(raw, self._spec, whi)

    def full(self) -> BochnerMatrix:
        """The whole matrix, fetched row by row and cached."""
        return self.rows(IndexSet(tuple(range(1, self._m + 1))))

    # -- oracle lifecycle ----------------------------------------------

    def close(self) -> None:
        if self.connection is not None:
            self.connection.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


@dataclass
class Dyad:
    """One rank-one cross correction g * (u v.T), normalized at its pivot."""

    g: HElement
    u: np.ndarray
    v: np.ndarray
    pivot: tuple[int, int]


@dataclass
class AbcdResult:
    """Index sets, accumulated dyadic approximant, and pivot history."""

    I: IndexSet
    J: IndexSet
    dyads: DyadicForm
    pivot_norms: list[float]
    accepted_iterations: list[int]
    pivots: list[tuple[int, int]]


class DyadDeflation(_SliceSource):
    """Residual view: base source minus a growing sum of dyads."""

    def __init__(self, base):
        self._base = base
        self._u: list[np.ndarray] = []
        self._v: list[np.ndarray] = []
        self._g_raw: list[np.ndarray] = []
        self._g_w: list[np.ndarray] = []
        self.max_norm_seen = 0.0

    @property
    def shape(self):
        return self._base.shape

    @property
    def spec(self):
        return self._base.spec

    def push(self, dyad: Dyad) -> None:
        self._u.append(dyad.u)
        self._v.append(dyad.v)
        self._g_raw.append(dyad.g.coeffs)
        self._g_w.append(self.spec.whiten(dyad.g.coeffs))

    def _deflate_row(self, i: int, gs: list[np.ndarray]) -> np.ndarray:
        ui = np.array([u[i - 1] for u in self._u])
        return np.einsum("s,sn,sd->nd", ui, np.stack(self._v), np.stack(gs))

    def _deflate_col(self, j: int, gs: list[np.ndarray]) -> np.ndarray:
        vj = np.array([v[j - 1] for v in self._v])
        return np.einsum("s,sm,sd->md", vj, np.stack(self._u), np.stack(gs))

    def row_raw(self, i):
        base = self._base.row_raw(i)
        return base if not self._u else base - self._deflate_row(i, self._g_raw)

    def row_w(self, i):
        base = self._base.row_w(i)
        return base if not self._u else base - self._deflate_row(i, self._g_w)

    def col_raw(self, j):
        base = self._base.col_raw(j)
        return base if not self._u else base - self._deflate_col(j, self._g_raw)

    def col_w(self, j):
        base = self._base.col_w(j)
        return base if not self._u else base - self._deflate_col(j, self._g_w)

    def _entry_correction(self, i, j, gs):
        w = np.array([u[i - 1] * v[j - 1] for u, v in zip(self._u, self._v)])
        return np.einsum("s,sd->d", w, np.stack(gs))

    def entry_raw(self, i, j):
        base = self._base.entry_raw(i, j)
        return base if not self._u else base - self._entry_correction(i, j, self._g_raw)

    def entry_w(self, i, j):
        base = self._base.entry_w(i, j)
        return base if not self._u else base - self._entry_correction(i, j, self._g_w)


class TuckerDeflation(_SliceSource):
    """Residual view: base source minus a factored X @ core @ Y approximant."""

    def __init__(self, base, form: TuckerForm):
        self._base = base
        self._X = form.X
        self._Y = form.Y
        self._g_raw = form.core.data
        self._g_w = form.core.whitened()
        self.max_norm_seen = 0.0

    @property
    def shape(self):
        return self._base.shape

    @property
    def spec(self):
        return self._base.spec

    def row_raw(self, i):
        corr = np.einsum("p,pqd,qn->nd", self._X[i - 1], self._g_raw, self._Y)
        return self._base.row_raw(i) - corr

    def row_w(self, i):
        corr = np.einsum("p,pqd,qn->nd", self._X[i - 1], self._g_w, self._Y)
        return self._base.row_w(i) - corr

    def col_raw(self, j):
        corr = np.einsum("mp,pqd,q->md", self._X, self._g_raw, self._Y[:, j - 1])
        return self._base.col_raw(j) - corr

    def col_w(self, j):
        corr = np.einsum("mp,pqd,q->md", self._X, self._g_w, self._Y[:, j - 1])
        return self._base.col_w(j) - corr

    def entry_raw(self, i, j):
        corr = np.einsum("p,pqd,q->d", self._X[i - 1], self._g_raw, self._Y[:, j - 1])
        return self._base.entry_raw(i, j) - corr

    def entry_w(self, i, j):
        corr = np.einsum("p,pqd,q->d", self._X[i - 1], self._g_w, self._Y[:, j - 1])
        return self._base.entry_w(i, j) - corr


def rank_one_cross(res, i: int, j: int, zero_tol: float = 0.0) -> Dyad:
    """Single-pivot cross correction of the residual at entry (i, j).

    With g the pivot entry, the correction is g * (u v.T) where
    u_k = <res(k, j), g> / ||g||^2 and v_l = <res(i, l), g> / ||g||^2,
    so u_i = v_j = 1 and the corrected residual vanishes at the pivot.
    Raises ZeroPivot when ||g|| is at or below zero_tol.
    """
    res._check(i=i, j=j)
    g_raw = res.entry_raw(i, j)
    g_w = res.entry_w(i, j)
    nrm2 = float(g_w @ g_w)
    if nrm2 == 0.0 or np.sqrt(nrm2) <= zero_tol:
        raise ZeroPivot(f"pivot entry ({i}, {j}) has zero norm")
    u = (res.col_w(j) @ g_w) / nrm2
    v = (res.row_w(i) @ g_w) / nrm2
    u = np.asarray(u, dtype=float).copy()
    v = np.asarray(v, dtype=float).copy()
    u[i - 1] = 1.0
    v[j - 1] = 1.0
    return Dyad(g=HElement(g_raw, res.spec), u=u, v=v, pivot=(i, j))


def rook_pivot(res, j0: int, n_rook: int) -> tuple[int, int]:
    """Alternating row/column argmax walk over entry norms of the residual.

    Each full round picks the best row in the current column, then the
    best column in that row; with n_rook = 0 only the initial row scan
    of column j0 happens. Ties break toward the smallest index.
    """
    res._check(j=j0)
    if n_rook < 0:
        raise ValueError(f"n_rook must be >= 0, got {n_rook}")
    j = j0
    i = int(np.argmax(res.col_norms(j))) + 1
    for s in range(n_rook):
        if s:
            i = int(np.argmax(res.col_norms(j))) + 1
        j = int(np.argmax(res.row_norms(i))) + 1
    return (i, j)


def abcd(acc, r: int, n_rook: int, rng_seed) -> AbcdResult:
    """Adaptive cross-dyadic approximation: greedy pivoted rank-one corrections.

    Per iteration a row is drawn uniformly at random, the largest-norm
    residual entry in that row starts a rook walk, and the resulting
    pivot (if its norm clears the relative zero threshold) contributes
    one dyad. With n_rook = 0 there is no rook refinement at all: the
    randomly drawn row is kept and only the column choice is adaptive.
    Index sets collect the accepted pivot rows and columns; repeats
    collapse. The residual is never materialized: (i, j) is always
    evaluated as the accessor entry minus the accumulated dyads.

    ``rng_seed`` may be an integer seed or a numpy Generator. Runs with
    equal seeds over accessors serving identical matrices produce
    identical pivot trajectories.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    m, n = acc.shape
    res = DyadDeflation(acc)
    rows: set[int] = set()
    cols: set[int] = set()
    dyads = DyadicForm(m=m, n=n, spec=acc.spec)
    pivot_norms: list[float] = []
    accepted: list[int] = []
    pivots: list[tuple[int, int]] = []
    for s in range(1, r + 1):
        i_s = int(rng.integers(1, m + 1))
        j_s = int(np.argmax(res.row_norms(i_s))) + 1
        if n_rook >= 1:
            i, j = rook_pivot(res, j_s, n_rook)
        else:
            i, j = i_s, j_s
        pivot_norm = res.entry_norm(i, j)
        if pivot_norm <= ZERO_PIVOT_RTOL * res.max_norm_seen:
            continue  # zero pivot: skip this iteration
        dyad = rank_one_cross(res, i, j)
        res.push(dyad)
        rows.add(i)
        cols.add(j)
        dyads.append(dyad.g, dyad.u, dyad.v)
        pivot_norms.append(pivot_norm)
        accepted.append(s)
        pivots.append((i, j))
    I = IndexSet.of(rows) if rows else IndexSet(())
    J = IndexSet.of(cols) if cols else IndexSet(())
    return AbcdResult(I=I, J=J, dyads=dyads, pivot_norms=pivot_norms,
                      accepted_iterations=accepted, pivots=pivots)


def cross_component(acc, I: IndexSet, J: IndexSet, rtol: float = DEFAULT_RTOL) -> TuckerForm:
    """Factored interpolation of the matrix through rows I and columns J.

    With C the selected columns, R the selected rows, and G their
    intersection, returns the form X @ G @ Y where X interpolates the
    columns through G and Y the rows, both built by pseudoinverse
    application. The (I, J) block of the result reproduces G exactly,
    and the whole matrix is recovered when G carries its full Tucker rank.
    """
    if len(I) == 0 or len(J) == 0:
        raise OutOfBounds("index sets must be nonempty")
    m, n = acc.shape
    I.check_within(m, "row index")
    J.check_within(n, "column index")
    C = acc.cols(J)
    R = acc.rows(I)
    G = acc.submatrix(I, J)
    if lp_norm(G, 2) == 0.0:
        raise ZeroBlock("selected intersection block is identically zero")
    S_g = bochner_svd(G, rtol)
    S_gt = bochner_svd(transpose(G), rtol)
    X = pinv_apply_matrix(S_gt, transpose(C)).T
    Y = pinv_apply_matrix(S_g, R)
    return TuckerForm(X=X, core=G, Y=Y)


def abcdx(acc, n_abcd: int, r: int, n_rook: int, rng_seed: int,
          stop_rtol: float | None = None, rtol: float = DEFAULT_RTOL,
          on_round=None) -> tuple[IndexSet, IndexSet, TuckerForm]:
    """Rounds of adaptive index selection interleaved with cross recomputation.

    Each round runs the dyadic selection on the residual against the
    current cross component, merges the returned index sets, and rebuilds
    the cross component of the *original* accessor at the union. With
    stop_rtol set, the loop ends early once the largest accepted pivot
    norm of a round drops to stop_rtol times the first-ever pivot norm.
    ``on_round(round, I, J, form)`` is called after every completed round,
    for instrumentation only.
    """
    if n_abcd < 1:
        raise ValueError(f"n_abcd must be >= 1, got {n_abcd}")
    children = np.random.SeedSequence(rng_seed).spawn(n_abcd)
    rows: set[int] = set()
    cols: set[int] = set()
    form: TuckerForm | None = None
    first_pivot: float | None = None
    for round_idx in range(n_abcd):
        src = acc if form is None else TuckerDeflation(acc, form)
        result = abcd(src, r, n_rook, np.random.default_rng(children[round_idx]))
        rows |= set(result.I)
        cols |= set(result.J)
        if rows and cols:
            form = cross_component(acc, IndexSet.of(rows), IndexSet.of(cols), rtol)
        if on_round is not None and form is not None:
            on_round(round_idx + 1, IndexSet.of(rows), IndexSet.of(cols), form)
        round_max = max(result.pivot_norms) if result.pivot_norms else 0.0
        if first_pivot is None and result.pivot_norms:
            first_pivot = result.pivot_norms[0]
        if stop_rtol is not None and first_pivot is not None and round_max <= stop_rtol * first_pivot:
            break
    if form is None:  # nothing was ever accepted: the zero approximant
        m, n = acc.shape
        zero_core = BochnerMatrix(np.zeros((1, 1, acc.spec.dim)), acc.spec, _copy=False)
        form = TuckerForm(X=np.zeros((m, 1)), core=zero_core, Y=np.zeros((1, n)))
        return IndexSet(()), IndexSet(()), form
    return IndexSet.of(rows), IndexSet.of(cols), form
