"""Inner-product-space entries: coefficient vectors with a pluggable metric.

An entry of an abstract inner-product space H is represented by a finite
coefficient vector interpreted through a shared :class:`InnerProductSpec`.
An infinite-dimensional H is handled by truncation: the construction site
decides the coefficient length. Two metric kinds are supported:

* ``diagonal`` -- inner(x, y) = sum_k w_k x_k y_k with positive weights;
* ``gram``     -- inner(x, y) = x.T @ G @ y with a dense SPD matrix G.

Both are funneled through a "whitening" transform T with
inner(x, y) = (T x) . (T y), so batched inner products reduce to plain
dot products of whitened coefficient arrays. For the gram kind T is the
transposed Cholesky factor, computed once at construction.
"""

from __future__ import annotations

import numpy as np

from .errors import SpecMismatch


class InnerProductSpec:
    """How inner products between entry coefficient vectors are computed.

    Immutable after construction and meant to be shared by every entry of
    a matrix. Construct through :meth:`diagonal` or :meth:`gram`.
    """

    __slots__ = ("dim", "kind", "weights", "gram_matrix", "_chol", "_sqrt_w")

    def __init__(self, *, dim, kind, weights=None, gram_matrix=None, chol=None):
        self.dim = int(dim)
        self.kind = kind
        self.weights = weights
        self.gram_matrix = gram_matrix
        self._chol = chol
        self._sqrt_w = np.sqrt(weights) if weights is not None else None

    @classmethod
    def diagonal(cls, weights) -> "InnerProductSpec":
        w = np.asarray(weights, dtype=float).copy()
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be finite and strictly positive")
        w.flags.writeable = False
        return cls(dim=w.size, kind="diagonal", weights=w)

    @classmethod
    def gram(cls, G) -> "InnerProductSpec":
        G = np.asarray(G, dtype=float).copy()
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] == 0:
            raise ValueError("gram matrix must be square and nonempty")
        if not np.all(np.isfinite(G)):
            raise ValueError("gram matrix contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(G))))
        if np.max(np.abs(G - G.T)) > 1e-12 * scale:
            raise ValueError("gram matrix is not symmetric")
        try:
            L = np.linalg.cholesky(G)  # SPD check: fails iff G is not SPD
        except np.linalg.LinAlgError as exc:
            raise ValueError("gram matrix is not positive definite") from exc
        G.flags.writeable = False
        return cls(dim=G.shape[0], kind="gram", gram_matrix=G, chol=L)

    def whiten(self, coeffs: np.ndarray) -> np.ndarray:
        """Map coefficients (last axis) so inner products become dot products."""
        if self.kind == "diagonal":
            return coeffs * self._sqrt_w
        return coeffs @ self._chol

    def inner_raw(self, x: np.ndarray, y: np.ndarray) -> float:
        if self.kind == "diagonal":
            return float(np.dot(x * self.weights, y))
        return float(x @ self.gram_matrix @ y)

    def norm_raw(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner_raw(x, x), 0.0)))

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, InnerProductSpec):
            return NotImplemented
        if self.kind != other.kind or self.dim != other.dim:
            return False
        if self.kind == "diagonal":
            return bool(np.array_equal(self.weights, other.weights))
        return bool(np.array_equal(self.gram_matrix, other.gram_matrix))

    def __hash__(self):
        return hash((self.kind, self.dim))

    def __repr__(self):
        return f"InnerProductSpec(kind={self.kind!r}, dim={self.dim})"


def same_spec(a: InnerProductSpec, b: InnerProductSpec) -> None:
    """Raise SpecMismatch unless the two specs agree."""
    if a is not b and a != b:
        raise SpecMismatch(f"inner-product specs differ: {a!r} vs {b!r}")


class HElement:
    """One entry of the abstract space: coefficients plus a shared spec."""

    __slots__ = ("coeffs", "spec")

    def __init__(self, coeffs, spec: InnerProductSpec):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size != spec.dim:
            raise ValueError(f"expected {spec.dim} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients contain non-finite values")
        c = c.copy()
        c.flags.writeable = False
        self.coeffs = c
        self.spec = spec

    def norm(self) -> float:
        return self.spec.norm_raw(self.coeffs)

    def __repr__(self):
        return f"HElement(dim={self.spec.dim}, norm={self.norm():.3g})"


def inner(x: HElement, y: HElement) -> float:
    """Inner product of two entries under their shared spec."""
    same_spec(x.spec, y.spec)
    return x.spec.inner_raw(x.coeffs, y.coeffs)


def combine(alpha: float, x: HElement, beta: float, y: HElement) -> HElement:
    """Coefficientwise linear combination alpha*x + beta*y."""
    same_spec(x.spec, y.spec)
    return HElement(alpha * x.coeffs + beta * y.coeffs, x.spec)


def gram_matrix(xs) -> np.ndarray:
    """Symmetric PSD matrix of pairwise inner products of the given entries."""
    xs = list(xs)
    if not xs:
        return np.zeros((0, 0))
    spec = xs[0].spec
    for x in xs[1:]:
        same_spec(spec, x.spec)
    W = spec.whiten(np.stack([x.coeffs for x in xs]))
    G = W @ W.T
    return 0.5 * (G + G.T)  # symmetrize away rounding noise
