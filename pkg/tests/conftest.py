"""Shared helpers for building random specs, entries, and matrices."""

from __future__ import annotations

import numpy as np
import pytest

from bmx.core import BochnerMatrix
from bmx.hilbert import HElement, InnerProductSpec


def random_spec(rng: np.random.Generator, dim: int, kind: str = "diagonal") -> InnerProductSpec:
    if kind == "diagonal":
        return InnerProductSpec.diagonal(rng.uniform(0.2, 3.0, size=dim))
    M = rng.standard_normal((dim, dim))
    G = M @ M.T + dim * np.eye(dim)
    return InnerProductSpec.gram(G)


def random_element(rng: np.random.Generator, spec: InnerProductSpec) -> HElement:
    return HElement(rng.standard_normal(spec.dim), spec)


def random_bmatrix(rng: np.random.Generator, m: int, n: int, spec: InnerProductSpec) -> BochnerMatrix:
    return BochnerMatrix(rng.standard_normal((m, n, spec.dim)), spec)


def orthonormal_entries(spec: InnerProductSpec, count: int) -> list[HElement]:
    """Entries forming an orthonormal system under the spec's metric."""
    if count > spec.dim:
        raise ValueError("cannot fit that many orthonormal entries")
    rng = np.random.default_rng(1234)
    coeffs = rng.standard_normal((count, spec.dim))
    out = []
    done: list[np.ndarray] = []
    for c in coeffs:
        v = c.copy()
        for _ in range(2):
            for q in done:
                v = v - spec.inner_raw(v, q) * q
        v = v / spec.norm_raw(v)
        done.append(v)
        out.append(HElement(v, spec))
    return out


def low_tucker_rank_bmatrix(rng: np.random.Generator, m: int, n: int, rho: int, kappa: int,
                            spec: InnerProductSpec) -> BochnerMatrix:
    """Random matrix with exact Tucker rank at most (rho, kappa)."""
    X = rng.standard_normal((m, rho))
    core = rng.standard_normal((rho, kappa, spec.dim))
    Y = rng.standard_normal((kappa, n))
    data = np.einsum("ip,pqd,qj->ijd", X, core, Y)
    return BochnerMatrix(data, spec)


def rel_err(A: BochnerMatrix, B: BochnerMatrix) -> float:
    from bmx.core import lp_norm, subtract

    return lp_norm(subtract(A, B), 2) / lp_norm(A, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
