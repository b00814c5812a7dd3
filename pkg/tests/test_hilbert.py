"""Entry-level inner product tests, including metric axioms by property."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmx.errors import SpecMismatch
from bmx.hilbert import HElement, InnerProductSpec, combine, gram_matrix, inner

from conftest import random_element, random_spec

finite_floats = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def coeff_lists(dim):
    return st.lists(finite_floats, min_size=dim, max_size=dim)


class TestSpecConstruction:
    def test_diagonal_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            InnerProductSpec.diagonal([1.0, 0.0])
        with pytest.raises(ValueError):
            InnerProductSpec.diagonal([1.0, -2.0])

    def test_gram_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            InnerProductSpec.gram([[1.0, 0.5], [0.2, 1.0]])

    def test_gram_rejects_indefinite(self):
        with pytest.raises(ValueError):
            InnerProductSpec.gram([[1.0, 2.0], [2.0, 1.0]])

    def test_element_length_checked(self):
        spec = InnerProductSpec.diagonal([1.0, 1.0])
        with pytest.raises(ValueError):
            HElement([1.0, 2.0, 3.0], spec)


class TestInner:
    def test_orthogonal_basis(self):
        spec = InnerProductSpec.diagonal([1.0, 1.0])
        assert inner(HElement([1, 0], spec), HElement([0, 1], spec)) == 0.0

    def test_sobolev_style_weights_first_mode(self):
        # ||u||^2 = (2/pi) * sum k^2 u_k^2 at u = e_1 gives 2/pi
        K = 5
        weights = (2.0 / np.pi) * np.arange(1, K + 1, dtype=float) ** 2
        spec = InnerProductSpec.diagonal(weights)
        e1 = HElement([1, 0, 0, 0, 0], spec)
        assert inner(e1, e1) == pytest.approx(2.0 / np.pi, rel=1e-15)

    def test_gram_entry_read_off(self):
        spec = InnerProductSpec.gram([[2.0, 1.0], [1.0, 2.0]])
        assert inner(HElement([1, 0], spec), HElement([0, 1], spec)) == pytest.approx(1.0)

    def test_spec_mismatch(self):
        a = InnerProductSpec.diagonal([1.0, 1.0])
        b = InnerProductSpec.diagonal([2.0, 1.0])
        with pytest.raises(SpecMismatch):
            inner(HElement([1, 0], a), HElement([1, 0], b))

    def test_equal_specs_by_value_accepted(self):
        a = InnerProductSpec.diagonal([1.5, 2.5])
        b = InnerProductSpec.diagonal([1.5, 2.5])
        assert inner(HElement([1, 1], a), HElement([1, 1], b)) == pytest.approx(4.0)


class TestCombine:
    def test_projections(self, rng):
        spec = random_spec(rng, 6)
        x, y = random_element(rng, spec), random_element(rng, spec)
        assert np.array_equal(combine(1.0, x, 0.0, y).coeffs, x.coeffs)
        assert np.all(combine(1.0, x, -1.0, x).coeffs == 0.0)

    def test_arithmetic(self):
        spec = InnerProductSpec.diagonal([1.0, 1.0])
        z = combine(2.0, HElement([1, 2], spec), 3.0, HElement([0, 1], spec))
        assert np.allclose(z.coeffs, [2.0, 7.0])


class TestGramMatrix:
    def test_orthonormal_pair(self):
        spec = InnerProductSpec.diagonal([1.0, 1.0, 1.0])
        xs = [HElement([1, 0, 0], spec), HElement([0, 1, 0], spec)]
        assert np.allclose(gram_matrix(xs), np.eye(2), atol=1e-15)

    def test_single_element(self, rng):
        spec = random_spec(rng, 4, "gram")
        x = random_element(rng, spec)
        assert gram_matrix([x])[0, 0] == pytest.approx(x.norm() ** 2, rel=1e-12)

    @pytest.mark.parametrize("kind", ["diagonal", "gram"])
    def test_matches_pairwise_inner_and_psd(self, rng, kind):
        spec = random_spec(rng, 5, kind)
        xs = [random_element(rng, spec) for _ in range(3)]
        G = gram_matrix(xs)
        for i in range(3):
            for j in range(3):
                assert G[i, j] == pytest.approx(inner(xs[i], xs[j]), rel=1e-12, abs=1e-12)
        eigs = np.linalg.eigvalsh(G)
        assert eigs.min() >= -1e-12 * np.trace(G)


@settings(max_examples=40, deadline=None)
@given(x=coeff_lists(4), y=coeff_lists(4), w=st.lists(
    st.floats(min_value=0.1, max_value=4.0), min_size=4, max_size=4))
def test_cauchy_schwarz_diagonal(x, y, w):
    spec = InnerProductSpec.diagonal(w)
    xe, ye = HElement(x, spec), HElement(y, spec)
    assert abs(inner(xe, ye)) <= xe.norm() * ye.norm() * (1 + 1e-12) + 1e-12


@settings(max_examples=40, deadline=None)
@given(x=coeff_lists(3), y=coeff_lists(3), z=coeff_lists(3),
       a=finite_floats, b=finite_floats)
def test_inner_is_bilinear(x, y, z, a, b):
    spec = InnerProductSpec.gram([[2.0, 0.5, 0.0], [0.5, 1.5, 0.2], [0.0, 0.2, 1.0]])
    xe, ye, ze = (HElement(v, spec) for v in (x, y, z))
    lhs = inner(combine(a, xe, b, ye), ze)
    rhs = a * inner(xe, ze) + b * inner(ye, ze)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_cauchy_schwarz_gram_kind(rng):
    spec = random_spec(rng, 7, "gram")
    for _ in range(50):
        x, y = random_element(rng, spec), random_element(rng, spec)
        assert abs(inner(x, y)) <= x.norm() * y.norm() * (1 + 1e-12)


def test_variational_norm(rng):
    # sup over unit g of |<g, h>| is ||h||, attained at g = h / ||h||
    for kind in ("diagonal", "gram"):
        spec = random_spec(rng, 6, kind)
        h = random_element(rng, spec)
        nh = h.norm()
        for _ in range(25):
            g = random_element(rng, spec)
            g_unit = combine(1.0 / g.norm(), g, 0.0, g)
            assert abs(inner(g_unit, h)) <= nh * (1 + 1e-12)
        h_unit = combine(1.0 / nh, h, 0.0, h)
        assert inner(h_unit, h) == pytest.approx(nh, rel=1e-12)
