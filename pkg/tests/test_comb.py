import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from strategies import levy_specs

from idmc.comb import (RationalSpec, TupleQuery, all_tuple_queries, alpha_sum_check,
                       alternating_sum_zero, binom, blemma_coefficient_collapse, d_expansion,
                       dsum_decomposition_check, enumerate_tuples, signed_tuple_coefficient,
                       tuple_count, vandermonde_sides)
from idmc.idspec import d_coeff, spectral_moment
from idmc.kernel import kernel_from_name

BM = kernel_from_name("bacry-muzy")


@st.composite
def tuple_queries(draw, n_max=11):
    n = draw(st.integers(2, n_max))
    k = draw(st.integers(2, n))
    a = draw(st.integers(1, n - 1))
    b = draw(st.integers(a + 1, n))
    l = draw(st.integers(1, k - 1))
    return TupleQuery(n, k, a, b, l)


fractions = st.fractions(min_value=Fraction(1, 10), max_value=Fraction(4), max_denominator=12)


@st.composite
def rational_specs(draw):
    sigma2 = draw(st.fractions(min_value=0, max_value=2, max_denominator=8))
    cs = draw(st.lists(fractions.filter(lambda c: c != 1), min_size=0, max_size=3, unique=True))
    atoms = tuple((c, draw(fractions)) for c in cs)
    return RationalSpec(sigma2, atoms)


def test_binom_outside_range():
    assert binom(5, 2) == 10
    assert binom(5, 6) == 0
    assert binom(-1, 0) == 0
    assert binom(3, -1) == 0


def test_known_count():
    assert tuple_count(TupleQuery(7, 4, 2, 5, 2)) == 6
    assert len(enumerate_tuples(TupleQuery(7, 4, 2, 5, 2))) == 6


@settings(max_examples=150)
@given(tuple_queries())
def test_count_matches_enumeration(q):
    assert tuple_count(q) == len(enumerate_tuples(q))


@given(tuple_queries(n_max=30))
def test_vandermonde_sides_agree(q):
    lhs, rhs = vandermonde_sides(q)
    assert lhs == rhs


def test_exhaustive_queries_are_valid():
    qs = list(all_tuple_queries(5))
    assert len(qs) == len(set(qs))
    assert all(tuple_count(q) == len(enumerate_tuples(q)) for q in qs)


@pytest.mark.parametrize("kwargs", [
    dict(n=5, k=3, a=3, b=3, l=1),
    dict(n=5, k=1, a=1, b=2, l=1),
    dict(n=5, k=3, a=1, b=2, l=3),
    dict(n=5, k=3, a=1, b=6, l=1),
])
def test_query_validation(kwargs):
    with pytest.raises(ValueError):
        TupleQuery(**kwargs)


@given(st.integers(0, 60))
def test_alternating_sum(x):
    assert alternating_sum_zero(x) == (1 if x == 0 else 0)


def test_alternating_sum_rejects_negative():
    with pytest.raises(ValueError):
        alternating_sum_zero(-1)


@given(st.integers(2, 14), st.data())
def test_signed_coefficient_only_on_outermost_pair(n, data):
    a = data.draw(st.integers(1, n - 1))
    b = data.draw(st.integers(a + 1, n))
    l = data.draw(st.integers(1, n - 1))
    # brute force over tuples, with the sign of each tuple size
    brute = 0
    for k in range(max(2, l + 1), n + 1):
        brute += (-1) ** (n - k) * tuple_count(TupleQuery(n, k, a, b, l))
    got = signed_tuple_coefficient(n, a, b, l)
    assert got == brute
    if b - a != n - 1:
        assert got == 0
    else:
        assert got == (-1) ** (n - 1 - l) * binom(n - 2, l - 1)


@settings(max_examples=60)
@given(rational_specs(), st.integers(2, 9))
def test_rational_collapse_is_exact(spec, n):
    lhs, rhs, equal = blemma_coefficient_collapse(spec, n)
    assert isinstance(lhs, Fraction) and isinstance(rhs, Fraction)
    assert equal
    # independent form: sum_c w (c-1)^n, plus sigma2 at n = 2
    direct = sum((w * (c - 1) ** n for c, w in spec.atoms), Fraction(0))
    assert rhs == direct + (spec.sigma2 if n == 2 else 0)


@given(levy_specs(), st.integers(2, 8))
def test_float_collapse(spec, n):
    assert blemma_coefficient_collapse(spec, n)[2]


def test_collapse_rejects_small_n():
    with pytest.raises(ValueError):
        blemma_coefficient_collapse(RationalSpec(1), 1)


@settings(max_examples=60)
@given(rational_specs(), st.integers(1, 10))
def test_d_expansion_rational(spec, m):
    assert d_expansion(spec, m) == spec.d(m)


@given(levy_specs(), st.integers(1, 10))
def test_d_expansion_float(spec, m):
    assert float(d_expansion(spec, m)) == pytest.approx(d_coeff(spec, m), rel=1e-10, abs=1e-12)


@settings(max_examples=40)
@given(rational_specs())
def test_rational_spec_matches_float_spec(spec):
    levy = spec.to_levy()
    for m in (1, 2, 4):
        assert float(spec.d(m)) == pytest.approx(d_coeff(levy, m), rel=1e-12, abs=1e-14)
    assert float(spec.spectral(3)) == pytest.approx(spectral_moment(levy, 3), rel=1e-12, abs=1e-14)


def test_rational_spec_validation():
    with pytest.raises(ValueError):
        RationalSpec(-1)
    with pytest.raises(ValueError):
        RationalSpec(0, ((Fraction(1), Fraction(1)),))
    with pytest.raises(ValueError):
        RationalSpec(0, ((Fraction(2), Fraction(0)),))


@given(levy_specs(), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=7, unique=True))
def test_dsum_regrouping(spec, pts):
    pts = sorted(pts)
    assume(min(np.diff(pts)) > 1e-9)
    assert dsum_decomposition_check(spec, len(pts), pts, BM) <= 1e-8


def test_dsum_validation():
    spec = RationalSpec(1).to_levy()
    with pytest.raises(ValueError):
        dsum_decomposition_check(spec, 3, [0.1, 0.2], BM)
    with pytest.raises(ValueError):
        dsum_decomposition_check(spec, 2, [0.3, 0.2], BM)


@given(levy_specs(), st.lists(st.floats(-2, 2), min_size=1, max_size=8))
def test_alpha_sums(spec, qs):
    assert alpha_sum_check(spec, qs) <= 1e-9 * max(1.0, math.fsum(abs(q) for q in qs) ** 2)


def test_alpha_sum_size_limit():
    with pytest.raises(ValueError):
        alpha_sum_check(RationalSpec(1).to_levy(), [0.1] * 9)
