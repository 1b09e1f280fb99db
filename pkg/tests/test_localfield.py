import os
from unittest.mock import patch

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaffolds.errors import (
    DegreeTooLarge,
    DivideByZero,
    FieldMismatch,
    IndeterminateValuation,
    NotPrime,
)
from scaffolds.localfield import (
    INF,
    Series,
    binomial,
    canonical_modulus,
    fp_independent,
    residue_field_make,
    series_arith,
    wp_map,
)

pytestmark = pytest.mark.unit


def test_canonical_modulus_f4():
    assert canonical_modulus(2, 2) == (1, 1, 1)
    assert canonical_modulus(3, 1) == (0, 1)


def test_residue_field_is_cached():
    assert residue_field_make(3, 2) is residue_field_make(3, 2)
    assert residue_field_make(3, 2).q == 9


def test_residue_field_rejects_composite():
    with pytest.raises(NotPrime, match="not prime"):
        residue_field_make(4, 1)


def test_residue_field_respects_cap():
    with patch.dict(os.environ, {"SCAFFOLDS_MAX_FIELD_ORDER": "16"}):
        with pytest.raises(DegreeTooLarge, match="exceeds the cap"):
            residue_field_make(2, 5)


def test_residue_arithmetic_f4():
    f4 = residue_field_make(2, 2)
    w = f4.generator()
    # w^2 = w + 1 modulo x^2 + x + 1
    assert w * w == w + 1
    assert w.inverse() * w == f4.one
    assert w.frobenius() == w * w
    assert not w.in_prime_field()


@pytest.mark.parametrize(("p", "d", "value"), [(2, 1, 2), (3, 1, -1), (2, 2, 4)])
def test_residue_encoding_out_of_range(p, d, value):
    with pytest.raises(ValueError, match="outside"):
        residue_field_make(p, d).element(value)


def test_fp_independent():
    f4 = residue_field_make(2, 2)
    w = f4.generator()
    assert fp_independent([f4.one, w])
    assert not fp_independent([f4.one, f4.one])
    assert not fp_independent([f4.one, w, w + 1])


def test_series_product_and_valuation():
    f3 = residue_field_make(3, 1)
    a = Series.from_terms(f3, {-1: 1, 0: 1})
    b = Series.from_terms(f3, {-1: 1, 0: 2})
    assert a * b == Series.from_terms(f3, {-2: 1, 0: 2})
    assert (a * b).valuation() == -2


def test_exact_zero_and_indeterminate_zero():
    f2 = residue_field_make(2, 1)
    assert Series.zero(f2).valuation() == INF
    known_zero = Series.from_terms(f2, {}, prec=5)
    assert known_zero.is_zero_to_precision()
    assert not known_zero.is_zero()
    with pytest.raises(IndeterminateValuation):
        known_zero.valuation()


def test_monomial_inverse_is_exact():
    f2 = residue_field_make(2, 1)
    inv = Series.monomial(f2, -3).inverse()
    assert inv.exact
    assert inv == Series.monomial(f2, 3)


def test_inverse_of_exact_zero():
    f2 = residue_field_make(2, 1)
    with pytest.raises(DivideByZero):
        Series.zero(f2).inverse()


def test_inverse_uses_configured_precision():
    f2 = residue_field_make(2, 1)
    with patch.dict(os.environ, {"SCAFFOLDS_SERIES_PREC": "10"}):
        inv = Series.from_terms(f2, {0: 1, 1: 1}).inverse()
    assert inv.prec == 10
    # 1/(1+t) = 1 + t + t^2 + ... in characteristic 2
    assert all(inv.coefficient(k) == f2.one for k in range(10))


def test_field_mismatch():
    a = Series.one(residue_field_make(2, 1))
    b = Series.one(residue_field_make(3, 1))
    with pytest.raises(FieldMismatch):
        a + b


def test_frobenius_spreads_coefficients():
    f4 = residue_field_make(2, 2)
    w = f4.generator()
    s = Series.from_terms(f4, [(-1, w), (0, f4.one)])
    assert s.frobenius() == Series.from_terms(f4, [(-2, w * w), (0, f4.one)])
    assert s.frobenius() == s**2


def test_wp_map_of_constant_in_prime_field_vanishes():
    f3 = residue_field_make(3, 1)
    assert wp_map(Series.constant(f3, 2)).is_zero()


def test_binomial_small_and_out_of_range():
    f3 = residue_field_make(3, 1)
    mu = Series.monomial(f3, -1)
    # binom(mu, 2) = mu(mu-1)/2 and 1/2 = 2 in F_3
    expected = (mu * (mu - 1)).scale(2)
    assert binomial(mu, 2) == expected
    assert binomial(mu, -1).is_zero()
    with pytest.raises(ValueError, match="k < p"):
        binomial(mu, 3)


def test_series_arith_dispatch():
    f2 = residue_field_make(2, 1)
    a = Series.monomial(f2, 1)
    assert series_arith("add", a, a).is_zero()
    assert series_arith("pow", a, 3) == Series.monomial(f2, 3)
    with pytest.raises(ValueError, match="unknown series operation"):
        series_arith("sqrt", a)


def test_literal_round_trip_keeps_precision():
    f4 = residue_field_make(2, 2)
    s = Series.from_terms(f4, {-2: 3, 1: 2}, prec=6)
    lit = s.to_literal()
    assert lit["prec"] == 6
    assert lit["terms"][0] == [-2, [1, 1]]


# --------------------------------------------------------------------------------------------
# property suites

FIELDS = [(2, 1), (3, 1), (5, 1), (2, 2)]


@st.composite
def series_pairs(draw: st.DrawFn) -> tuple[Series, Series]:
    p, d = draw(st.sampled_from(FIELDS))
    fld = residue_field_make(p, d)

    def one() -> Series:
        terms = draw(
            st.dictionaries(st.integers(-4, 8), st.integers(1, fld.q - 1), min_size=1, max_size=5)
        )
        return Series.from_terms(fld, terms)

    return one(), one()


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(series_pairs())
def test_valuation_is_additive_on_products(pair):
    a, b = pair
    assert (a * b).valuation() == a.valuation() + b.valuation()


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(series_pairs())
def test_valuation_of_sum_is_at_least_min(pair):
    a, b = pair
    s = a + b
    assert s.is_zero() or s.valuation() >= min(a.valuation(), b.valuation())


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(series_pairs())
def test_inverse_round_trip(pair):
    a, _ = pair
    assert a * a.inverse(12) == 1


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(series_pairs())
def test_wp_is_additive(pair):
    a, b = pair
    assert wp_map(a + b) == wp_map(a) + wp_map(b)


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(series_pairs())
def test_frobenius_is_a_ring_map(pair):
    a, b = pair
    assert (a * b).frobenius() == a.frobenius() * b.frobenius()
    assert (a + b).frobenius() == a.frobenius() + b.frobenius()
    assert a.frobenius() == a ** a.field.p
