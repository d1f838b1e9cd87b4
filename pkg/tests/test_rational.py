from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssmcert.rational import (
    RationalInterval,
    exact_root,
    format_rational,
    iroot_floor,
    parse_rational,
    root_interval,
)

positive = st.fractions(min_value=Fraction(1, 1000), max_value=1000)


def test_parse_forms():
    assert parse_rational("3/4") == Fraction(3, 4)
    assert parse_rational("1.8801") == Fraction(18801, 10000)
    assert parse_rational("-2") == -2
    assert parse_rational("0.0973861") == Fraction(973861, 10**7)
    with pytest.raises(ValueError):
        parse_rational("abc")


@given(st.fractions())
def test_format_parse_roundtrip(x):
    assert parse_rational(format_rational(x)) == x


@given(st.integers(0, 10**40), st.integers(1, 7))
def test_iroot_floor(n, k):
    r = iroot_floor(n, k)
    assert r**k <= n < (r + 1) ** k


@given(positive, st.integers(1, 6))
def test_root_interval_encloses(x, k):
    iv = root_interval(x, k)
    assert iv.lo**k <= x <= iv.hi**k
    assert iv.width <= Fraction(1, 2**50)


def test_exact_root_detects_perfect_powers():
    assert exact_root(Fraction(27, 8), 3) == Fraction(3, 2)
    assert exact_root(Fraction(2), 2) is None
    assert root_interval(Fraction(16, 81), 4).is_point()


@given(positive, positive, positive, positive)
def test_interval_ops_enclose(a, b, c, d):
    x = RationalInterval(min(a, b), max(a, b))
    y = RationalInterval(min(c, d), max(c, d))
    for p in (a, b):
        for q in (c, d):
            assert (x + y).contains(p + q)
            assert (x - y).contains(p - q)
            assert (x * y).contains(p * q)
            assert (x / y).contains(p / q)
    assert (x**3).contains(a**3)


def test_interval_rejects_bad_order():
    with pytest.raises(ValueError):
        RationalInterval(Fraction(2), Fraction(1))
    with pytest.raises(ZeroDivisionError):
        RationalInterval(Fraction(-1), Fraction(1)).reciprocal()
