from fractions import Fraction
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmcert.branching import BranchingMatrix, generate_matrix
from ssmcert.dms import (
    ConcavityError,
    DimensionError,
    DmsCertificate,
    EnvelopeError,
    EnvelopeSpec,
    PreconditionError,
    check_dms,
    check_single_type,
    envelope_bound_D,
    f_enclosure,
    f_float,
    f_prime_enclosure,
    f_prime_float,
    falsify,
    read_certificate,
    solve_omega,
    theta,
    write_certificate,
)
from ssmcert.rational import parse_rational
from ssmcert.search import fit_envelopes

S = [parse_rational(x) for x in "1.040 1.388 1.353 1.255".split()]
C = [parse_rational(x) for x in "0.266037 0.100891 0.100115 0.0973861".split()]
N = generate_matrix(4, False)


def shipped(name: str) -> Path:
    return Path(str(resources.files("ssmcert") / "data" / name))


@pytest.fixture(scope="module")
def fitted():
    return fit_envelopes(N, DmsCertificate(Fraction(18801, 10000), S, C))


def test_published_parameters_pass(fitted):
    v = check_dms(N, fitted)
    assert v.passed, v.witness
    assert set(v.methods) == {"envelope"}
    assert falsify(N, fitted, v) == []
    assert falsify(N, fitted, v, lam=fitted.lambda_star / 2) == []


def test_published_parameters_without_envelopes():
    v = check_dms(N, DmsCertificate(Fraction(18801, 10000), S, C))
    assert v.passed and set(v.methods) == {"bisection"}


def test_published_parameters_fail_at_three(fitted):
    assert not check_dms(N, DmsCertificate(3, S, C)).passed
    # the stale envelopes no longer sit on either side of the maximum
    stale = check_dms(N, DmsCertificate(3, S, C, fitted.envelopes))
    assert not stale.passed and "envelope check" in stale.witness


def test_shipped_certificate_matches(fitted, tmp_path):
    cert = read_certificate(shipped("published_n.cert"))
    assert cert.s == tuple(S) and cert.c == tuple(C)
    assert check_dms(N, cert).passed
    write_certificate(fitted, tmp_path / "x.cert")
    assert read_certificate(tmp_path / "x.cert") == fitted


@pytest.mark.parametrize("k", [Fraction(1, 7), Fraction(3), Fraction(1000, 3)])
def test_scaling_c_keeps_the_verdict(fitted, k):
    base = check_dms(N, fitted)
    scaled = check_dms(N, fitted.scaled(k))
    assert scaled.passed == base.passed
    assert scaled.D_hat == base.D_hat


def test_critical_single_type_fails_strictly():
    M = BranchingMatrix([[3]])
    cert = DmsCertificate(Fraction(27, 16), [Fraction(4, 3)], [1])
    assert not check_dms(M, cert).passed
    assert check_dms(M, DmsCertificate(Fraction(27, 16) - Fraction(1, 100), [Fraction(4, 3)], [1])).passed


@pytest.mark.parametrize("lam", [Fraction(1), Fraction(3, 2), Fraction(27, 16) - Fraction(1, 100),
                                 Fraction(27, 16) + Fraction(1, 100), Fraction(27, 16)])
def test_general_check_agrees_with_single_type(lam):
    cert = DmsCertificate(lam, [Fraction(4, 3)], [1])
    assert check_dms(BranchingMatrix([[3]]), cert).passed == check_single_type(3, lam)


def test_single_type_examples():
    assert not check_single_type(3, Fraction(27, 16))
    assert check_single_type(3, Fraction(27, 16) - Fraction(1, 1000))
    assert check_single_type(2, 4 - Fraction(1, 10**9)) and not check_single_type(2, 4)
    om = solve_omega(3, Fraction(27, 16))
    assert abs(om.mid / (1 + om.mid) - Fraction(1, 3)) < Fraction(1, 10**10)


def test_leaf_types_are_free():
    M = BranchingMatrix([[0, 2], [0, 0]])
    v = check_dms(M, DmsCertificate(2, [Fraction(3, 2), Fraction(3, 2)], [1, 1]))
    assert v.methods[1] == "leaf" and v.D_hat[1] == 0
    assert check_dms(BranchingMatrix([[0]]), DmsCertificate(10, [2], [1])).passed


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        check_dms(N, DmsCertificate(2, [2], [1]))


def test_envelope_preconditions():
    th = theta(N, C, S, 1)
    env = EnvelopeSpec(Fraction(1, 2), Fraction(3, 5), 1, 1, 1, -1)
    with pytest.raises(PreconditionError):
        envelope_bound_D(Fraction(3, 2), S[1], th, 3, env)
    with pytest.raises(PreconditionError):
        envelope_bound_D(2, Fraction(101, 100), th, 3, env)
    assert issubclass(ConcavityError, PreconditionError)


def test_bad_envelope_is_named(fitted):
    th = theta(N, C, S, 1)
    e = fitted.envelopes[1]
    low = EnvelopeSpec(e.alpha_lo, e.alpha_hi, e.B_lo / 2, e.B_hi, e.b_lo, e.b_hi)
    with pytest.raises(EnvelopeError, match="B_lo"):
        envelope_bound_D(fitted.lambda_star, S[1], th, 3, low)


def test_f_prime_rejects_the_endpoints():
    th = theta(N, C, S, 1)
    with pytest.raises(ValueError):
        f_prime_enclosure(2, S[1], th, 3, Fraction(1))


@settings(max_examples=80, deadline=None)
@given(st.fractions(Fraction(17, 10), Fraction(5)), st.fractions(Fraction(103, 100), Fraction(3)),
       st.fractions(Fraction(1, 10), 1), st.integers(1, 4), st.floats(0.01, 0.99))
def test_enclosures_contain_float_values(lam, s, th, delta, t):
    left = 1 / (1 + lam)
    a = left + (1 - left) * Fraction(t)
    from ssmcert.rational import RationalInterval

    th_iv = RationalInterval.point(th)
    f = f_enclosure(lam, s, th_iv, delta, a)
    fl = float(f_float(float(lam), float(s), float(th), delta, float(a)))
    assert float(f.lo) - 1e-12 <= fl <= float(f.hi) + 1e-12
    d = f_prime_enclosure(lam, s, th_iv, delta, a)
    dl = float(f_prime_float(float(lam), float(s), float(th), delta, float(a)))
    assert float(d.lo) - 1e-9 * (1 + abs(dl)) <= dl <= float(d.hi) + 1e-9 * (1 + abs(dl))
