"""Exact field arithmetic and symbolic quadrature forms."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqec.exact import (ExactScalar, LinearForm, ModeForm, QuadSymbol,
                         SQRT2, SQRT3, SQRT6, TAG_SQUEEZED, form_apply_matrix,
                         form_covariance, form_variance, mode_forms_apply_matrix,
                         sqrt_of, symbol_variance)

SQRT2_F = math.sqrt(2.0)


def frac(n, d=1):
    return Fraction(n, d)


rationals = st.fractions(min_value=-8, max_value=8, max_denominator=12)
scalars = st.builds(ExactScalar, rationals, rationals, rationals, rationals)


def test_inv_sqrt2_squared_is_half():
    inv = ExactScalar(0, frac(1, 2))
    assert inv * inv == ExactScalar(frac(1, 2))


def test_sqrt6_over_4_squared():
    s = ExactScalar(0, 0, 0, frac(1, 4))
    assert s * s == ExactScalar(frac(3, 8))


def test_mixed_radical_product():
    # (1/sqrt6) * (1/sqrt2) = sqrt3/6
    prod = sqrt_of(frac(1, 6)) * sqrt_of(frac(1, 2))
    assert prod == ExactScalar(0, 0, frac(1, 6), 0)
    assert float(prod) == pytest.approx(0.28867513459481287, rel=1e-14)


@pytest.mark.parametrize("v, expected", [
    (frac(1, 2), ExactScalar(0, frac(1, 2))),
    (frac(3, 4), ExactScalar(0, 0, frac(1, 2))),
    (frac(2, 3), ExactScalar(0, 0, 0, frac(1, 3))),
    (frac(9, 4), ExactScalar(frac(3, 2))),
    (0, ExactScalar()),
])
def test_sqrt_of(v, expected):
    assert sqrt_of(v) == expected


def test_sqrt_of_rejects_foreign_radicals():
    with pytest.raises(ValueError):
        sqrt_of(5)
    with pytest.raises(ValueError):
        sqrt_of(-1)


@given(scalars, scalars)
@settings(max_examples=80)
def test_ring_commutes(a, b):
    assert a + b == b + a
    assert a * b == b * a


@given(scalars, scalars, scalars)
@settings(max_examples=80)
def test_ring_distributes(a, b, c):
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)


@given(scalars)
@settings(max_examples=80)
def test_zero_test_is_exact(a):
    assert (a - a).is_zero()
    assert a.is_zero() == (a.a == a.b == a.c == a.d == 0)


@given(scalars)
@settings(max_examples=80)
def test_float_round_trip(a):
    expect = (float(a.a) + float(a.b) * SQRT2_F
              + float(a.c) * math.sqrt(3.0) + float(a.d) * math.sqrt(6.0))
    assert float(a) == pytest.approx(expect, rel=1e-14, abs=1e-14)


@given(scalars)
@settings(max_examples=60)
def test_inverse(a):
    if a.is_zero():
        with pytest.raises(ZeroDivisionError):
            a.inverse()
    else:
        assert a * a.inverse() == ExactScalar(1)


def test_conjugations_are_multiplicative():
    a = ExactScalar(1, frac(1, 2), frac(-1, 3), 2)
    b = ExactScalar(0, 3, frac(1, 5), frac(-1, 7))
    assert (a * b).conj_sqrt2() == a.conj_sqrt2() * b.conj_sqrt2()
    assert (a * b).conj_sqrt3() == a.conj_sqrt3() * b.conj_sqrt3()


def test_division():
    assert (SQRT2 / SQRT3) == SQRT6 * ExactScalar(frac(1, 3))
    assert (ExactScalar(1) / SQRT2) == ExactScalar(0, frac(1, 2))


def test_str_rendering():
    assert str(ExactScalar()) == "0"
    assert str(ExactScalar(0, frac(1, 2))) == "√2/2"
    assert str(ExactScalar(frac(-1, 3), 0, frac(1, 3))) == "-1/3 + √3/3"


# --------------------------------------------------------------------------
# symbols and forms


def test_symbol_validation():
    with pytest.raises(ValueError):
        QuadSymbol.ancilla(5, "x", TAG_SQUEEZED)
    with pytest.raises(ValueError):
        QuadSymbol.error(0, "x")
    with pytest.raises(ValueError):
        QuadSymbol("input", 0, "q")
    with pytest.raises(ValueError):
        QuadSymbol("input", 0, "x", TAG_SQUEEZED)  # tags are for ancillas


def test_symbol_basis_is_twenty():
    syms = {QuadSymbol.input(q) for q in "xp"}
    for m in range(1, 5):
        for q in "xp":
            syms.add(QuadSymbol.ancilla(m, q, TAG_SQUEEZED))
    for k in range(1, 6):
        for q in "xp":
            syms.add(QuadSymbol.error(k, q))
    assert len(syms) == 20


def test_linear_form_drops_zero_coefficients():
    sym = QuadSymbol.input("x")
    f = LinearForm({sym: SQRT2}) - LinearForm({sym: SQRT2})
    assert f.is_zero()
    assert sym not in f.terms


def test_form_addition_and_scaling():
    a, b = QuadSymbol.input("x"), QuadSymbol.input("p")
    f = LinearForm({a: ExactScalar(1)}) + LinearForm({a: ExactScalar(2), b: SQRT3})
    assert f.coefficient(a) == ExactScalar(3)
    g = f.scaled(frac(1, 3))
    assert g.coefficient(a) == ExactScalar(1)
    assert g.coefficient(b) == SQRT3 * ExactScalar(frac(1, 3))


def test_form_apply_matrix_identity_and_inverse():
    basis = [LinearForm.of(QuadSymbol.error(k, "x")) for k in range(1, 6)]
    identity = [[1 if i == j else 0 for j in range(5)] for i in range(5)]
    assert form_apply_matrix(basis, identity) == basis

    from cvqec.network import encoder_matrix, inverse
    u = encoder_matrix()
    mixed = form_apply_matrix(basis, u.rows)
    back = form_apply_matrix(mixed, inverse(u).rows)
    assert back == basis


def test_form_apply_matrix_encoding_row():
    """Row 3 of the encoder: c3 = a2/sqrt6 - a3/sqrt2 + a_in/sqrt3."""
    from cvqec.network import encoder_matrix
    basis = [LinearForm.of(QuadSymbol.error(k, "x")) for k in range(1, 6)]
    c3 = form_apply_matrix(basis, encoder_matrix().rows)[2]
    assert c3.coefficient(QuadSymbol.error(2, "x")) == sqrt_of(frac(1, 6))
    assert c3.coefficient(QuadSymbol.error(3, "x")) == -sqrt_of(frac(1, 2))
    assert c3.coefficient(QuadSymbol.error(4, "x")) == sqrt_of(frac(1, 3))
    assert c3.coefficient(QuadSymbol.error(1, "x")).is_zero()
    assert c3.coefficient(QuadSymbol.error(5, "x")).is_zero()


def test_form_apply_matrix_dimension_mismatch():
    basis = [LinearForm.of(QuadSymbol.input("x"))]
    with pytest.raises(ValueError):
        form_apply_matrix(basis, [[1, 0], [0, 1]])


def test_form_variance_squeezed_pair():
    """Var(sqrt2 x1 e^{-r}) = 2 (1/4) e^{-2r}."""
    f = LinearForm({QuadSymbol.ancilla(1, "x", TAG_SQUEEZED): SQRT2})
    for r in (0.0, 0.403, 1.0):
        assert form_variance(f, r) == pytest.approx(0.5 * math.exp(-2 * r), rel=1e-14)


def test_form_variance_vacuum_unit():
    f = LinearForm.of(QuadSymbol.input("x"))
    assert form_variance(f, 1.7) == 0.25


def test_form_variance_input_combination():
    """Var(-sqrt3 p_in) = 3/4 for a vacuum input."""
    f = LinearForm({QuadSymbol.input("p"): -SQRT3})
    assert form_variance(f, 0.9) == pytest.approx(0.75, rel=1e-14)


def test_form_variance_rejects_unknown_error_variance():
    f = LinearForm.of(QuadSymbol.error(3, "x"))
    with pytest.raises(ValueError):
        form_variance(f, 0.0)
    assert form_variance(f, 0.0, error_var=2.0) == pytest.approx(2.0)


def test_per_ancilla_squeezing():
    r = (0.1, 0.2, 0.3, 0.4)
    f = LinearForm.of(QuadSymbol.ancilla(3, "x", TAG_SQUEEZED))
    assert form_variance(f, r) == pytest.approx(0.25 * math.exp(-0.6), rel=1e-14)
    assert symbol_variance(QuadSymbol.ancilla(2, "x", TAG_SQUEEZED), r) == \
        pytest.approx(0.25 * math.exp(-0.4), rel=1e-14)


def test_form_covariance_independent_symbols():
    f = LinearForm.of(QuadSymbol.input("x"))
    g = LinearForm.of(QuadSymbol.input("p"))
    assert form_covariance(f, g, 0.0) == 0.0
    assert form_covariance(f, f, 0.0) == 0.25


def test_mode_form_fourier():
    mf = ModeForm(LinearForm.of(QuadSymbol.input("x")),
                  LinearForm.of(QuadSymbol.input("p")))
    rot = mf.fourier()
    assert rot.x == -LinearForm.of(QuadSymbol.input("p"))
    assert rot.p == LinearForm.of(QuadSymbol.input("x"))


def test_pretty_printer():
    f = (LinearForm({QuadSymbol.error(2, "x"): sqrt_of(frac(1, 6))})
         - LinearForm({QuadSymbol.error(3, "x"): sqrt_of(frac(1, 2))}))
    text = str(f)
    assert "x_e2" in text and "x_e3" in text and " - " in text
