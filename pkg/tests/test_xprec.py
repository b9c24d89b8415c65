from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LEVELS, exact, exact_c, rel_err
from homotrack.xprec import (
    ExtComplex,
    ExtReal,
    Precision,
    compare,
    concatenate,
    convert,
    cplx_arith,
    ext_sum,
    renormalize,
    stack,
    two_prod,
    two_sum,
    where,
)

finite = st.floats(min_value=-1e150, max_value=1e150, allow_nan=False, allow_infinity=False)


@given(finite, finite)
@settings(max_examples=400, deadline=None)
def test_two_sum_is_exact(a, b):
    s, e = two_sum(a, b)
    assert s == a + b
    assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)


@given(finite, finite)
@settings(max_examples=400, deadline=None)
def test_two_prod_is_exact(a, b):
    p, e = two_prod(a, b)
    if a != 0 and b != 0 and abs(Fraction(a) * Fraction(b)) < Fraction(2) ** -969:
        return  # exactness needs the error term above the underflow threshold
    assert Fraction(p) + Fraction(e) == Fraction(a) * Fraction(b)


def test_eft_on_arrays():
    a = np.array([0.1, 1e16, -3.0])
    b = np.array([0.2, 1.0, 1e-20])
    s, e = two_sum(a, b)
    for i in range(3):
        assert Fraction(s[i]) + Fraction(e[i]) == Fraction(a[i]) + Fraction(b[i])


def _random_ext(rng, prec, n):
    """Random normalized values with every limb populated."""
    hi = rng.uniform(-1, 1, n) * 2.0 ** rng.integers(-30, 30, n)
    limbs = [hi]
    for _ in range(1, prec.limbs):
        limbs.append(limbs[-1] * rng.uniform(-1, 1, n) * 2.0**-53)
    return ExtReal(renormalize(np.array(limbs).T))


@pytest.mark.parametrize("prec", [Precision.DD, Precision.QD])
@pytest.mark.parametrize("op", ["+", "-", "*", "/"])
def test_real_ops_against_rationals(rng, prec, op):
    a, b = _random_ext(rng, prec, 300), _random_ext(rng, prec, 300)
    fa, fb = exact(a), exact(b)
    got = exact({"+": a + b, "-": a - b, "*": a * b, "/": a / b}[op])
    f = {"+": Fraction.__add__, "-": Fraction.__sub__, "*": Fraction.__mul__, "/": Fraction.__truediv__}[op]
    worst = max(rel_err(g, f(x, y)) for g, x, y in zip(got, fa, fb))
    assert worst <= 8 * prec.eps


@pytest.mark.parametrize("prec", LEVELS)
def test_sqrt_against_rationals(rng, prec):
    a = abs(_random_ext(rng, prec, 200))
    s = exact(a.sqrt())
    for got, x in zip(s, exact(a)):
        # |s^2 - x| / x is about twice the relative error of s
        assert rel_err(got * got, x) <= 16 * prec.eps


def test_sqrt_edge_cases():
    for prec in LEVELS:
        assert float(ExtReal.from_float(0.0, prec).sqrt()) == 0.0
        assert np.isnan(float(ExtReal.from_float(-1.0, prec).sqrt()))
        assert ExtReal.from_float(4.0, prec).sqrt().to_fraction() == 2


def test_division_by_zero_raises():
    for prec in LEVELS:
        one = ExtReal.from_float(1.0, prec)
        with pytest.raises(ZeroDivisionError):
            one / ExtReal.zeros((), prec)
        with pytest.raises(ZeroDivisionError):
            ExtComplex.ones((), prec) / ExtComplex.zeros((), prec)


@pytest.mark.parametrize("prec", [Precision.DD, Precision.QD])
@pytest.mark.parametrize("op", ["*", "/"])
def test_complex_ops_against_rationals(rng, prec, op):
    a = ExtComplex(_random_ext(rng, prec, 100), _random_ext(rng, prec, 100))
    b = ExtComplex(_random_ext(rng, prec, 100), _random_ext(rng, prec, 100))
    got = exact_c(cplx_arith(a, b, op))
    for g, x, y in zip(got, exact_c(a), exact_c(b)):
        if op == "*":
            want = (x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0])
        else:
            d = y[0] ** 2 + y[1] ** 2
            want = ((x[0] * y[0] + x[1] * y[1]) / d, (x[1] * y[0] - x[0] * y[1]) / d)
        err2 = (g[0] - want[0]) ** 2 + (g[1] - want[1]) ** 2
        mag2 = want[0] ** 2 + want[1] ** 2
        assert float(err2 / mag2) ** 0.5 <= 16 * prec.eps


@pytest.mark.parametrize("prec", LEVELS)
def test_complex_add_sub_against_rationals(rng, prec):
    a = ExtComplex(_random_ext(rng, prec, 100), _random_ext(rng, prec, 100))
    b = ExtComplex(_random_ext(rng, prec, 100), _random_ext(rng, prec, 100))
    for op, f in (("+", Fraction.__add__), ("-", Fraction.__sub__)):
        got = exact_c(cplx_arith(a, b, op))
        for g, x, y in zip(got, exact_c(a), exact_c(b)):
            assert rel_err(g[0], f(x[0], y[0])) <= 8 * prec.eps
            assert rel_err(g[1], f(x[1], y[1])) <= 8 * prec.eps


def test_from_string_rounds_correctly():
    mpmath.mp.prec = 300
    for prec in LEVELS:
        x = ExtReal.from_string("0.1", prec)
        err = abs(x.to_fraction() - Fraction(1, 10)) / Fraction(1, 10)
        assert float(err) <= prec.eps
        third = ExtReal.from_fraction(Fraction(1, 3), prec)
        assert abs(mpmath.mpf(third.to_fraction().numerator) / third.to_fraction().denominator - mpmath.mpf(1) / 3) <= (
            prec.eps / 3
        )


def test_string_round_trip_is_exact_with_all_digits():
    for prec in LEVELS:
        x = ExtReal.from_fraction(Fraction(2, 7), prec)
        assert ExtReal.from_string(x.to_string(None), prec).to_fraction() == x.to_fraction()
        # default digits are enough to reproduce the value to the level's roundoff
        y = ExtReal.from_string(x.to_string(), prec)
        assert rel_err(y.to_fraction(), x.to_fraction()) <= 2 * prec.eps


def test_zero_formatting():
    for prec in LEVELS:
        text = ExtReal.zeros((), prec).to_string()
        assert text.startswith("0.") and text.endswith("e+0")
        assert len(text.split("e")[0].replace(".", "")) == prec.digits
    assert ExtReal.zeros((), Precision.D).to_string(None) == "0"


def test_invalid_strings():
    with pytest.raises(ValueError):
        ExtReal.from_string("1.2.3")
    with pytest.raises(ValueError):
        Precision.parse("ddd")


def test_limb_validation():
    with pytest.raises(ValueError):
        ExtReal(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ExtReal(1.0)


def test_precision_properties():
    assert [p.limbs for p in LEVELS] == [1, 2, 4]
    assert [p.digits for p in LEVELS] == [17, 32, 64]
    assert Precision.parse("DD") is Precision.DD and str(Precision.QD) == "qd"
    assert Precision.D.eps > Precision.DD.eps > Precision.QD.eps


def test_convert_widen_exact_narrow_rounds():
    x = ExtReal.from_fraction(Fraction(1, 3), Precision.QD)
    dd = convert(x, "dd")
    assert rel_err(dd.to_fraction(), Fraction(1, 3)) <= Precision.DD.eps
    d = convert(x, "d")
    assert float(d) == 1 / 3
    wide = convert(dd, "qd")
    assert wide.to_fraction() == dd.to_fraction()
    z = convert(ExtComplex.from_complex(1 + 2j, "d"), "qd")
    assert z.prec is Precision.QD and complex(z) == 1 + 2j


def test_renormalize_nonoverlapping(rng):
    terms = rng.standard_normal((50, 6)) * 2.0 ** (-30 * np.arange(6))
    out = renormalize(terms, 4)
    for row, src in zip(out, terms):
        assert abs(sum(Fraction(v) for v in row) - sum(Fraction(v) for v in src)) <= abs(Fraction(row[0])) * Fraction(2) ** -200
        for k in range(3):
            if row[k + 1] != 0:
                assert abs(row[k + 1]) <= abs(row[k]) * 2.0**-52


def test_compare_and_ordering():
    a = ExtReal.from_fraction(Fraction(1, 3), "qd")
    b = a + ExtReal.from_float(1e-60, "qd")
    assert compare(a, b) == -1 and compare(b, a) == 1 and compare(a, a.copy()) == 0
    assert float(a.hi) == float(b.hi)  # only the low limbs differ


def test_broadcasting_and_indexing():
    x = ExtComplex.from_complex(np.arange(6).reshape(2, 3) + 1j, "dd")
    y = x * ExtComplex.from_complex(np.array([1, 2, 3]), "dd")
    assert y.shape == (2, 3)
    np.testing.assert_allclose(y.to_complex(), (np.arange(6).reshape(2, 3) + 1j) * [1, 2, 3])
    y[:, 0] = ExtComplex.zeros((2,), "dd")
    assert np.all(y.to_complex()[:, 0] == 0)
    assert y[1, ...].shape == (3,)
    s = stack([x, x], axis=-1)
    assert s.shape == (2, 3, 2)
    c = concatenate([x, x], axis=1)
    assert c.shape == (2, 6)
    w = where(np.array([True, False, True]), x, -x)
    np.testing.assert_array_equal(w.to_complex()[:, 1], -x.to_complex()[:, 1])
    total = ext_sum(x, axis=1)
    np.testing.assert_allclose(total.to_complex(), x.to_complex().sum(axis=1))


def test_real_scalar_mixing():
    z = ExtComplex.from_complex(np.array([1 + 1j, 2 - 1j]), "qd")
    h = z * Fraction(1, 2)
    assert exact_c(h) == [(Fraction(1, 2), Fraction(1, 2)), (Fraction(1), Fraction(-1, 2))]
    r = z / 2.0
    assert exact_c(r) == exact_c(h)
    assert np.allclose((1.0 - z).to_complex(), 1.0 - z.to_complex())


def test_abs2_and_abs_hi():
    z = ExtComplex.from_complex(np.array([3 + 4j]), "dd")
    assert exact(z.abs2()) == [25]
    assert z.abs_hi()[0] == 5.0
