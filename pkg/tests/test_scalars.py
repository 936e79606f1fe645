import pytest
import sympy
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from kcomplex.errors import DivisionByZero, NonUnitJet, ParseError, UnsupportedBackend
from kcomplex.field import I, ONE, SQRT2, ZERO, FieldElement, fe, field_arith, gaussian, parse, serialize
from kcomplex.scalars import JetFn, PolynomialFn, TrigPolynomialFn, scalar_calculus, torus_pair

from strategies import field_elements, nonzero_field, polynomials, trig_polynomials


def to_sympy(x):
    r = lambda q: sympy.Rational(int(q.numerator), int(q.denominator))
    return r(x.a) + r(x.b) * sympy.sqrt(2) + sympy.I * (r(x.c) + r(x.d) * sympy.sqrt(2))


def same(x, expr):
    return sympy.simplify(to_sympy(x) - expr) == 0


def test_difference_of_squares():
    assert (ONE + SQRT2) * (SQRT2 - ONE) == ONE


def test_conjugation_rule():
    assert (I * SQRT2).conj() == -(I * SQRT2)


def test_gaussian_inverse():
    z = gaussian(1, 1)
    assert z.inv() == gaussian(mpq(1, 2), mpq(-1, 2))
    assert z * z.inv() == ONE


def test_zero_has_no_inverse():
    with pytest.raises(DivisionByZero):
        ZERO.inv()


@given(field_elements, field_elements)
def test_arithmetic_matches_sympy(x, y):
    assert same(x + y, to_sympy(x) + to_sympy(y))
    assert same(x * y, to_sympy(x) * to_sympy(y))
    assert same(x.conj(), sympy.conjugate(to_sympy(x)))


@given(field_elements, field_elements, field_elements)
def test_ring_axioms(x, y, z):
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x + y == y + x and x * y == y * x


@given(nonzero_field)
def test_inverse(x):
    assert x * x.inv() == ONE
    assert same(x.inv(), 1 / to_sympy(x))


@given(field_elements)
def test_conjugation_involution_fixes_sqrt2(x):
    assert x.conj().conj() == x
    assert SQRT2.conj() == SQRT2


@given(field_elements)
def test_serialize_round_trip(x):
    assert parse(serialize(x)) == x


def test_serialize_format():
    assert serialize(fe(1, mpq(-1, 2), 0, 3)) == "1/1 + -1/2*s2 + (0/1 + 3/1*s2)*i"
    with pytest.raises(ParseError):
        parse("1 + i")


# -- functions ----------------------------------------------------------------


def test_power_rule():
    x1, x2 = PolynomialFn.variable(2, 1), PolynomialFn.variable(2, 2)
    assert (x1 * x1 + x2).derive(1) == x1.scale(2)


def test_mode_rule():
    e = TrigPolynomialFn.mode(2, (0, 1))
    assert e.derive(2) == e.scale(I)


def test_jet_inverse():
    x1 = JetFn.variable(2, 1, order=2)
    one = JetFn.constant(2, 1, order=2)
    inv = (one + x1).inverse()
    assert inv == one - x1 + x1 * x1
    assert (inv * (one + x1)).truncate(2) == one


def test_jet_without_unit_part():
    with pytest.raises(NonUnitJet):
        JetFn.variable(2, 1, order=2).inverse()


def test_eval():
    x1, x2 = PolynomialFn.variable(2, 1), PolynomialFn.variable(2, 2)
    assert (x1 * x2 + x1).eval([2, 3]) == FieldElement(8)


def test_torus_pairing_examples():
    e1 = TrigPolynomialFn.mode(2, (1, 0))
    e2 = TrigPolynomialFn.mode(2, (0, 1))
    assert torus_pair(e1, e1) == ONE
    assert torus_pair(e1, e2) == ZERO
    f = TrigPolynomialFn.constant(2, 2) + e1
    assert torus_pair(f, TrigPolynomialFn.constant(2, 3)) == FieldElement(6)


@given(polynomials(), polynomials(), polynomials())
def test_polynomial_ring(f, g, h):
    assert (f * g) * h == f * (g * h)
    assert f * (g + h) == f * g + f * h


@given(polynomials(), st.integers(1, 3), st.integers(1, 3))
def test_partials_commute_polynomial(f, a, b):
    assert f.derive(a).derive(b) == f.derive(b).derive(a)


@given(polynomials(), st.integers(1, 3), st.integers(1, 3))
def test_partials_commute_jet(f, a, b):
    j = JetFn.from_dict(3, {e[1:]: c for e, c in f.terms.items()}, order=4)
    assert j.derive(a).derive(b) == j.derive(b).derive(a)


@given(trig_polynomials(), st.integers(1, 2), st.integers(1, 2))
def test_partials_commute_trig(f, a, b):
    assert f.derive(a).derive(b) == f.derive(b).derive(a)


@given(trig_polynomials(), trig_polynomials(), trig_polynomials())
def test_multiplication_moves_across_pairing(f, g, h):
    assert torus_pair(f * h, g) == torus_pair(f, h.conj() * g)


@given(trig_polynomials(), trig_polynomials())
def test_pairing_hermitian(f, g):
    assert torus_pair(f, g) == torus_pair(g, f).conj()


def test_dispatchers():
    x = fe(1, 1)
    assert field_arith(x, field_arith(x, op="inv"), "mul") == fe(1)
    assert field_arith(fe(0, 0, 2), op="conj") == fe(0, 0, -2)
    with pytest.raises(DivisionByZero):
        field_arith(fe(0), op="inv")
    p = PolynomialFn.variable(2, 1)
    assert scalar_calculus(scalar_calculus(p, "mul", p), "derive", 1) == scalar_calculus(p, "add", p)
    with pytest.raises(UnsupportedBackend):
        scalar_calculus(TrigPolynomialFn.mode(2, (1, 0), fe(1)), "eval", [0, 0])
