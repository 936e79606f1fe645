"""Exact arithmetic in the number field Q(i, sqrt 2).

An element is stored as four rationals (a, b, c, d) standing for
a + b*sqrt2 + i*(c + d*sqrt2).
"""

import re

from gmpy2 import mpq

from .errors import DivisionByZero, ParseError

_ZERO = mpq(0)
_ONE = mpq(1)
_SCALARS = (int, type(_ZERO))


_q = mpq


class FieldElement:
    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a=0, b=0, c=0, d=0):
        self.a = _q(a)
        self.b = _q(b)
        self.c = _q(c)
        self.d = _q(d)

    @classmethod
    def _raw(cls, a, b, c, d):
        x = object.__new__(cls)
        x.a = a
        x.b = b
        x.c = c
        x.d = d
        return x

    @classmethod
    def coerce(cls, x):
        if isinstance(x, FieldElement):
            return x
        if isinstance(x, complex):
            raise TypeError("floating point complex values are not exact")
        return cls._raw(mpq(x), _ZERO, _ZERO, _ZERO)

    # -- predicates -------------------------------------------------------
    def is_zero(self):
        return not (self.a or self.b or self.c or self.d)

    def __bool__(self):
        return not self.is_zero()

    def is_gaussian(self):
        """True when the sqrt2 parts vanish, i.e. the value lies in Q(i)."""
        return not (self.b or self.d)

    def is_rational(self):
        return not (self.b or self.c or self.d)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, o):
        if not isinstance(o, FieldElement):
            if isinstance(o, _SCALARS):
                return FieldElement._raw(self.a + o, self.b, self.c, self.d)
            return NotImplemented
        return FieldElement._raw(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    __radd__ = __add__

    def __sub__(self, o):
        if not isinstance(o, FieldElement):
            if isinstance(o, _SCALARS):
                return FieldElement._raw(self.a - o, self.b, self.c, self.d)
            return NotImplemented
        return FieldElement._raw(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)

    def __rsub__(self, o):
        return (-self) + o

    def __neg__(self):
        return FieldElement._raw(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, o):
        if not isinstance(o, FieldElement):
            if isinstance(o, _SCALARS):
                return FieldElement._raw(self.a * o, self.b * o, self.c * o, self.d * o)
            return NotImplemented
        a, b, c, d = self.a, self.b, self.c, self.d
        e, f, g, h = o.a, o.b, o.c, o.d
        # (x + iy)(u + iv) with x, y, u, v in Q(sqrt2)
        ra = a * e + 2 * b * f - c * g - 2 * d * h
        rb = a * f + b * e - c * h - d * g
        rc = a * g + 2 * b * h + c * e + 2 * d * f
        rd = a * h + b * g + c * f + d * e
        return FieldElement._raw(ra, rb, rc, rd)

    __rmul__ = __mul__

    def conj(self):
        return FieldElement._raw(self.a, self.b, -self.c, -self.d)

    def inv(self):
        if self.is_zero():
            raise DivisionByZero("inverse of zero in Q(i, sqrt2)")
        a, b, c, d = self.a, self.b, self.c, self.d
        # z * conj(z) = x^2 + y^2 = n0 + n1 sqrt2, then rationalise
        n0 = a * a + 2 * b * b + c * c + 2 * d * d
        n1 = 2 * (a * b + c * d)
        den = n0 * n0 - 2 * n1 * n1
        m0 = n0 / den
        m1 = -n1 / den
        # conj(z) * (m0 + m1 sqrt2)
        return FieldElement._raw(
            a * m0 + 2 * b * m1,
            a * m1 + b * m0,
            -(c * m0 + 2 * d * m1),
            -(c * m1 + d * m0),
        )

    def __truediv__(self, o):
        o = FieldElement.coerce(o)
        return self * o.inv()

    def __rtruediv__(self, o):
        return FieldElement.coerce(o) * self.inv()

    def __pow__(self, e):
        if e < 0:
            return self.inv() ** (-e)
        out = ONE
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    # -- comparisons ------------------------------------------------------
    def __eq__(self, o):
        if not isinstance(o, FieldElement):
            try:
                o = FieldElement.coerce(o)
            except TypeError:
                return NotImplemented
        return self.a == o.a and self.b == o.b and self.c == o.c and self.d == o.d

    def __hash__(self):
        return hash((self.a, self.b, self.c, self.d))

    def is_positive_real(self):
        """Sign test for real elements a + b*sqrt2 (imaginary part must vanish)."""
        if self.c or self.d:
            return False
        a, b = self.a, self.b
        if a >= 0 and b >= 0:
            return bool(a or b)
        if a <= 0 and b <= 0:
            return False
        # opposite signs: compare a^2 with 2 b^2
        if a > 0:
            return a * a > 2 * b * b
        return 2 * b * b > a * a

    # -- text -------------------------------------------------------------
    def __str__(self):
        return serialize(self)

    def __repr__(self):
        return f"FieldElement({serialize(self)!r})"


ZERO = FieldElement._raw(_ZERO, _ZERO, _ZERO, _ZERO)
ONE = FieldElement._raw(_ONE, _ZERO, _ZERO, _ZERO)
I = FieldElement._raw(_ZERO, _ZERO, _ONE, _ZERO)
SQRT2 = FieldElement._raw(_ZERO, _ONE, _ZERO, _ZERO)
INV_SQRT2 = FieldElement._raw(_ZERO, mpq(1, 2), _ZERO, _ZERO)


def fe(a=0, b=0, c=0, d=0):
    return FieldElement(a, b, c, d)


def gaussian(re_part, im_part=0):
    return FieldElement(re_part, 0, im_part, 0)


def _frac(x):
    x = mpq(x)
    return f"{x.numerator}/{x.denominator}"


def serialize(x):
    """Canonical text form 'a/b + c/d*s2 + (e/f + g/h*s2)*i'."""
    return f"{_frac(x.a)} + {_frac(x.b)}*s2 + ({_frac(x.c)} + {_frac(x.d)}*s2)*i"


_RE = re.compile(
    r"^\s*(-?\d+/\d+)\s*\+\s*(-?\d+/\d+)\*s2\s*\+\s*\(\s*(-?\d+/\d+)\s*\+\s*(-?\d+/\d+)\*s2\s*\)\*i\s*$"
)


def parse(text):
    m = _RE.match(text)
    if not m:
        raise ParseError(f"not a serialized field element: {text!r}")
    return FieldElement(*(mpq(g) for g in m.groups()))


_OPS = {
    "add": lambda x, y: x + y,
    "mul": lambda x, y: x * y,
    "inv": lambda x, y: x.inv(),
    "conj": lambda x, y: x.conj(),
}


def field_arith(x, y=None, op="add"):
    """Apply one of add, mul, inv or conj; the unary ops ignore y."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown field operation {op!r}") from None
    x = FieldElement.coerce(x)
    return fn(x, None if y is None else FieldElement.coerce(y))
