"""Scalar functions over R^N with coefficients in Q(i, sqrt2).

Three kinds are provided: polynomials, truncated jets at the origin and
trigonometric polynomials on the torus (R / 2 pi Z)^N.  Coordinates are
numbered 1..N in the public interface.

Polynomial and jet monomials are stored as tuples (deg, e_1, ..., e_N) with
the total degree in front so truncation tests are a single comparison.
"""

from .errors import NonUnitJet, OrderUnderflow, UnsupportedBackend
from .field import ONE, ZERO, I, FieldElement

_SCALARS = (int,)


def _fe(x):
    return x if isinstance(x, FieldElement) else FieldElement.coerce(x)


def _add_into(acc, terms, sign=1):
    for k, v in terms.items():
        w = acc.get(k)
        if w is None:
            acc[k] = v if sign == 1 else -v
        else:
            w = w + v if sign == 1 else w - v
            if w.is_zero():
                del acc[k]
            else:
                acc[k] = w
    return acc


def _mul_terms(t1, t2, cap):
    if len(t1) > len(t2):
        t1, t2 = t2, t1
    items2 = sorted(t2.items(), key=lambda kv: kv[0][0])
    acc = {}
    for k1, c1 in t1.items():
        d1 = k1[0]
        if cap is not None and d1 > cap:
            continue
        room = None if cap is None else cap - d1
        for k2, c2 in items2:
            if room is not None and k2[0] > room:
                break
            key = tuple(x + y for x, y in zip(k1, k2))
            p = c1 * c2
            w = acc.get(key)
            acc[key] = p if w is None else w + p
    return {k: v for k, v in acc.items() if not v.is_zero()}


class PolynomialFn:
    """Polynomial sum c_e x^e in N variables."""

    __slots__ = ("nvars", "terms")
    order = None

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        self.terms = {} if terms is None else terms

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_dict(cls, nvars, coeffs, **kw):
        """Build from {exponent tuple of length N: coefficient}."""
        terms = {}
        for e, c in coeffs.items():
            c = _fe(c)
            if c.is_zero():
                continue
            e = tuple(e)
            if len(e) != nvars:
                raise ValueError("exponent length does not match variable count")
            key = (sum(e),) + e
            terms[key] = terms[key] + c if key in terms else c
        return cls._make(nvars, terms, **kw)

    @classmethod
    def constant(cls, nvars, c, **kw):
        c = _fe(c)
        terms = {} if c.is_zero() else {(0,) * (nvars + 1): c}
        return cls._make(nvars, terms, **kw)

    @classmethod
    def variable(cls, nvars, a, **kw):
        e = [0] * nvars
        e[a - 1] = 1
        return cls._make(nvars, {(1,) + tuple(e): ONE}, **kw)

    @classmethod
    def _make(cls, nvars, terms, **kw):
        return cls(nvars, terms)

    def _new(self, terms, order=None):
        return PolynomialFn(self.nvars, terms)

    # -- inspection -------------------------------------------------------
    def is_zero(self):
        return not self.terms

    def degree(self):
        return max((k[0] for k in self.terms), default=-1)

    def coeffs(self):
        return {k[1:]: v for k, v in self.terms.items()}

    def coefficient(self, e):
        return self.terms.get((sum(e),) + tuple(e), ZERO)

    def constant_term(self):
        return self.terms.get((0,) * (self.nvars + 1), ZERO)

    def __eq__(self, o):
        if isinstance(o, (int, FieldElement)):
            o = PolynomialFn.constant(self.nvars, o)
        if not isinstance(o, PolynomialFn):
            return NotImplemented
        return self.nvars == o.nvars and self.terms == o.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        parts = []
        for k in sorted(self.terms):
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(k[1:]) if e)
            parts.append(f"({self.terms[k]})" + (f"*{mono}" if mono else ""))
        return f"{type(self).__name__}[" + " + ".join(parts) + "]"

    # -- arithmetic -------------------------------------------------------
    def _order_with(self, o):
        a, b = self.order, getattr(o, "order", None)
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b)

    def _coerce(self, o):
        if isinstance(o, PolynomialFn):
            return o
        if isinstance(o, (int, FieldElement)):
            return PolynomialFn.constant(self.nvars, o)
        return None

    def _result(self, terms, order):
        if order is None:
            return PolynomialFn(self.nvars, terms)
        return JetFn(self.nvars, order, {k: v for k, v in terms.items() if k[0] <= order})

    def __add__(self, o):
        if isinstance(o, int) and o == 0:
            return self
        o = self._coerce(o)
        if o is None:
            return NotImplemented
        return self._result(_add_into(dict(self.terms), o.terms), self._order_with(o))

    __radd__ = __add__

    def __sub__(self, o):
        o = self._coerce(o)
        if o is None:
            return NotImplemented
        return self._result(_add_into(dict(self.terms), o.terms, -1), self._order_with(o))

    def __rsub__(self, o):
        return (-self) + o

    def __neg__(self):
        return self._new({k: -v for k, v in self.terms.items()}, self.order)

    def scale(self, c):
        c = _fe(c)
        if c.is_zero():
            return self._new({}, self.order)
        return self._new({k: v * c for k, v in self.terms.items()}, self.order)

    def __mul__(self, o):
        if isinstance(o, (int, FieldElement)):
            return self.scale(o)
        if not isinstance(o, PolynomialFn):
            return NotImplemented
        order = self._order_with(o)
        return self._result(_mul_terms(self.terms, o.terms, order), order)

    __rmul__ = __mul__

    def mul_trunc(self, o, cap):
        """Product truncated at total degree cap (returns a jet of that order)."""
        order = self._order_with(o)
        cap = cap if order is None else min(cap, order)
        return JetFn(self.nvars, cap, _mul_terms(self.terms, o.terms, cap))

    def __pow__(self, e):
        out = self._new({(0,) * (self.nvars + 1): ONE}, self.order)
        for _ in range(e):
            out = out * self
        return out

    # -- calculus ---------------------------------------------------------
    def derive(self, a):
        """Partial derivative in coordinate a (1-based)."""
        out = {}
        for k, v in self.terms.items():
            e = k[a]
            if e:
                nk = list(k)
                nk[0] -= 1
                nk[a] -= 1
                out[tuple(nk)] = v * e
        return self._new(out, None if self.order is None else self._lower_order())

    def _lower_order(self):
        return None

    def eval(self, x):
        x = [_fe(v) for v in x]
        total = ZERO
        for k, v in self.terms.items():
            t = v
            for xi, e in zip(x, k[1:]):
                if e:
                    t = t * xi ** e
            total = total + t
        return total

    def truncate(self, m):
        return JetFn(self.nvars, m, {k: v for k, v in self.terms.items() if k[0] <= m})


class JetFn(PolynomialFn):
    """Taylor polynomial at the origin known up to total order m."""

    __slots__ = ("order",)

    def __init__(self, nvars, order, terms=None):
        self.nvars = nvars
        self.order = order
        self.terms = {} if terms is None else terms

    @classmethod
    def _make(cls, nvars, terms, order=3):
        return cls(nvars, order, {k: v for k, v in terms.items() if k[0] <= order})

    def _new(self, terms, order=None):
        return JetFn(self.nvars, self.order if order is None else order, terms)

    def _lower_order(self):
        if self.order == 0:
            raise OrderUnderflow("derivative of an order-0 jet")
        return self.order - 1

    def __eq__(self, o):
        if isinstance(o, JetFn):
            return self.nvars == o.nvars and self.order == o.order and self.terms == o.terms
        return PolynomialFn.__eq__(self, o)

    __hash__ = PolynomialFn.__hash__

    def truncate(self, m):
        m = min(m, self.order)
        return JetFn(self.nvars, m, {k: v for k, v in self.terms.items() if k[0] <= m})

    def value(self):
        """Order-0 value at the base point."""
        return self.constant_term()

    def inverse(self):
        c0 = self.constant_term()
        if c0.is_zero():
            raise NonUnitJet("jet with zero constant term has no inverse")
        inv0 = c0.inv()
        # 1/f = inv0 * sum_j (-u)^j with u = inv0 * f - 1 nilpotent
        u = self.scale(inv0) - JetFn.constant(self.nvars, ONE, order=self.order)
        term = JetFn.constant(self.nvars, ONE, order=self.order)
        total = term
        for _ in range(self.order):
            term = -(term * u)
            if term.is_zero():
                break
            total = total + term
        return total.scale(inv0)

    def __truediv__(self, o):
        if isinstance(o, (int, FieldElement)):
            return self.scale(_fe(o).inv())
        if isinstance(o, JetFn):
            return self * o.inverse()
        return NotImplemented

    def sqrt(self):
        """Square root with constant term 1 (binomial series)."""
        if self.constant_term() != ONE:
            raise NonUnitJet("square root needs constant term 1")
        u = self - JetFn.constant(self.nvars, ONE, order=self.order)
        total = JetFn.constant(self.nvars, ONE, order=self.order)
        term = JetFn.constant(self.nvars, ONE, order=self.order)
        coef = FieldElement(1)
        for j in range(1, self.order + 1):
            term = term * u
            if term.is_zero():
                break
            coef = coef * FieldElement(3 - 2 * j) / FieldElement(2 * j)
            total = total + term.scale(coef)
        return total


class TrigPolynomialFn:
    """Finite Fourier sum c_m exp(i m.x) on the torus."""

    __slots__ = ("nvars", "modes")

    def __init__(self, nvars, modes=None):
        self.nvars = nvars
        self.modes = {} if modes is None else modes

    @classmethod
    def from_dict(cls, nvars, coeffs):
        modes = {}
        for m, c in coeffs.items():
            c = _fe(c)
            m = tuple(m)
            if len(m) != nvars:
                raise ValueError("mode length does not match variable count")
            w = modes.get(m, ZERO) + c
            if w.is_zero():
                modes.pop(m, None)
            else:
                modes[m] = w
        return cls(nvars, modes)

    @classmethod
    def constant(cls, nvars, c):
        c = _fe(c)
        return cls(nvars, {} if c.is_zero() else {(0,) * nvars: c})

    @classmethod
    def mode(cls, nvars, m, c=ONE):
        return cls.from_dict(nvars, {tuple(m): c})

    def is_zero(self):
        return not self.modes

    def __eq__(self, o):
        if isinstance(o, (int, FieldElement)):
            o = TrigPolynomialFn.constant(self.nvars, o)
        if not isinstance(o, TrigPolynomialFn):
            return NotImplemented
        return self.nvars == o.nvars and self.modes == o.modes

    def __hash__(self):
        return hash(frozenset(self.modes.items()))

    def __repr__(self):
        parts = [f"({c})*e^(i{list(m)}.x)" for m, c in sorted(self.modes.items())]
        return "TrigPolynomialFn[" + " + ".join(parts) + "]"

    def _coerce(self, o):
        if isinstance(o, TrigPolynomialFn):
            return o
        if isinstance(o, (int, FieldElement)):
            return TrigPolynomialFn.constant(self.nvars, o)
        return None

    def __add__(self, o):
        if isinstance(o, int) and o == 0:
            return self
        o = self._coerce(o)
        if o is None:
            return NotImplemented
        return TrigPolynomialFn(self.nvars, _add_into(dict(self.modes), o.modes))

    __radd__ = __add__

    def __sub__(self, o):
        o = self._coerce(o)
        if o is None:
            return NotImplemented
        return TrigPolynomialFn(self.nvars, _add_into(dict(self.modes), o.modes, -1))

    def __rsub__(self, o):
        return (-self) + o

    def __neg__(self):
        return TrigPolynomialFn(self.nvars, {m: -c for m, c in self.modes.items()})

    def scale(self, c):
        c = _fe(c)
        if c.is_zero():
            return TrigPolynomialFn(self.nvars)
        return TrigPolynomialFn(self.nvars, {m: v * c for m, v in self.modes.items()})

    def __mul__(self, o):
        if isinstance(o, (int, FieldElement)):
            return self.scale(o)
        if not isinstance(o, TrigPolynomialFn):
            return NotImplemented
        acc = {}
        for m1, c1 in self.modes.items():
            for m2, c2 in o.modes.items():
                m = tuple(x + y for x, y in zip(m1, m2))
                p = c1 * c2
                w = acc.get(m)
                acc[m] = p if w is None else w + p
        return TrigPolynomialFn(self.nvars, {m: c for m, c in acc.items() if not c.is_zero()})

    __rmul__ = __mul__

    def derive(self, a):
        out = {}
        for m, c in self.modes.items():
            if m[a - 1]:
                out[m] = c * I * m[a - 1]
        return TrigPolynomialFn(self.nvars, out)

    def conj(self):
        return TrigPolynomialFn(self.nvars, {tuple(-x for x in m): c.conj() for m, c in self.modes.items()})

    def mode_coefficient(self, m):
        return self.modes.get(tuple(m), ZERO)


def torus_pair(f, g):
    """Normalized L2 pairing: sum over modes of f_m * conj(g_m)."""
    total = ZERO
    small, big = (f.modes, g.modes)
    for m, c in small.items():
        d = big.get(m)
        if d is not None:
            total = total + c * d.conj()
    return total


def scalar_conj(x):
    if isinstance(x, FieldElement):
        return x.conj()
    if isinstance(x, TrigPolynomialFn):
        return x.conj()
    if isinstance(x, PolynomialFn):
        return x._new({k: v.conj() for k, v in x.terms.items()}, x.order)
    raise TypeError(f"cannot conjugate {type(x).__name__}")


def is_zero(x):
    if isinstance(x, int):
        return x == 0
    return x.is_zero()


def scalar_calculus(f, action, arg):
    """Dispatch derive(a), eval(x), mul(g) or add(g) on any scalar backend."""
    if action == "derive":
        return f.derive(arg)
    if action == "eval":
        if isinstance(f, TrigPolynomialFn):
            raise UnsupportedBackend("trigonometric polynomials are not evaluated pointwise")
        return f.eval(arg)
    if action == "mul":
        return f * arg
    if action == "add":
        return f + arg
    raise ValueError(f"unknown action {action!r}")
