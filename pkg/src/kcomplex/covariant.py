"""Covariant derivatives and the operators of the complex, evaluated lazily.

A geometry supplies the frame derivations Z_a (a = 2A + A'), the connection
coefficients on E and H, an optional scale sigma of the symplectic form on H
(eps = sigma * standard eps) and optionally the curvature tensor Lambda_{AB}
used by the second-order operator.  Tensors are accessed through ``get`` on
full index tuples; derived tensors are views that compute and memoize only
the components actually requested, which keeps jet computations small.
"""

from math import factorial

from gmpy2 import mpq

from .errors import BadClass, BadStage, OrderUnderflow
from .field import FieldElement
from .frames import flat_frame_rule
from .tensor import E_LO, E_UP, H_LO, EPS_HI, EPS_LO, SymmetryClass, SpinorTensor, omega_hi, omega_lo, perm_sign

_MISSING = object()


def is_zero(x):
    if x is None:
        return True
    if isinstance(x, int):
        return x == 0
    return x.is_zero()


def smul(x, y, cap=None):
    """Product of two scalars (functions or field elements), truncated at cap for jets."""
    if is_zero(x) or is_zero(y):
        return 0
    if isinstance(x, (int, FieldElement)):
        return y * x if not isinstance(y, (int, FieldElement)) else FieldElement.coerce(x) * y
    if isinstance(y, (int, FieldElement)):
        return x * y
    if cap is not None and hasattr(x, "mul_trunc"):
        return x.mul_trunc(y, cap)
    return x * y


def order_of(x):
    return getattr(x, "order", None)


def tensor_order(t):
    """Smallest jet order among the entries (None when nothing is a jet)."""
    if hasattr(t, "order"):
        return t.order
    orders = [v.order for v in t.entries.values() if getattr(v, "order", None) is not None]
    return min(orders) if orders else None


def prim(p, c):
    """Representative primed tuple with c entries equal to 1'."""
    return (0,) * (p - c) + (1,) * c


def frac(a, b=1):
    return FieldElement(mpq(a, b))


# -- geometries -------------------------------------------------------------


class FlatGeometry:
    """Flat quaternionic space (or torus): Z_a are the constant-coefficient derivations."""

    eps_scale = None
    inv_eps_scale = None
    lam = None

    def __init__(self, n):
        self.n = n
        self.nvars = 4 * n
        self._rules = [flat_frame_rule(A, Ap) for A in range(2 * n) for Ap in range(2)]

    def frame_rule(self, a):
        return self._rules[a]

    def apply_frame(self, a, phi, cap=None):
        if is_zero(phi) or isinstance(phi, (int, FieldElement)):
            return 0
        out = 0
        for coord, coef in self._rules[a]:
            d = phi.derive(coord)
            if not d.is_zero():
                out = out + smul(coef, d, cap)
        return out

    def gamma_E(self, a):
        return {}

    def gamma_H(self, a):
        return {}


class FrameGeometry(FlatGeometry):
    """A general frame Z_a = sum e_a^mu d_mu with connection coefficients.

    ``frame[a]`` is a list of (coordinate, coefficient); ``gE[a]`` and
    ``gH[a]`` map (B, C) to Gamma_{aB}^C.  ``eps_scale`` sigma makes the
    symplectic form on H equal to sigma * eps; raising then uses sigma^{-1}.
    """

    def __init__(self, n, frame, gE, gH, eps_scale=None, lam=None, order=None):
        self.n = n
        self.nvars = 4 * n
        self._rules = frame
        self.gE = gE
        self.gH = gH
        self.eps_scale = eps_scale
        self.inv_eps_scale = None if eps_scale is None else eps_scale.inverse()
        self.lam = lam
        self.order = order

    def gamma_E(self, a):
        return self.gE[a]

    def gamma_H(self, a):
        return self.gH[a]


# -- views ------------------------------------------------------------------


class Stored:
    """Adapter giving a SpinorTensor the view interface."""

    def __init__(self, t, order=_MISSING):
        self.t = t
        self.cls = t.cls
        self.order = tensor_order(t) if order is _MISSING else order

    def get(self, idx):
        return self.t.get(idx)


def as_view(t):
    return t if hasattr(t, "order") and hasattr(t, "get") and not isinstance(t, SpinorTensor) else Stored(t)


def _rows(gamma):
    """Split {(B, C): g} into row lists by B and column lists by C."""
    by_row, by_col = {}, {}
    for (b, c), g in gamma.items():
        if is_zero(g):
            continue
        by_row.setdefault(b, []).append((c, g))
        by_col.setdefault(c, []).append((b, g))
    return by_row, by_col


class NablaView:
    """nabla T with the derivative index (A, A') prepended as two free slots."""

    def __init__(self, geom, T):
        T = as_view(T)
        self.geom = geom
        self.T = T
        c = T.cls
        self.cls = SymmetryClass(c.n, c.q, c.p, (E_LO, H_LO) + c.free, c.sym_upper)
        if T.order is not None:
            if T.order < 1:
                raise OrderUnderflow("cannot differentiate a jet of order 0")
            self.order = T.order - 1
        else:
            self.order = None
        self._memo = {}
        self._gam = {}
        self._slots = c.slots

    def _gammas(self, a):
        g = self._gam.get(a)
        if g is None:
            g = (_rows(self.geom.gamma_E(a)), _rows(self.geom.gamma_H(a)))
            self._gam[a] = g
        return g

    def get(self, idx):
        sign, key = self.cls.canonicalize(idx)
        if sign == 0:
            return 0
        v = self._memo.get(key, _MISSING)
        if v is _MISSING:
            v = self._compute(self.cls.full_index(key))
            self._memo[key] = v
        if sign == -1 and not is_zero(v):
            return -v
        return v

    def _compute(self, idx):
        a = 2 * idx[0] + idx[1]
        rest = idx[2:]
        cap = self.order
        T = self.T
        val = self.geom.apply_frame(a, T.get(rest), cap)
        (eR, eC), (hR, hC) = self._gammas(a)
        if not (eR or hR):
            return val
        for i, tag in enumerate(self._slots):
            x = rest[i]
            if tag == E_LO:
                terms, sgn = eR.get(x, ()), -1
            elif tag == H_LO:
                terms, sgn = hR.get(x, ()), -1
            elif tag == E_UP:
                terms, sgn = eC.get(x, ()), 1
            else:
                terms, sgn = hC.get(x, ()), 1
            for d, g in terms:
                other = rest[:i] + (d,) + rest[i + 1 :]
                w = T.get(other)
                if is_zero(w):
                    continue
                prod = smul(g, w, cap)
                val = val + prod if sgn == 1 else val - prod
        return val


class RaiseView:
    """Raise (or lower) the free slot ``slot`` of T.

    Raising uses f^A = f_B eps^{BA}, lowering f_C = f^A eps_{AC}; primed
    slots use the geometry's scaled eps, unprimed slots the block form J.
    """

    def __init__(self, T, slot, direction="raise", geom=None):
        T = as_view(T)
        self.T = T
        c = T.cls
        tag = c.free[slot]
        if (direction == "raise") != (tag[1] == "lo"):
            raise BadClass(f"cannot {direction} slot {slot}")
        new = (tag[0], "up" if direction == "raise" else "lo")
        self.cls = SymmetryClass(c.n, c.q, c.p, c.free[:slot] + (new,) + c.free[slot + 1 :], c.sym_upper)
        self.slot = slot
        self.order = T.order
        if tag[0] == "H":
            self.metric = EPS_HI if direction == "raise" else EPS_LO
            self.scale = None
            if geom is not None and geom.eps_scale is not None:
                self.scale = geom.inv_eps_scale if direction == "raise" else geom.eps_scale
        else:
            self.metric = omega_hi(c.n) if direction == "raise" else omega_lo(c.n)
            self.scale = None
        self._memo = {}

    def get(self, idx):
        sign, key = self.cls.canonicalize(idx)
        if sign == 0:
            return 0
        v = self._memo.get(key, _MISSING)
        if v is _MISSING:
            full = list(self.cls.full_index(key))
            a = full[self.slot]
            v = 0
            for b in range(len(self.metric)):
                m = self.metric[b][a]
                if m:
                    full[self.slot] = b
                    w = self.T.get(tuple(full))
                    if not is_zero(w):
                        v = v + w if m == 1 else v - w
            if self.scale is not None and not is_zero(v):
                v = smul(self.scale, v, self.order)
            self._memo[key] = v
        if sign == -1 and not is_zero(v):
            return -v
        return v


class ScaledView:
    """T multiplied by a scalar function."""

    def __init__(self, T, factor):
        T = as_view(T)
        self.T = T
        self.cls = T.cls
        self.factor = factor
        o1, o2 = T.order, order_of(factor)
        self.order = o1 if o2 is None else (o2 if o1 is None else min(o1, o2))

    def get(self, idx):
        return smul(self.factor, self.T.get(idx), self.order)


def materialize(view, cls=None):
    """SpinorTensor of all canonical components of a view."""
    cls = cls or view.cls
    out = {}
    for key in cls.keys():
        v = view.get(cls.full_index(key))
        if not is_zero(v):
            out[key] = v
    return SpinorTensor(cls, out, check=False)


# -- operators --------------------------------------------------------------


def _inv_eps(geom, x, cap):
    s = geom.inv_eps_scale
    if s is None or is_zero(x):
        return x
    return smul(s, x, cap)


def nabla(geom, f, variant="full"):
    """Full covariant derivative, or its antisymmetrised form nabla-hat.

    nabla-hat has one free lower primed slot (the derivative's primed index)
    followed by the antisymmetric block of size q+1 and f's primed block.
    """
    N = NablaView(geom, f)
    if variant == "full":
        return materialize(N)
    if variant != "antisym":
        raise ValueError(f"unknown variant {variant!r}")
    c = f.cls
    if c.free:
        raise BadClass("nabla-hat expects a section without free slots")
    out_cls = SymmetryClass(c.n, c.q + 1, c.p, (H_LO,), c.sym_upper)
    w = frac(1, c.q + 1)
    out = {}
    for K, cnt, (ap,) in out_cls.keys():
        acc = 0
        for s, A in enumerate(K):
            rest = K[:s] + K[s + 1 :]
            t = N.get((A, ap) + rest + prim(c.p, cnt))
            if is_zero(t):
                continue
            acc = acc + t if s % 2 == 0 else acc - t
        if not is_zero(acc):
            out[(K, cnt, (ap,))] = acc * w
    return SpinorTensor(out_cls, out, check=False)


def D_lower(geom, f):
    """(D_{q,p} f)_{A_1..A_{q+1} A'_2..A'_p} = nabla_{[A_1}^{A'} f_{A_2..A_{q+1}] A' A'_2..A'_p}."""
    c = f.cls
    q, p = c.q, c.p
    if p < 1 or c.sym_upper or c.free:
        raise BadClass("D_{q,p} needs a section of Lambda^q E* (x) S^p H* with p >= 1")
    N = NablaView(geom, f)
    out_cls = SymmetryClass(c.n, q + 1, p - 1)
    w = frac(1, q + 1)
    out = {}
    for K, cnt, _ in out_cls.keys():
        acc = 0
        for s, A in enumerate(K):
            rest = K[:s] + K[s + 1 :]
            # nabla_A^{0'} = nabla_{A1'}, nabla_A^{1'} = -nabla_{A0'}
            t = N.get((A, 1) + rest + prim(p, cnt))
            u = N.get((A, 0) + rest + prim(p, cnt + 1))
            term = t - u if not is_zero(u) else t
            if is_zero(term):
                continue
            acc = acc + term if s % 2 == 0 else acc - term
        if not is_zero(acc):
            acc = _inv_eps(geom, acc * w, N.order)
            if not is_zero(acc):
                out[(K, cnt, ())] = acc
    return SpinorTensor(out_cls, out, check=False)


def D_upper(geom, f):
    """(D_q^p f)_{A_1..A_{q+1}}^{A'_1..A'_{p+1}} = nabla_{[A_1}^{(A'_1} f_{A_2..A_{q+1}]}^{A'_2..A'_{p+1})}."""
    c = f.cls
    q, m = c.q, c.p
    if not c.sym_upper and m > 0 or c.free:
        raise BadClass("D_q^p needs a section of Lambda^q E* (x) S^p H")
    N = NablaView(geom, f)
    out_cls = SymmetryClass(c.n, q + 1, m + 1, sym_upper=True)
    out = {}
    for K, cnt, _ in out_cls.keys():
        acc = 0
        w0 = frac(m + 1 - cnt, (m + 1) * (q + 1))
        w1 = frac(cnt, (m + 1) * (q + 1))
        for s, A in enumerate(K):
            rest = K[:s] + K[s + 1 :]
            term = 0
            if cnt <= m:
                t = N.get((A, 1) + rest + prim(m, cnt))
                if not is_zero(t):
                    term = t * w0
            if cnt >= 1:
                u = N.get((A, 0) + rest + prim(m, cnt - 1))
                if not is_zero(u):
                    term = term - u * w1
            if is_zero(term):
                continue
            acc = acc + term if s % 2 == 0 else acc - term
        if not is_zero(acc):
            acc = _inv_eps(geom, acc, N.order)
            if not is_zero(acc):
                out[(K, cnt, ())] = acc
    return SpinorTensor(out_cls, out, check=False)


def _pair_signs(size):
    """Ordered pairs (s, t) of positions with the sign of moving them to the front."""
    out = []
    for s in range(size):
        for t in range(size):
            if s != t:
                rest = [i for i in range(size) if i not in (s, t)]
                out.append((s, t, perm_sign([s, t] + rest)))
    return out


def baston(geom, f, lam=None):
    """nabla_{A'[A_1} nabla_{A_2}^{A'} f_{A_3..A_{k+2}]} + 2 Lambda_{[A_1A_2} f_{A_3..A_{k+2}]}.

    ``lam`` maps (A, B) to Lambda_{AB}; it defaults to the geometry's own.
    """
    c = f.cls
    k = c.q
    if c.p or c.free:
        raise BadClass("the second-order operator acts on Lambda^k E*")
    lam = geom.lam if lam is None else lam
    G = NablaView(geom, f)
    RG = RaiseView(G, 1, "raise", geom)
    N2 = NablaView(geom, RG)
    out_cls = SymmetryClass(c.n, k + 2, 0, sym_upper=True)
    w = frac(factorial(k), factorial(k + 2))
    pairs = _pair_signs(k + 2)
    out = {}
    for K, _, _ in out_cls.keys():
        acc = 0
        for s, t, sg in pairs:
            rest = tuple(K[i] for i in range(k + 2) if i not in (s, t))
            for ap in (0, 1):
                x = N2.get((K[s], ap, K[t], ap) + rest)
                if is_zero(x):
                    continue
                acc = acc + x if sg == 1 else acc - x
            if lam and s < t:
                L = lam.get((K[s], K[t]))
                if not is_zero(L):
                    fv = f.get(rest)
                    if not is_zero(fv):
                        # 2 Lambda_{AB} summed over ordered pairs gives 4 per unordered pair
                        term = smul(L, fv, N2.order) * 4
                        acc = acc + term if sg == 1 else acc - term
        if not is_zero(acc):
            out[(K, 0, ())] = acc * w
    return SpinorTensor(out_cls, out, check=False)


def apply_D(spec, j, f, geom=None, lam=None):
    """The operator D_j of the complex described by spec."""
    kind = spec.stage_kind(j)
    if f.cls != spec.space(j):
        raise BadStage(f"section is not in Y_{j}")
    geom = geom or FlatGeometry(spec.n)
    if kind == "lower":
        return D_lower(geom, f)
    if kind == "upper":
        return D_upper(geom, f)
    return baston(geom, f, lam)

