"""Curvature of unimodular quaternionic connections.

R_E[(A, A', B, B', C, D)] stores R_{AA'BB'C}^D (the E part) and
R_H[(A, A', B, B', C', D')] stores R_{AA'BB'C'}^{D'} (the H part); the
derivative pair is a = (A, A'), b = (B, B').  The curvature of the complexified
tangent bundle is R_E delta + R_H delta.  Entries are field elements, or jets
when the curvature comes from an actual connection.
"""

import random
from itertools import permutations, product

from gmpy2 import mpq

from .covariant import is_zero
from .errors import BadCurvature, BadDecomposition, BadSlots, NotQuaternionicKahler
from .field import ZERO, FieldElement
from .tensor import E_LO, E_UP, EPS_HI, EPS_LO, H_LO, SpinorTensor, omega_hi, omega_lo

HALF = FieldElement(mpq(1, 2))


def _clean(d):
    return {k: v for k, v in d.items() if not is_zero(v)}


def _same(d1, d2):
    for k in set(d1) | set(d2):
        if not is_zero(d1.get(k, 0) - d2.get(k, 0)):
            return False
    return True


def _delta(a, b):
    return 1 if a == b else 0


class CurvatureData:
    def __init__(self, n, RE, RH):
        self.n = n
        self.RE = _clean(RE)
        self.RH = _clean(RH)

    def E(self, A, Ap, B, Bp, C, D):
        return self.RE.get((A, Ap, B, Bp, C, D), 0)

    def H(self, A, Ap, B, Bp, Cp, Dp):
        return self.RH.get((A, Ap, B, Bp, Cp, Dp), 0)

    def full(self, a, b, c, d):
        """R_{abc}^d on the complexified tangent bundle; indices are (X, X') pairs."""
        out = 0
        if c[1] == d[1]:
            out = out + self.E(*a, *b, c[0], d[0])
        if c[0] == d[0]:
            out = out + self.H(*a, *b, c[1], d[1])
        return out

    def __eq__(self, o):
        return isinstance(o, CurvatureData) and o.n == self.n and _same(self.RE, o.RE) and _same(self.RH, o.RH)

    def map(self, fn):
        return CurvatureData(self.n, {k: fn(v) for k, v in self.RE.items()}, {k: fn(v) for k, v in self.RH.items()})

    def values_at_origin(self):
        f = lambda v: v.constant_term() if hasattr(v, "constant_term") else v
        return self.map(f)

    def to_json(self):
        from .field import serialize

        return {
            "n": self.n,
            "R_E": [[list(k), serialize(v)] for k, v in sorted(self.RE.items())],
            "R_H": [[list(k), serialize(v)] for k, v in sorted(self.RH.items())],
        }


class CurvatureDecomposition:
    """Lambda[(A, B)], Phi[(A, B, A', B')], Psi[(A, B, C, D)] and, for n = 1, Psi'[(A', B', C', D')]."""

    def __init__(self, n, lam=None, phi=None, psi=None, psi_prime=None):
        self.n = n
        self.lam = _clean(lam or {})
        self.phi = _clean(phi or {})
        self.psi = _clean(psi or {})
        self.psi_prime = _clean(psi_prime or {}) if n == 1 else {}

    def __eq__(self, o):
        return (
            isinstance(o, CurvatureDecomposition)
            and o.n == self.n
            and _same(self.lam, o.lam)
            and _same(self.phi, o.phi)
            and _same(self.psi, o.psi)
            and _same(self.psi_prime, o.psi_prime)
        )

    def is_qk(self):
        """Phi = 0 and Lambda proportional to the unprimed symplectic form."""
        if self.phi:
            return False
        J = omega_lo(self.n)
        lam0 = self.lam.get((0, 1), 0)
        for A, B in product(range(2 * self.n), repeat=2):
            if not is_zero(self.lam.get((A, B), 0) - lam0 * J[A][B]):
                return False
        return True

    def scalar_lambda(self):
        return self.lam.get((0, 1), ZERO)

    def to_json(self):
        from .field import serialize

        def enc(d):
            return [[list(k), serialize(v)] for k, v in sorted(d.items())]

        out = {"n": self.n, "Lambda": enc(self.lam), "Phi": enc(self.phi), "Psi": enc(self.psi)}
        if self.n == 1:
            out["Psi_prime"] = enc(self.psi_prime)
        return out


# -- validation -------------------------------------------------------------


def _rng_E(n):
    return range(2 * n)


def antisymmetry_ok(R):
    for (A, Ap, B, Bp, C, D), v in R.RE.items():
        if not is_zero(v + R.E(B, Bp, A, Ap, C, D)):
            return False
    for (A, Ap, B, Bp, C, D), v in R.RH.items():
        if not is_zero(v + R.H(B, Bp, A, Ap, C, D)):
            return False
    return True


def traces_ok(R):
    """Both curvatures are trace free in their fibre indices."""
    r = _rng_E(R.n)
    for A, Ap, B, Bp in product(r, (0, 1), r, (0, 1)):
        t = 0
        for C in r:
            t = t + R.E(A, Ap, B, Bp, C, C)
        if not is_zero(t):
            return False
        if not is_zero(R.H(A, Ap, B, Bp, 0, 0) + R.H(A, Ap, B, Bp, 1, 1)):
            return False
    return True


# -- decomposition ----------------------------------------------------------


def lambda_part(R, eps_scale=None):
    """Lambda_{AB} with eps_{0'1'} Lambda_{AB} = (1/3) R_{[AB] C' [0'1']}^{C'}.

    When the symplectic form on H is sigma * eps, pass ``eps_scale`` = sigma.
    """
    r = _rng_E(R.n)
    w = FieldElement(mpq(1, 12))
    if eps_scale is not None:
        w = eps_scale.inv() * w if isinstance(eps_scale, FieldElement) else eps_scale.inverse() * w
    lam = {}
    for A, B in product(r, repeat=2):
        if A == B:
            continue
        acc = 0
        # H slots: (first primed = C', second primed, fibre); antisymmetrise both pairs
        for Cp in (0, 1):
            for X, Y, s in ((0, 1, 1), (1, 0, -1)):
                for P, Q, t in ((A, B, 1), (B, A, -1)):
                    v = R.H(P, Cp, Q, X, Y, Cp)
                    if not is_zero(v):
                        acc = acc + v if s * t == 1 else acc - v
        if is_zero(acc):
            continue
        lam[(A, B)] = acc * w
    return lam


def decompose_curvature(R):
    if not antisymmetry_ok(R) or not traces_ok(R):
        raise BadCurvature("curvature is not antisymmetric and trace free")
    n = R.n
    r = _rng_E(n)
    lam = lambda_part(R)
    phi, psi, psip = {}, {}, {}
    for A, B in product(r, repeat=2):
        for Ap, Bp in product((0, 1), repeat=2):
            acc = 0
            for Cp in (0, 1):
                for P, Q in ((A, B), (B, A)):
                    for X, Y in ((Ap, Bp), (Bp, Ap)):
                        acc = acc + R.H(P, Cp, Q, X, Y, Cp)
            phi[(A, B, Ap, Bp)] = acc * HALF * HALF
    for A, B, C, D in product(r, repeat=4):
        # coefficient of eps_{A'B'} in the primed-antisymmetric part of R_E
        v = (R.E(A, 0, B, 1, C, D) - R.E(A, 1, B, 0, C, D)) * HALF
        v = v - (_delta(A, D) * lam.get((B, C), 0) + _delta(B, D) * lam.get((A, C), 0))
        psi[(A, B, C, D)] = v
    if n == 1:
        for Ap, Bp, Cp, Dp in product((0, 1), repeat=4):
            v = (R.H(0, Ap, 1, Bp, Cp, Dp) - R.H(1, Ap, 0, Bp, Cp, Dp)) * HALF
            v = v - lam.get((0, 1), 0) * (_delta(Ap, Dp) * EPS_LO[Bp][Cp] + _delta(Bp, Dp) * EPS_LO[Ap][Cp])
            psip[(Ap, Bp, Cp, Dp)] = v
    return CurvatureDecomposition(n, lam, phi, psi, psip)


def decomposition_ok(d):
    """Symmetries and trace conditions of (Lambda, Phi, Psi, Psi')."""
    n = d.n
    r = _rng_E(n)
    for A, B in product(r, repeat=2):
        if not is_zero(d.lam.get((A, B), 0) + d.lam.get((B, A), 0)):
            return False
    for (A, B, Ap, Bp), v in d.phi.items():
        if not (is_zero(v - d.phi.get((B, A, Ap, Bp), 0)) and is_zero(v - d.phi.get((A, B, Bp, Ap), 0))):
            return False
    for (A, B, C, D), v in d.psi.items():
        for P in permutations((A, B, C)):
            if not is_zero(v - d.psi.get(P + (D,), 0)):
                return False
    for A, B in product(r, repeat=2):
        t = 0
        for C in r:
            t = t + d.psi.get((C, A, B, C), 0)
        if not is_zero(t):
            return False
    if n == 1:
        for (A, B, C, D), v in d.psi_prime.items():
            for P in permutations((A, B, C)):
                if not is_zero(v - d.psi_prime.get(P + (D,), 0)):
                    return False
        for A, B in product((0, 1), repeat=2):
            if not is_zero(d.psi_prime.get((0, A, B, 0), 0) + d.psi_prime.get((1, A, B, 1), 0)):
                return False
    return True


def reconstruct_curvature(d):
    if not decomposition_ok(d):
        raise BadDecomposition("decomposition violates its symmetry or trace conditions")
    n = d.n
    r = _rng_E(n)
    J = omega_lo(n)
    RE, RH = {}, {}
    lam = lambda A, B: d.lam.get((A, B), 0)
    phi = lambda A, B, Ap, Bp: d.phi.get((A, B, Ap, Bp), 0)
    for A, Ap, B, Bp in product(r, (0, 1), r, (0, 1)):
        e = EPS_LO[Ap][Bp]
        for C, D in product(r, repeat=2):
            v = 0
            if e:
                v = d.psi.get((A, B, C, D), 0) + _delta(A, D) * lam(B, C) + _delta(B, D) * lam(A, C)
                v = v * e
            v = v + _delta(A, D) * phi(B, C, Ap, Bp) - _delta(B, D) * phi(A, C, Ap, Bp)
            if not is_zero(v):
                RE[(A, Ap, B, Bp, C, D)] = v
        for Cp, Dp in product((0, 1), repeat=2):
            v = _delta(Ap, Dp) * phi(A, B, Bp, Cp) - _delta(Bp, Dp) * phi(A, B, Ap, Cp)
            v = v + lam(A, B) * (_delta(Ap, Dp) * EPS_LO[Bp][Cp] + _delta(Bp, Dp) * EPS_LO[Ap][Cp])
            if n == 1 and J[A][B]:
                v = v + d.psi_prime.get((Ap, Bp, Cp, Dp), 0) * J[A][B]
            if not is_zero(v):
                RH[(A, Ap, B, Bp, Cp, Dp)] = v
    return CurvatureData(n, RE, RH)


# -- identities -------------------------------------------------------------


def _mixed_traces(R):
    """The four contracted identities mixing a pair index with the fibre trace."""
    r = _rng_E(R.n)
    ok = [True] * 4

    def T(Ap, Bp, A, B):
        # R_{A'B' C A B}^C: unprimed pair (C, A), fibre B
        t = 0
        for C in r:
            t = t + R.E(C, Ap, A, Bp, B, C)
        return t

    def S(A, B, Ap, Bp):
        # R_{AB C' A' B'}^{C'}: primed pair (C', A'), fibre B'
        return R.H(A, 0, B, Ap, Bp, 0) + R.H(A, 1, B, Ap, Bp, 1)

    for Ap, Bp, A, B in product((0, 1), (0, 1), r, r):
        if not is_zero(T(Ap, Bp, A, B) - T(Bp, Ap, A, B) + T(Ap, Bp, B, A) - T(Bp, Ap, B, A)):
            ok[0] = False
        if not is_zero(T(Ap, Bp, A, B) + T(Bp, Ap, A, B) - T(Ap, Bp, B, A) - T(Bp, Ap, B, A)):
            ok[1] = False
        if not is_zero(S(A, B, Ap, Bp) - S(B, A, Ap, Bp) + S(A, B, Bp, Ap) - S(B, A, Bp, Ap)):
            ok[2] = False
        if not is_zero(S(A, B, Ap, Bp) + S(B, A, Ap, Bp) - S(A, B, Bp, Ap) - S(B, A, Bp, Ap)):
            ok[3] = False
    return ok


def first_bianchi_ok(R):
    """Cyclic identity R_{abc}^d + R_{bca}^d + R_{cab}^d = 0 on the complexified tangent bundle."""
    r = _rng_E(R.n)
    pts = list(product(r, (0, 1)))
    for a, b, c in product(pts, repeat=3):
        if not (a < b < c):
            continue
        for d in pts:
            v = R.full(a, b, c, d) + R.full(b, c, a, d) + R.full(c, a, b, d)
            if not is_zero(v):
                return False
    return True


def _raise_pair(R, kind):
    """Curvature with both primed pair indices raised: (A, B, X', Y', fibre lower, fibre upper)."""
    r = _rng_E(R.n)
    get = R.E if kind == "E" else R.H
    fib = r if kind == "E" else (0, 1)
    out = {}
    for A, B, Xp, Yp, C, D in product(r, r, (0, 1), (0, 1), fib, fib):
        v = 0
        for P, Q in product((0, 1), repeat=2):
            m = EPS_HI[P][Xp] * EPS_HI[Q][Yp]
            if m:
                w = get(A, P, B, Q, C, D)
                if not is_zero(w):
                    v = v + w if m == 1 else v - w
        if not is_zero(v):
            out[(A, B, Xp, Yp, C, D)] = v
    return out


def h_alt_totally_symmetric_ok(R):
    """R_{[AB]}^{(A'B'}{}_{C'}^{D')} = 0."""
    up = _raise_pair(R, "H")
    r = _rng_E(R.n)
    for A, B in product(r, repeat=2):
        if A >= B:
            continue
        for X, Y, S, C in product((0, 1), repeat=4):
            if not X <= Y <= S:
                continue
            tot = 0
            for P in permutations((X, Y, S)):
                tot = tot + up.get((A, B, P[0], P[1], C, P[2]), 0) - up.get((B, A, P[0], P[1], C, P[2]), 0)
            if not is_zero(tot):
                return False
    return True


def e_alt_skew_ok(R):
    """R_{A'_1A'_2[ABC]}^D = 0."""
    r = _rng_E(R.n)
    for Ap, Bp in product((0, 1), repeat=2):
        for A, B, C in product(r, repeat=3):
            if not (A < B < C):
                continue
            for D in r:
                tot = 0
                for P in permutations((0, 1, 2)):
                    x = (A, B, C)
                    s = _perm_sign3(P)
                    w = R.E(x[P[0]], Ap, x[P[1]], Bp, x[P[2]], D)
                    if not is_zero(w):
                        tot = tot + w if s == 1 else tot - w
                if not is_zero(tot):
                    return False
    return True


def _perm_sign3(p):
    inv = sum(1 for i in range(3) for j in range(i + 1, 3) if p[i] > p[j])
    return -1 if inv % 2 else 1


def e_sym_phi_ok(R, d=None):
    """R_{ABC}^{(A'B')D} = 2 delta_{[A}^D Phi_{B]C}^{(A'B')}."""
    d = d or decompose_curvature(R)
    up = _raise_pair(R, "E")
    r = _rng_E(R.n)
    phi_up = {}
    for A, B, X, Y in product(r, r, (0, 1), (0, 1)):
        v = 0
        for P, Q in product((0, 1), repeat=2):
            m = EPS_HI[P][X] * EPS_HI[Q][Y]
            if m:
                w = d.phi.get((A, B, P, Q), 0)
                v = v + w if m == 1 else v - w
        phi_up[(A, B, X, Y)] = v
    for A, B, X, Y, C, D in product(r, r, (0, 1), (0, 1), r, r):
        lhs = (up.get((A, B, X, Y, C, D), 0) + up.get((A, B, Y, X, C, D), 0)) * HALF
        rhs = _delta(A, D) * phi_up[(B, C, X, Y)] - _delta(B, D) * phi_up[(A, C, X, Y)]
        if not is_zero(lhs - rhs):
            return False
    return True


def check_traces(R):
    """Every identity a unimodular quaternionic curvature must satisfy, reported separately."""
    anti = antisymmetry_ok(R)
    tr = traces_ok(R)
    out = {"pair_antisymmetry": anti, "fibre_traces": tr}
    mixed = _mixed_traces(R)
    for name, ok in zip(
        ("E_alt_primed_sym_unprimed", "E_sym_primed_alt_unprimed", "H_alt_unprimed_sym_primed", "H_sym_unprimed_alt_primed"),
        mixed,
    ):
        out["contracted_" + name] = ok
    out["first_bianchi"] = first_bianchi_ok(R)
    out["H_alt_totally_symmetric_vanishes"] = h_alt_totally_symmetric_ok(R)
    out["E_skew_three_vanishes"] = e_alt_skew_ok(R)
    if anti and tr:
        out["E_sym_primed_is_phi"] = e_sym_phi_ok(R)
    else:
        out["E_sym_primed_is_phi"] = False
    return out


# -- Ricci and scalar curvature ---------------------------------------------


def ricci(R):
    """R_{ac} = R_{abc}^b, keyed by ((A, A'), (C, C'))."""
    r = _rng_E(R.n)
    pts = list(product(r, (0, 1)))
    out = {}
    for a, c in product(pts, repeat=2):
        v = 0
        for b in pts:
            v = v + R.full(a, b, c, b)
        if not is_zero(v):
            out[(a, c)] = v
    return out


def ricci_scalar(R, qk=False, decomposition=None):
    """(Ricci, scalar curvature, einstein) with g^{ac} = eps^{AC} eps^{A'C'}.

    With ``qk`` the curvature must have Phi = 0 and Lambda proportional to the
    unprimed symplectic form; einstein then reports whether
    R_{ac} = 2(n+2) Lambda_{AC} eps_{A'C'} and s = 8n(n+2) Lambda.
    """
    n = R.n
    ric = ricci(R)
    Jh = omega_hi(n)
    s = 0
    for ((A, Ap), (C, Cp)), v in ric.items():
        m = Jh[A][C] * EPS_HI[Ap][Cp]
        if m:
            s = s + v if m == 1 else s - v
    einstein = None
    if qk:
        d = decomposition or decompose_curvature(R)
        if not d.is_qk():
            raise NotQuaternionicKahler("Phi must vanish and Lambda must be proportional to eps")
        J = omega_lo(n)
        lam = d.scalar_lambda()
        einstein = is_zero(s - lam * (8 * n * (n + 2)))
        r = _rng_E(n)
        for A, Ap, C, Cp in product(r, (0, 1), r, (0, 1)):
            want = lam * (2 * (n + 2) * J[A][C] * EPS_LO[Ap][Cp])
            if not is_zero(ric.get(((A, Ap), (C, Cp)), 0) - want):
                einstein = False
    return ric, s, einstein


# -- generalized Ricci identity ---------------------------------------------


def apply_ricci_identity(R, f, a, b):
    """2 nabla_{[a} nabla_{b]} f expressed through the curvature.

    Upper primed slots gain + R_{abD'}^{A'} f^{..D'..}; every lower slot loses
    R_{abB}^D f_{..D..}.  Upper unprimed slots are not supported.
    """
    slots = f.cls.slots
    if E_UP in slots:
        raise BadSlots("upper unprimed slots are not supported")
    A, Ap = a
    B, Bp = b
    n = R.n
    r = _rng_E(n)
    out = {}
    for key in f.cls.keys():
        idx = f.cls.full_index(key)
        acc = 0
        for i, tag in enumerate(slots):
            x = idx[i]
            if tag == E_LO:
                for D in r:
                    g = R.E(A, Ap, B, Bp, x, D)
                    if not is_zero(g):
                        w = f.get(idx[:i] + (D,) + idx[i + 1 :])
                        if not is_zero(w):
                            acc = acc - g * w
            elif tag == H_LO:
                for D in (0, 1):
                    g = R.H(A, Ap, B, Bp, x, D)
                    if not is_zero(g):
                        w = f.get(idx[:i] + (D,) + idx[i + 1 :])
                        if not is_zero(w):
                            acc = acc - g * w
            else:
                for D in (0, 1):
                    g = R.H(A, Ap, B, Bp, D, x)
                    if not is_zero(g):
                        w = f.get(idx[:i] + (D,) + idx[i + 1 :])
                        if not is_zero(w):
                            acc = acc + g * w
        if not is_zero(acc):
            out[key] = acc
    return SpinorTensor(f.cls, out, check=False)


def raised_commutator(R, f, A, Ap, B, Bp):
    """(nabla_A^{A'} nabla_B^{B'} - nabla_B^{B'} nabla_A^{A'}) f through the curvature."""
    out = None
    for X, Y in product((0, 1), repeat=2):
        m = EPS_HI[X][Ap] * EPS_HI[Y][Bp]
        if not m:
            continue
        t = apply_ricci_identity(R, f, (A, X), (B, Y))
        t = t if m == 1 else -t
        out = t if out is None else out + t
    return out


def sym_alt_commutator(R, f, A1, A2, A1p, A2p):
    """nabla_{[A_1}^{(A'_1} nabla_{A_2]}^{A'_2)} f through the curvature."""
    t = raised_commutator(R, f, A1, A1p, A2, A2p) + raised_commutator(R, f, A1, A2p, A2, A1p)
    return t.scale(HALF * HALF)


# -- random admissible data -------------------------------------------------


def _rand(rng):
    return FieldElement(rng.randint(-3, 3))


def _trace_free_symmetric(raw, dim):
    """Totally symmetrise the three lower slots and remove the traces."""
    sym = {}
    r = range(dim)
    sixth = FieldElement(mpq(1, 6))
    for A, B, C, D in product(r, repeat=4):
        v = 0
        for P in permutations((A, B, C)):
            v = v + raw.get(P + (D,), 0)
        sym[(A, B, C, D)] = v * sixth
    # the trace t_{BC} = sym_{ABC}^A is symmetric; subtract delta_{(A}^D T_{BC)} with T = 3 t / (dim + 2)
    tr = {}
    for B, C in product(r, repeat=2):
        v = 0
        for A in r:
            v = v + sym[(A, B, C, A)]
        tr[(B, C)] = v * FieldElement(mpq(3, dim + 2))
    third = FieldElement(mpq(1, 3))
    out = {}
    for A, B, C, D in product(r, repeat=4):
        corr = _delta(A, D) * tr[(B, C)] + _delta(B, D) * tr[(A, C)] + _delta(C, D) * tr[(A, B)]
        out[(A, B, C, D)] = sym[(A, B, C, D)] - corr * third
    return out


def random_decomposition(n, seed=0, qk=False, psi=True):
    """Random admissible (Lambda, Phi, Psi[, Psi']) with small integer raw entries."""
    rng = random.Random(seed)
    r = _rng_E(n)
    lam = {}
    if qk:
        L = _rand(rng) or FieldElement(1)
        J = omega_lo(n)
        for A, B in product(r, repeat=2):
            if J[A][B]:
                lam[(A, B)] = L * J[A][B]
    else:
        for A, B in product(r, repeat=2):
            if A < B:
                v = _rand(rng)
                lam[(A, B)] = v
                lam[(B, A)] = -v
    phi = {}
    if not qk:
        for A, B, Ap, Bp in product(r, r, (0, 1), (0, 1)):
            if A <= B and Ap <= Bp:
                v = _rand(rng)
                for key in {(A, B, Ap, Bp), (B, A, Ap, Bp), (A, B, Bp, Ap), (B, A, Bp, Ap)}:
                    phi[key] = v
    ps = {}
    if psi:
        raw = {k: _rand(rng) for k in product(r, repeat=4) if rng.random() < 0.3}
        ps = _trace_free_symmetric(raw, 2 * n)
    pp = {}
    if n == 1 and psi:
        raw = {k: _rand(rng) for k in product((0, 1), repeat=4)}
        pp = _trace_free_symmetric(raw, 2)
    return CurvatureDecomposition(n, lam, phi, ps, pp)


def qk_curvature(n, lam_value, psi=None):
    """Curvature with Phi = 0 and Lambda_{AB} = lam * eps_{AB}."""
    J = omega_lo(n)
    lam = {}
    for A, B in product(_rng_E(n), repeat=2):
        if J[A][B]:
            lam[(A, B)] = FieldElement.coerce(lam_value) * J[A][B]
    return reconstruct_curvature(CurvatureDecomposition(n, lam, {}, psi or {}))
