"""Curved local models: connection jets at a point, their curvature and conformal changes.

A model is a frame Z_a (a = 2A + A') of vector fields with jet coefficients
together with connection coefficients Gamma_{aB}^C on E and Gamma_{aB'}^{C'}
on H, meaning nabla_{Z_a} e_B = Gamma_{aB}^C e_C.  Admissible models are
torsion free, trace free on E and preserve the symplectic form on H; after a
conformal change these hold with respect to the rescaled volume and form.

Generic admissible models are produced from hyperkaehler Gibbons-Hawking
metrics on each quaternionic block: the Levi-Civita connection there is
already of the required type with H flat.  A conformal change followed by a
constant-free rescaling of the frame brings the forms back to the standard
ones while making Lambda and Phi nonzero.
"""

import random
from itertools import product

from gmpy2 import mpq

from . import linalg
from .covariant import FrameGeometry, NablaView, RaiseView, D_lower, D_upper, baston, is_zero, smul
from .curvature import (
    CurvatureData,
    apply_ricci_identity,
    check_traces,
    decompose_curvature,
    lambda_part,
    reconstruct_curvature,
)
from .errors import OrderUnderflow, SingularConformalFactor, UnsupportedDimension
from .field import INV_SQRT2, ONE, ZERO, FieldElement
from .frames import _PATTERN, flat_frame_rule
from .scalars import JetFn, PolynomialFn
from .symbols import ComplexSpec
from .tensor import E_LO, EPS_LO, H_LO, SymmetryClass, SpinorTensor


def _q(a, b=1):
    return FieldElement(mpq(a, b))


def as_jet(x, nvars, order):
    if isinstance(x, JetFn):
        return x.truncate(order)
    if isinstance(x, PolynomialFn):
        return x.truncate(order)
    return JetFn.constant(nvars, FieldElement.coerce(x), order=order)


def embed(j, nvars, offset):
    """Jet in a few variables placed at coordinates offset+1, offset+2, ..."""
    k = j.nvars
    terms = {}
    for key, v in j.terms.items():
        e = [0] * nvars
        e[offset : offset + k] = key[1:]
        terms[(key[0],) + tuple(e)] = v
    if isinstance(j, JetFn):
        return JetFn(nvars, j.order, terms)
    return PolynomialFn(nvars, terms)


def _value(x):
    if isinstance(x, int):
        return FieldElement(x)
    return x.constant_term() if hasattr(x, "constant_term") else x


# -- the model type ---------------------------------------------------------


class JetModel:
    """Connection jets at the origin of R^{4n} in a (possibly non-holonomic) frame."""

    def __init__(self, n, order, frame, gE, gH, eps_scale=None, vol_scale=None, label="", upsilon=None):
        self.n = n
        self.nvars = 4 * n
        self.order = order
        self.frame = frame
        self.gE = gE
        self.gH = gH
        self.eps_scale = eps_scale
        self.vol_scale = vol_scale
        self.label = label
        self.upsilon = upsilon
        self._curv = None
        self._lam = None

    @property
    def gamma_order(self):
        orders = [v.order for g in self.gE + self.gH for v in g.values() if getattr(v, "order", None) is not None]
        return min(orders) if orders else None

    def geometry(self, with_lambda=True):
        lam = self.lam() if with_lambda else None
        return FrameGeometry(self.n, self.frame, self.gE, self.gH, self.eps_scale, lam, self.order)

    def curvature(self):
        if self._curv is None:
            self._curv = curvature_from_connection(self)
        return self._curv

    def lam(self):
        """Lambda_{AB} as jets, using the model's own form on H."""
        if self._lam is None:
            if not any(self.gE) and not any(self.gH):
                self._lam = {}
            else:
                self._lam = lambda_part(self.curvature(), self.eps_scale)
        return self._lam

    def truncate(self, m):
        """The same model with Gamma kept to order m and the frame to order m + 1."""
        tr = lambda v: v.truncate(m) if hasattr(v, "truncate") else v
        tf = lambda v: v.truncate(m + 1) if hasattr(v, "truncate") else v
        frame = [[(c, tf(v)) for c, v in rule] for rule in self.frame]
        gE = [{k: tr(v) for k, v in g.items()} for g in self.gE]
        gH = [{k: tr(v) for k, v in g.items()} for g in self.gH]
        eps = None if self.eps_scale is None else tf(self.eps_scale)
        vol = None if self.vol_scale is None else tf(self.vol_scale)
        return JetModel(self.n, min(self.order, m + 1), frame, gE, gH, eps, vol, self.label)

    def describe(self):
        return {
            "n": self.n,
            "label": self.label,
            "frame_order": self.order,
            "gamma_order": self.gamma_order,
            "standard_forms": self.eps_scale is None and self.vol_scale is None,
        }


def flat_model(n, order=3):
    frame = [flat_frame_rule(A, Ap) for A in range(2 * n) for Ap in (0, 1)]
    return JetModel(n, order, frame, [{} for _ in range(4 * n)], [{} for _ in range(4 * n)], label="flat")


# -- Gibbons-Hawking blocks -------------------------------------------------


def _laplacian(p):
    out = 0
    for a in range(1, p.nvars + 1):
        d = p.derive(a).derive(a)
        if not d.is_zero():
            out = out + d
    return out


def random_harmonic(rng, maxdeg=3, terms=2):
    """Sum of random harmonic homogeneous polynomials of degrees 1..maxdeg in three variables."""
    x = [PolynomialFn.variable(3, a) for a in (1, 2, 3)]
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    parts = []
    for d in range(1, maxdeg + 1):
        coeffs = {}
        for _ in range(terms):
            e = [0, 0, 0]
            for _ in range(d):
                e[rng.randrange(3)] += 1
            coeffs[tuple(e)] = rng.choice((-2, -1, 1, 2))
        p = PolynomialFn.from_dict(3, coeffs)
        if d >= 2:
            # for these degrees the Laplacian is harmonic already, and Delta(r^2 q) = (4 deg q + 6) q
            lap = _laplacian(p)
            p = p - r2 * lap * _q(1, 4 * (d - 2) + 6)
        if not p.is_zero():
            parts.append((d, p))
    return parts


def gh_potential(parts):
    """V = 1 + h and the one-form omega with d omega = *dV, both in three variables."""
    x = [PolynomialFn.variable(3, a) for a in (1, 2, 3)]
    V = PolynomialFn.constant(3, ONE)
    omega = [PolynomialFn(3), PolynomialFn(3), PolynomialFn(3)]
    for d, h in parts:
        V = V + h
        e = d - 1
        w = _q(1, e + 2)
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            b = h.derive(i + 1)
            # *dV contains b dx_j ^ dx_k; contract with the radial field
            omega[k] = omega[k] + b * x[j] * w
            omega[j] = omega[j] - b * x[k] * w
    return V, omega


def _vf_apply(X, f):
    """Vector field {coord: coeff} applied to a jet."""
    out = 0
    for c, v in X.items():
        d = f.derive(c)
        if not d.is_zero():
            out = out + v * d
    return out


def _bracket(X, Y, nv):
    out = {}
    for c in range(1, nv + 1):
        v = 0
        if c in Y:
            v = v + _vf_apply(X, Y[c])
        if c in X:
            v = v - _vf_apply(Y, X[c])
        if not is_zero(v):
            out[c] = v
    return out


def gh_block(parts, order, sign=1):
    """Frame and connection of one Gibbons-Hawking block in four variables.

    Returns (frame, gE, gH) with local indices: frame[a] for a = 2r + A'
    maps coordinates 1..4 to jets, gE[a][(B, C)] and gH[a][(B', C')].
    """
    V3, om3 = gh_potential(parts)
    V = embed(V3, 4, 1).truncate(order)
    om = [embed(w, 4, 1).truncate(order) * sign for w in om3]
    s = V.sqrt()
    si = s.inverse()
    X = [{1: s}]
    for i in range(3):
        X.append({i + 2: si, 1: -(si * om[i])})
    theta = [[si, si * om[0], si * om[1], si * om[2]]]
    for i in range(3):
        row = [0, 0, 0, 0]
        row[i + 1] = s
        theta.append(row)
    # structure functions C_{ab}^c in the orthonormal frame
    C = {}
    for a in range(4):
        for b in range(4):
            if a == b:
                continue
            br = _bracket(X[a], X[b], 4)
            for c in range(4):
                v = 0
                for mu, w in br.items():
                    t = theta[c][mu - 1]
                    if not is_zero(t):
                        v = v + t * w
                C[(a, b, c)] = v
    g = lambda a, b, c: C.get((a, b, c), 0)
    G = {}
    half = _q(1, 2)
    for a, b, c in product(range(4), repeat=3):
        v = (g(a, b, c) - g(b, c, a) + g(c, a, b)) * half
        if not is_zero(v):
            G[(a, b, c)] = v
    # complex frame Z_a = sum P[a][mu] X_mu
    P = [[ZERO] * 4 for _ in range(4)]
    for r in (0, 1):
        for Ap in (0, 1):
            for off, coef in _PATTERN[(r, Ap)]:
                P[2 * r + Ap][off - 1] = coef * INV_SQRT2
    Pinv = linalg.inverse(P)
    GZ = {}
    for a, b, c in product(range(4), repeat=3):
        v = 0
        for (mu, nu, rho), w in G.items():
            k = P[a][mu] * P[b][nu] * Pinv[rho][c]
            if not k.is_zero():
                v = v + w * k
        if not is_zero(v):
            GZ[(a, b, c)] = v
    gz = lambda a, b, c: GZ.get((a, b, c), 0)
    gE, gH = [], []
    for a in range(4):
        e, h = {}, {}
        for B, C_ in product((0, 1), repeat=2):
            v = (gz(a, 2 * B, 2 * C_) + gz(a, 2 * B + 1, 2 * C_ + 1)) * half
            if not is_zero(v):
                e[(B, C_)] = v
            w = (gz(a, B, C_) + gz(a, 2 + B, 2 + C_)) * half
            if not is_zero(w):
                h[(B, C_)] = w
        gE.append(e)
        gH.append(h)
    # the split must reproduce the full coefficients exactly
    for a, b, c in product(range(4), repeat=3):
        B, Bp = divmod(b, 2)
        C_, Cp = divmod(c, 2)
        v = (gE[a].get((B, C_), 0) if Bp == Cp else 0) + (gH[a].get((Bp, Cp), 0) if B == C_ else 0)
        if not is_zero(v - gz(a, b, c)):
            raise ArithmeticError("connection does not split into E and H parts")
    frame = []
    for a in range(4):
        f = {}
        for mu in range(4):
            k = P[a][mu]
            if k.is_zero():
                continue
            for c, v in X[mu].items():
                f[c] = f[c] + v * k if c in f else v * k
        frame.append(f)
    return frame, gE, gH


def gh_product_model(n, order, rng, harmonic_terms=2):
    """Product of n Gibbons-Hawking blocks with flat H connection."""
    nv = 4 * n
    frame, gE, gH = [], [], []
    for l in range(n):
        parts = random_harmonic(rng, 3, harmonic_terms)
        for sign in (1, -1):
            fr, e, h = gh_block(parts, order, sign)
            if not any(h):
                break
        else:
            raise ArithmeticError("no orientation makes the H connection flat")
        for r in (0, 1):
            for Ap in (0, 1):
                a = 2 * r + Ap
                frame.append([(4 * l + c, embed(v, nv, 4 * l)) for c, v in sorted(fr[a].items())])
                gE.append({(2 * l + B, 2 * l + C): embed(v, nv, 4 * l) for (B, C), v in e[a].items()})
                gH.append({})
    return JetModel(n, order, frame, gE, gH, label="gibbons-hawking")


# -- frame operations -------------------------------------------------------


def _combine(rules, weights):
    out = {}
    for rule, w in zip(rules, weights):
        if is_zero(w):
            continue
        for c, v in rule:
            t = smul(w, v)
            out[c] = out[c] + t if c in out else t
    return sorted((c, v) for c, v in out.items() if not is_zero(v))


def random_sl(rng, d, steps=4):
    """Product of elementary matrices with small Gaussian integer entries (determinant 1)."""
    from .field import gaussian

    m = linalg.identity(d)
    for _ in range(steps):
        i, j = rng.sample(range(d), 2)
        c = gaussian(rng.randint(-1, 1), rng.randint(-1, 1))
        m = [row[:] for row in m]
        for k in range(d):
            m[i][k] = m[i][k] + c * m[j][k]
    return m


def gauge(model, g, h):
    """Change frame by Z'_{AA'} = g_A^B h_{A'}^{B'} Z_{BB'} with det g = det h = 1."""
    n = model.n
    r = range(2 * n)
    gi, hi = linalg.inverse(g), linalg.inverse(h)
    G = [[g[A][B] * h[Ap][Bp] for B in r for Bp in (0, 1)] for A in r for Ap in (0, 1)]
    frame = [_combine(model.frame, row) for row in G]

    def conj(gam, m, mi, dim):
        out = []
        for row in G:
            acc = {}
            for a, w in enumerate(row):
                if w.is_zero():
                    continue
                for (D, E), v in gam[a].items():
                    for B in range(dim):
                        x = m[B][D]
                        if x.is_zero():
                            continue
                        for C in range(dim):
                            y = mi[E][C]
                            if y.is_zero():
                                continue
                            t = v * (w * x * y)
                            acc[(B, C)] = acc[(B, C)] + t if (B, C) in acc else t
            out.append({k: v for k, v in acc.items() if not is_zero(v)})
        return out

    gE = conj(model.gE, g, gi, 2 * n)
    gH = conj(model.gH, h, hi, 2)
    return JetModel(n, model.order, frame, gE, gH, model.eps_scale, model.vol_scale, model.label + "+gauge")


def _mulj(x, y):
    if x is None:
        return y
    return x * y


def conformal_change(model, Omega):
    """The connection obtained from the conformal factor Omega.

    Upsilon_a = Omega^{-1} Z_a Omega; Gamma_{aB}^D gains delta_A^D Upsilon_{BA'}
    and Gamma_{aB'}^{D'} gains delta_{A'}^{D'} Upsilon_{AB'}.  The new
    connection preserves Omega times the volume form on E and Omega times the
    symplectic form on H.
    """
    n = model.n
    Om = as_jet(Omega, model.nvars, model.order)
    if Om.constant_term().is_zero():
        raise SingularConformalFactor("the conformal factor vanishes at the base point")
    inv = Om.inverse()
    geom = model.geometry(with_lambda=False)
    ups = []
    for a in range(4 * n):
        z = geom.apply_frame(a, Om, Om.order - 1)
        ups.append(smul(inv, z, Om.order - 1) if not is_zero(z) else 0)
    gE = [dict(g) for g in model.gE]
    gH = [dict(g) for g in model.gH]
    for A in range(2 * n):
        for Ap in (0, 1):
            a = 2 * A + Ap
            for B in range(2 * n):
                u = ups[2 * B + Ap]
                if not is_zero(u):
                    gE[a][(B, A)] = gE[a][(B, A)] + u if (B, A) in gE[a] else u
            for Bp in (0, 1):
                u = ups[2 * A + Bp]
                if not is_zero(u):
                    gH[a][(Bp, Ap)] = gH[a][(Bp, Ap)] + u if (Bp, Ap) in gH[a] else u
    gE = [{k: v for k, v in g.items() if not is_zero(v)} for g in gE]
    gH = [{k: v for k, v in g.items() if not is_zero(v)} for g in gH]
    eps = _mulj(model.eps_scale, Om)
    vol = _mulj(model.vol_scale, Om)
    out = JetModel(n, model.order, model.frame, gE, gH, eps, vol, model.label + "+conformal", upsilon=ups)
    return out


def rescale(model, kappa, rho):
    """Express the same connection in the frame Z' = Z / (kappa rho).

    E sections are rescaled by kappa and H sections by rho, so the volume
    form is divided by kappa^{2n} and the symplectic form by rho^2.
    """
    n = model.n
    m = model.order
    kap = as_jet(kappa, model.nvars, m)
    rh = as_jet(rho, model.nvars, m)
    lam = (kap * rh).inverse()
    geom = model.geometry(with_lambda=False)
    frame = [[(c, smul(lam, v, m)) for c, v in rule] for rule in model.frame]
    kinv, rinv = kap.inverse(), rh.inverse()
    gE, gH = [], []
    for a in range(4 * n):
        dk = geom.apply_frame(a, kap, m - 1)
        dr = geom.apply_frame(a, rh, m - 1)
        e = dict(model.gE[a])
        h = dict(model.gH[a])
        if not is_zero(dk):
            t = kinv * dk
            for B in range(2 * n):
                e[(B, B)] = e[(B, B)] - t if (B, B) in e else -t
        if not is_zero(dr):
            t = rinv * dr
            for B in (0, 1):
                h[(B, B)] = h[(B, B)] - t if (B, B) in h else -t
        gE.append({k: lam * v for k, v in e.items() if not is_zero(v)})
        gH.append({k: lam * v for k, v in h.items() if not is_zero(v)})
    eps = None if model.eps_scale is None else model.eps_scale * rinv * rinv
    vol = None if model.vol_scale is None else model.vol_scale * kinv ** (2 * n)
    if eps is not None and (eps - ONE).is_zero():
        eps = None
    if vol is not None and (vol - ONE).is_zero():
        vol = None
    return JetModel(n, m, frame, gE, gH, eps, vol, model.label + "+rescaled")


def random_conformal_factor(rng, nvars, nvars_used=2, terms=3):
    """1 + a few monomials of degree 1..2 in a few variables (integer coefficients)."""
    coords = rng.sample(range(nvars), min(nvars_used, nvars))
    coeffs = {(0,) * nvars: 1}
    for _ in range(terms):
        e = [0] * nvars
        for _ in range(rng.choice((1, 2))):
            e[rng.choice(coords)] += 1
        coeffs[tuple(e)] = rng.choice((-2, -1, 1, 2))
    return PolynomialFn.from_dict(nvars, coeffs)


def sample_connection(n, jet_order=3, seed=0, gauge_steps=3):
    """A random admissible model with generic Lambda, Phi and Psi at the base point.

    The frame is known to order jet_order and the connection to order jet_order - 1.
    """
    if n < 2:
        raise UnsupportedDimension("curved models need n >= 2 (n = 1 would need Psi' = 0)")
    if jet_order < 1:
        raise OrderUnderflow("jet order must be at least 1")
    rng = random.Random(seed)
    # the construction differentiates the potentials once, so build at order >= 2
    build = max(jet_order, 2)
    base = gh_product_model(n, build, rng)
    if gauge_steps:
        base = gauge(base, random_sl(rng, 2 * n, gauge_steps), random_sl(rng, 2, gauge_steps))
    w = random_conformal_factor(rng, 4 * n)
    wj = as_jet(w, 4 * n, build)
    model = conformal_change(base, wj ** (2 * n))
    model = rescale(model, wj, wj ** n)
    if build > jet_order:
        model = model.truncate(jet_order - 1)
    model.label = f"sample(n={n}, seed={seed})"
    return model


# -- invariants -------------------------------------------------------------


def _log_derivative(geom, f, a):
    if f is None:
        return 0
    z = geom.apply_frame(a, f, f.order - 1)
    return 0 if is_zero(z) else f.inverse() * z


def check_model(model):
    """Trace, symplectic and torsion conditions of a model (exact, at every available order)."""
    n = model.n
    geom = model.geometry(with_lambda=False)
    trace_ok = eps_ok = True
    for a in range(4 * n):
        t = 0
        for B in range(2 * n):
            t = t + model.gE[a].get((B, B), 0)
        if not is_zero(t - _log_derivative(geom, model.vol_scale, a)):
            trace_ok = False
        # nabla_a (sigma eps)_{A'B'} = Z_a sigma eps - sigma (Gamma_{aA'}^{D'} eps_{D'B'} + Gamma_{aB'}^{D'} eps_{A'D'})
        dl = _log_derivative(geom, model.eps_scale, a)
        g = model.gH[a]
        for Ap, Bp in product((0, 1), repeat=2):
            v = dl * EPS_LO[Ap][Bp] if not is_zero(dl) else 0
            for D in (0, 1):
                if EPS_LO[D][Bp]:
                    v = v - g.get((Ap, D), 0) * EPS_LO[D][Bp]
                if EPS_LO[Ap][D]:
                    v = v - g.get((Bp, D), 0) * EPS_LO[Ap][D]
            if not is_zero(v):
                eps_ok = False
    return {"trace": trace_ok, "symplectic": eps_ok, "torsion_free": torsion_free(model)}


def torsion_free(model):
    """nabla nabla phi is symmetric for every coordinate function phi."""
    n = model.n
    nv = model.nvars
    geom = model.geometry(with_lambda=False)
    cls = SymmetryClass(n, 0, 0)
    # second derivatives at the base point need a coordinate jet of order 2
    o = max(model.order, 2)
    for mu in range(1, nv + 1):
        phi = JetFn(nv, o, {(1,) + tuple(1 if i == mu - 1 else 0 for i in range(nv)): ONE})
        f = SpinorTensor(cls, {((), 0, ()): phi}, check=False)
        N2 = NablaView(geom, NablaView(geom, f))
        for A, Ap, B, Bp in product(range(2 * n), (0, 1), range(2 * n), (0, 1)):
            if (A, Ap) >= (B, Bp):
                continue
            if not is_zero(N2.get((A, Ap, B, Bp)) - N2.get((B, Bp, A, Ap))):
                return False
    return True


def nabla_preserves_forms(model):
    """nabla of the volume form on E (scaled) and of the symplectic form on H vanish."""
    n = model.n
    geom = model.geometry(with_lambda=False)
    o = model.order
    nv = model.nvars
    vol = model.vol_scale if model.vol_scale is not None else JetFn.constant(nv, ONE, order=o)
    eps = model.eps_scale if model.eps_scale is not None else JetFn.constant(nv, ONE, order=o)
    top = SymmetryClass(n, 2 * n, 0)
    v = SpinorTensor(top, {(tuple(range(2 * n)), 0, ()): vol}, check=False)
    ecls = SymmetryClass(n, 0, 0, (H_LO, H_LO))
    e = SpinorTensor(ecls, {((), 0, (0, 1)): eps, ((), 0, (1, 0)): -eps}, check=False)
    ok = True
    for T in (v, e):
        N = NablaView(geom, T)
        for key in N.cls.keys():
            if not is_zero(N.get(N.cls.full_index(key))):
                ok = False
    return ok


# -- curvature --------------------------------------------------------------


def curvature_from_connection(model):
    """R_E and R_H from the commutator on delta sections: 2 nabla_[a nabla_b] e^D = -R_{ab.}^D."""
    n = model.n
    geom = model.geometry(with_lambda=False)
    RE, RH = {}, {}
    r = range(2 * n)
    pairs = list(product(r, (0, 1)))
    for tag, dim, store in ((E_LO, 2 * n, RE), (H_LO, 2, RH)):
        cls = SymmetryClass(n, 0, 0, (tag,))
        for D in range(dim):
            f = SpinorTensor(cls, {((), 0, (D,)): ONE}, check=False)
            N2 = NablaView(geom, NablaView(geom, f))
            for a, b in product(pairs, repeat=2):
                if a >= b:
                    continue
                for C in range(dim):
                    v = N2.get(a + b + (C,)) - N2.get(b + a + (C,))
                    if not is_zero(v):
                        store[a + b + (C, D)] = -v
                        store[b + a + (C, D)] = v
    return CurvatureData(n, RE, RH)


def covariant_derivative(model, f, variant="full"):
    from .covariant import nabla

    return nabla(model.geometry(with_lambda=False), f, variant)


# -- verification of the complex --------------------------------------------


def random_jet(rng, nvars, order, terms=4):
    coeffs = {}
    for _ in range(terms):
        e = [0] * nvars
        for _ in range(rng.randint(0, order)):
            e[rng.randrange(nvars)] += 1
        coeffs[tuple(e)] = rng.randint(-3, 3)
    return JetFn(nvars, order, PolynomialFn.from_dict(nvars, coeffs).terms)


def random_jet_section(rng, cls, order, terms=3, density=None):
    keys = list(cls.keys())
    if density is not None and density < len(keys):
        keys = rng.sample(keys, density)
    return SpinorTensor(cls, {k: random_jet(rng, 4 * cls.n, order, terms) for k in keys}, check=False)


def _stage_op(spec, j, geom, f):
    kind = spec.stage_kind(j)
    if kind == "lower":
        return D_lower(geom, f)
    if kind == "upper":
        return D_upper(geom, f)
    return baston(geom, f)


def _truncate(t, m):
    return SpinorTensor(t.cls, {k: v.truncate(m) for k, v in t.entries.items()}, check=False)


def _order_needed(kind):
    return 2 if kind == "baston" else 1


def lambda_closed(model):
    """nabla_{[A}^{A'} Lambda_{BC]} = 0 at the base point."""
    n = model.n
    geom = model.geometry(with_lambda=False)
    lam = model.lam()
    cls = SymmetryClass(n, 2, 0)
    t = SpinorTensor(cls, {((A, B), 0, ()): v for (A, B), v in lam.items() if A < B}, check=False)
    N = NablaView(geom, t)
    R = RaiseView(N, 1, "raise", geom)
    for A, B, C in product(range(2 * n), repeat=3):
        if not A < B < C:
            continue
        for Ap in (0, 1):
            v = R.get((A, Ap, B, C)) + R.get((B, Ap, C, A)) + R.get((C, Ap, A, B))
            if not is_zero(_value(v)):
                return False
    return True


def ricci_cross_check(model, rng, trials=1, order=2):
    """Direct commutators on random sections with one E and one H slot against the curvature."""
    n = model.n
    geom = model.geometry(with_lambda=False)
    R0 = model.curvature().values_at_origin()
    cls = SymmetryClass(n, 0, 0, (E_LO, H_LO))
    pairs = list(product(range(2 * n), (0, 1)))
    for _ in range(trials):
        f = random_jet_section(rng, cls, order, density=4)
        f0 = f.values_at_origin()
        N2 = NablaView(geom, NablaView(geom, f))
        for a, b in product(pairs, repeat=2):
            if a >= b:
                continue
            want = apply_ricci_identity(R0, f0, a, b)
            for key in cls.keys():
                idx = cls.full_index(key)
                got = _value(N2.get(a + b + idx) - N2.get(b + a + idx))
                if not is_zero(got - _value(want.get(idx))):
                    return False
    return True


class CurvedReport:
    def __init__(self, model, k, trials, seed, junctions, checks):
        self.model = model
        self.k = k
        self.trials = trials
        self.seed = seed
        self.junctions = junctions
        self.checks = checks

    @property
    def ok(self):
        return all(j["ok"] for j in self.junctions) and all(v is True for v in self.checks.values())

    def to_json(self):
        return {
            "model": self.model.describe(),
            "k": self.k,
            "trials": self.trials,
            "seed": self.seed,
            "junctions": self.junctions,
            "checks": self.checks,
            "ok": self.ok,
        }


def verify_curved_complex(model, k, trials=1, seed=0, density=3, extra_checks=True):
    """D_{j+1} D_j f vanishes at the base point for random jet sections at every stage."""
    spec = ComplexSpec(model.n, k)
    rng = random.Random(seed)
    geom = model.geometry()
    need = sum(_order_needed(kind) for kind in spec.kinds[:2]) if spec.kinds else 0
    if model.gamma_order is not None and model.gamma_order + 1 < max(need, 2):
        raise OrderUnderflow("jet order too small for the second-order junctions")
    junctions = []
    for j in range(len(spec.kinds) - 1):
        k1, k2 = spec.kinds[j], spec.kinds[j + 1]
        order = _order_needed(k1) + _order_needed(k2)
        ok = True
        for _ in range(trials):
            f = random_jet_section(rng, spec.space(j), order, density=density)
            g = _truncate(_stage_op(spec, j, geom, f), _order_needed(k2))
            h = _stage_op(spec, j + 1, geom, g)
            if any(not is_zero(_value(v)) for v in h.entries.values()):
                ok = False
        junctions.append({"stage": j, "kinds": [k1, k2], "ok": ok})
    checks = {}
    if extra_checks:
        R = model.curvature()
        R0 = R.values_at_origin()
        tr = check_traces(R0)
        checks["identities"] = all(tr.values())
        d = decompose_curvature(R0)
        checks["roundtrip"] = reconstruct_curvature(d) == R0
        checks["lambda_closed"] = lambda_closed(model)
        checks["ricci_identity"] = ricci_cross_check(model, rng)
        checks.update({"model_" + k_: v for k_, v in check_model(model).items()})
    return CurvedReport(model, k, trials, seed, junctions, checks)


# -- conformal covariance ---------------------------------------------------


def _same_gamma(g1, g2):
    for a in range(len(g1)):
        for key in set(g1[a]) | set(g2[a]):
            if not is_zero(g1[a].get(key, 0) - g2[a].get(key, 0)):
                return False
    return True


def same_connection(m1, m2):
    def scal(x, y):
        if x is None and y is None:
            return True
        x = 1 if x is None else x
        y = 1 if y is None else y
        return is_zero(x - y)

    return (
        _same_gamma(m1.gE, m2.gE)
        and _same_gamma(m1.gH, m2.gH)
        and scal(m1.eps_scale, m2.eps_scale)
        and scal(m1.vol_scale, m2.vol_scale)
    )


def upsilon_tensor(model, tilde):
    cls = SymmetryClass(model.n, 0, 0, (E_LO, H_LO))
    ent = {}
    for A in range(2 * model.n):
        for Ap in (0, 1):
            u = tilde.upsilon[2 * A + Ap]
            if not is_zero(u):
                ent[((), 0, (A, Ap))] = u
    return SpinorTensor(cls, ent, check=False)


def curvature_transformation(base, tilde):
    """Compare the decomposed curvature of the changed connection with the predicted one.

    With the forms Omega eps, the standard decomposition of the new curvature
    returns Omega Lambda~, Phi~ and Omega Psi~.
    """
    n = base.n
    r = range(2 * n)
    d = decompose_curvature(base.curvature().values_at_origin())
    dt = decompose_curvature(tilde.curvature().values_at_origin())
    geom = base.geometry(with_lambda=False)
    U = upsilon_tensor(base, tilde)
    NU = NablaView(geom, U)
    RU = RaiseView(U, 1, "raise", geom)
    NRU = NablaView(geom, RU)
    u = lambda A, Ap: _value(U.get((A, Ap)))
    ur = lambda A, Ap: _value(RU.get((A, Ap)))
    quarter = _q(1, 4)
    lam_ok = phi_ok = True
    for A, B in product(r, repeat=2):
        acc = ZERO
        for Ap in (0, 1):
            acc = acc + _value(NRU.get((A, Ap, B, Ap))) - _value(NRU.get((B, Ap, A, Ap)))
            acc = acc + u(A, Ap) * ur(B, Ap) - u(B, Ap) * ur(A, Ap)
        want = d.lam.get((A, B), ZERO) + acc * quarter
        if not is_zero(dt.lam.get((A, B), ZERO) - want):
            lam_ok = False
        for Ap, Bp in product((0, 1), repeat=2):
            acc = ZERO
            for P, Q in ((A, B), (B, A)):
                for X, Y in ((Ap, Bp), (Bp, Ap)):
                    acc = acc - _value(NU.get((P, X, Q, Y))) + u(P, X) * u(Q, Y)
            want = d.phi.get((A, B, Ap, Bp), ZERO) + acc * quarter
            if not is_zero(dt.phi.get((A, B, Ap, Bp), ZERO) - want):
                phi_ok = False
    return {"lambda": lam_ok, "phi": phi_ok, "psi": _dict_equal(d.psi, dt.psi)}


def _dict_equal(a, b):
    for k in set(a) | set(b):
        if not is_zero(a.get(k, 0) - b.get(k, 0)):
            return False
    return True


def _power(inv, e, order):
    out = JetFn.constant(inv.nvars, ONE, order=order)
    for _ in range(e):
        out = out * inv
    return out


def _scaled(t, s):
    return SpinorTensor(t.cls, {k: v * s for k, v in t.entries.items()}, check=False)


def operator_covariance(base, tilde, Omega, k, rng, trials=1, density=3):
    """D~(Omega^{-w} f) = Omega^{-w-1} D f at every stage of the complex for k."""
    spec = ComplexSpec(base.n, k)
    g0 = base.geometry()
    g1 = tilde.geometry()
    Om = as_jet(Omega, base.nvars, base.order)
    inv = Om.inverse()
    out = []
    for j, kind in enumerate(spec.kinds):
        cls = spec.space(j)
        q = cls.q
        w = q if kind == "upper" else q + 1
        order = 2 if kind == "baston" else 1
        ok = True
        for _ in range(trials):
            f = random_jet_section(rng, cls, order, density=density)
            lhs = _stage_op(spec, j, g1, _scaled(f, _power(inv, w, order)))
            rhs = _scaled(_stage_op(spec, j, g0, f), _power(inv, w + 1, order))
            diff = lhs - rhs
            if not all(is_zero(v) for v in diff.entries.values()):
                ok = False
        out.append({"stage": j, "kind": kind, "weight": w, "ok": ok})
    return out


class ConformalReport:
    def __init__(self, base, k, seed, checks, covariance):
        self.base = base
        self.k = k
        self.seed = seed
        self.checks = checks
        self.covariance = covariance

    @property
    def ok(self):
        return all(self.checks.values()) and all(c["ok"] for c in self.covariance)

    def to_json(self):
        return {
            "base": self.base.describe(),
            "k": self.k,
            "seed": self.seed,
            "checks": self.checks,
            "covariance": self.covariance,
            "ok": self.ok,
        }


def conformal_check(base, Omega, k=1, trials=1, seed=0):
    """Every transformation rule of the conformal change, exactly at the base point.

    ``k`` may be a list; the operator covariance is then checked for each
    complex while the curvature rules are checked once.
    """
    rng = random.Random(seed)
    tilde = conformal_change(base, Omega)
    checks = {"tilde_" + key: v for key, v in check_model(tilde).items()}
    checks["tilde_forms_parallel"] = nabla_preserves_forms(tilde)
    curv = curvature_transformation(base, tilde)
    checks.update({"curvature_" + key: v for key, v in curv.items()})
    cov = []
    for kk in [k] if isinstance(k, int) else k:
        cov.extend(dict(c, k=kk) for c in operator_covariance(base, tilde, Omega, kk, rng, trials))
    return ConformalReport(base, k, seed, checks, cov)


def composition_law(base, Omega1, Omega2):
    """Changing by Omega1 then Omega2 equals changing by Omega1 Omega2."""
    m = base.order
    o1 = as_jet(Omega1, base.nvars, m)
    o2 = as_jet(Omega2, base.nvars, m)
    twice = conformal_change(conformal_change(base, o1), o2)
    once = conformal_change(base, o1 * o2)
    return same_connection(twice, once)
