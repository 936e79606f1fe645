"""Principal symbols of the k-Cauchy-Fueter complex and their exactness.

Vectors on a space Y_j are lists of FieldElement in the canonical key order
of the space's SymmetryClass.  Symbols are normalised so that their entries
are polynomial in xi: first-order stages are multiplied by sqrt2/i and the
second-order stage by 2/i^2.
"""

from functools import lru_cache
from itertools import combinations
from math import comb

from gmpy2 import mpq

from . import linalg
from .errors import BadStage, DegenerateCovector, NoPreimage, NotInKernel
from .field import ONE, ZERO, FieldElement
from .frames import QONE, QZERO, qinv, qmul, qneg, tau_embed
from .tensor import SymmetryClass


class ComplexSpec:
    """The spaces Y_0, Y_1, ... of the complex for given n and k.

    Y_j = Lambda^j E* (x) S^{k-j} H* for j <= min(k, 2n), followed by
    Lambda^{k+2+m} E* (x) S^m H for m = 0 .. 2n-k-2.
    """

    def __init__(self, n, k):
        if n < 1 or k < 0:
            raise BadStage(f"invalid complex n={n} k={k}")
        self.n = n
        self.k = k
        spaces = []
        kinds = []
        for j in range(min(k, 2 * n) + 1):
            spaces.append(SymmetryClass(n, j, k - j))
        for m in range(2 * n - k - 1):
            spaces.append(SymmetryClass(n, k + 2 + m, m, sym_upper=True))
        for j in range(len(spaces) - 1):
            kinds.append("lower" if j < k else "baston" if j == k else "upper")
        self.spaces = spaces
        self.kinds = kinds

    def __repr__(self):
        return f"ComplexSpec(n={self.n}, k={self.k})"

    @property
    def length(self):
        return len(self.spaces)

    def dims(self):
        return [s.count() for s in self.spaces]

    def euler(self):
        return sum((-1) ** j * d for j, d in enumerate(self.dims()))

    def space(self, j):
        if not 0 <= j < len(self.spaces):
            raise BadStage(f"no space Y_{j} for n={self.n} k={self.k}")
        return self.spaces[j]

    def stage_kind(self, j):
        if not 0 <= j < len(self.kinds):
            raise BadStage(f"no operator at stage {j} for n={self.n} k={self.k}")
        return self.kinds[j]

    def to_json(self):
        return {"n": self.n, "k": self.k, "dims": self.dims(), "kinds": list(self.kinds)}


class XiMatrix:
    """A real covector xi in Q^{4n} with its 2n x 2 matrix xi_{AA'} and raised form."""

    def __init__(self, xi):
        xi = [mpq(x) for x in xi]
        if len(xi) % 4:
            raise ValueError("covector length must be a multiple of 4")
        self.xi = xi
        self.n = len(xi) // 4
        self.quats = [tuple(xi[4 * l : 4 * l + 4]) for l in range(self.n)]
        self.lower = tau_embed([[q] for q in self.quats])
        # xi_A^{0'} = xi_{A1'}, xi_A^{1'} = -xi_{A0'}
        self.raised = [[row[1], -row[0]] for row in self.lower]
        self._cache = {}

    def is_zero(self):
        return not any(self.xi)

    def baston(self):
        """M_{AB} = xi_{AA'} xi_B^{A'}."""
        if "M" not in self._cache:
            r = 2 * self.n
            lo, up = self.lower, self.raised
            self._cache["M"] = [[lo[a][0] * up[b][0] + lo[a][1] * up[b][1] for b in range(r)] for a in range(r)]
        return self._cache["M"]


def xi_matrix(xi):
    return XiMatrix(xi)


# -- symbol matrices --------------------------------------------------------


def _lower_symbol(src, dst, xi):
    q = src.q
    rank = {k: i for i, k in enumerate(src.keys())}
    inv = FieldElement(mpq(1, q + 1))
    rows = []
    for K, c, _ in dst.keys():
        row = [ZERO] * len(rank)
        for s, a in enumerate(K):
            rest = K[:s] + K[s + 1 :]
            for ap in (0, 1):
                x = xi.raised[a][ap]
                if x.is_zero():
                    continue
                col = rank[(rest, c + ap, ())]
                v = x * inv
                row[col] = row[col] + (v if s % 2 == 0 else -v)
        rows.append(row)
    return rows


def _upper_symbol(src, dst, xi):
    m = src.p
    rank = {k: i for i, k in enumerate(src.keys())}
    rows = []
    for K, c, _ in dst.keys():
        row = [ZERO] * len(rank)
        w0 = FieldElement(mpq(m + 1 - c, (m + 1) * len(K)))
        w1 = FieldElement(mpq(c, (m + 1) * len(K)))
        for s, a in enumerate(K):
            rest = K[:s] + K[s + 1 :]
            sgn = 1 if s % 2 == 0 else -1
            if c <= m and not xi.raised[a][0].is_zero():
                col = rank[(rest, c, ())]
                row[col] = row[col] + xi.raised[a][0] * w0 * sgn
            if c >= 1 and not xi.raised[a][1].is_zero():
                col = rank[(rest, c - 1, ())]
                row[col] = row[col] + xi.raised[a][1] * w1 * sgn
        rows.append(row)
    return rows


def _baston_symbol(src, dst, xi):
    M = xi.baston()
    rank = {k: i for i, k in enumerate(src.keys())}
    w = FieldElement(mpq(1, comb(dst.q, 2)))
    rows = []
    for K, c, _ in dst.keys():
        row = [ZERO] * len(rank)
        for s, t in combinations(range(len(K)), 2):
            x = M[K[s]][K[t]]
            if x.is_zero():
                continue
            rest = K[:s] + K[s + 1 : t] + K[t + 1 :]
            col = rank[(rest, 0, ())]
            v = x * w
            row[col] = row[col] + (v if (s + t) % 2 == 1 else -v)
        rows.append(row)
    return rows


def sigma_build(spec, j, xi):
    """Matrix of the normalised symbol sigma_j(xi): Y_j -> Y_{j+1}."""
    kind = spec.stage_kind(j)
    key = ("sigma", spec.n, spec.k, j)
    if key in xi._cache:
        return xi._cache[key]
    src, dst = spec.space(j), spec.space(j + 1)
    if kind == "lower":
        mat = _lower_symbol(src, dst, xi)
    elif kind == "upper":
        mat = _upper_symbol(src, dst, xi)
    else:
        mat = _baston_symbol(src, dst, xi)
    xi._cache[key] = mat
    return mat


def _apply(mat, v):
    return linalg.matvec(mat, v)


class ExactnessReport:
    def __init__(self, spec, dims, ranks, composition_zero, exact, euler, kernels, failures):
        self.spec = spec
        self.dims = dims
        self.ranks = ranks
        self.composition_zero = composition_zero
        self.exact = exact
        self.euler = euler
        self.kernels = kernels
        self.failures = failures

    def to_json(self):
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "dims": self.dims,
            "ranks": self.ranks,
            "composition_zero": self.composition_zero,
            "exact": self.exact,
            "euler": self.euler,
        }


def exactness_check(spec, xi, kernels=False):
    """Ranks of all symbol maps and exactness of the symbol sequence at xi.

    With ``kernels=True`` the report also carries a kernel basis of every
    sigma_j (and of the last space, which maps to zero).
    """
    if xi.is_zero():
        raise DegenerateCovector("xi = 0: every symbol vanishes and the sequence is not exact")
    mats = [sigma_build(spec, j, xi) for j in range(spec.length - 1)]
    dims = spec.dims()
    ranks = [linalg.rank(m) if dims[j] and dims[j + 1] else 0 for j, m in enumerate(mats)]
    comp = True
    for j in range(len(mats) - 1):
        if dims[j] and dims[j + 2] and not linalg.is_zero_matrix(linalg.matmul(mats[j + 1], mats[j])):
            comp = False
    failures = []
    padded = [0] + ranks + [0]
    for j, d in enumerate(dims):
        # ker sigma_j has dim d - rank_j and must equal im sigma_{j-1}
        if d - padded[j + 1] != padded[j]:
            failures.append(j)
    kers = None
    if kernels:
        kers = []
        for j, d in enumerate(dims):
            if j < len(mats) and d:
                kers.append(linalg.kernel(mats[j]) if dims[j + 1] else _unit_basis(d))
            else:
                kers.append(_unit_basis(d))
    return ExactnessReport(spec, dims, ranks, comp, comp and not failures, spec.euler(), kers, failures)


def _unit_basis(d):
    return [[ONE if i == j else ZERO for i in range(d)] for j in range(d)]


# -- normalising transform --------------------------------------------------


class Normalizer:
    """g = tau(M) for a quaternionic M with M q = e_0, so g xi_{AA'} is the normal form."""

    def __init__(self, xi):
        n = xi.n
        quats = xi.quats
        l0 = next((l for l, q in enumerate(quats) if any(q)), None)
        if l0 is None:
            raise DegenerateCovector("xi = 0 has no normal form")
        qinv0 = qinv(quats[l0])
        # N = identity with column l0 replaced by q, so N e_{l0} = q
        ninv = [[QONE if i == j else QZERO for j in range(n)] for i in range(n)]
        for l in range(n):
            ninv[l][l0] = qinv0 if l == l0 else qneg(qmul(quats[l], qinv0))
        perm = list(range(n))
        perm[0], perm[l0] = perm[l0], perm[0]
        M = [ninv[perm[i]] for i in range(n)]
        nmat = [[QONE if i == j else QZERO for j in range(n)] for i in range(n)]
        for l in range(n):
            nmat[l][l0] = quats[l]
        Minv = [[nmat[i][perm[j]] for j in range(n)] for i in range(n)]
        self.l0 = l0
        self.g = tau_embed(M)
        self.g_inv = tau_embed(Minv)
        self.normal = XiMatrix([1] + [0] * (4 * n - 1))
        self._wedges = {}

    def wedge(self, q, inverse=False):
        """Matrix of Lambda^q(g) (or of its inverse) on increasing index tuples."""
        key = (q, inverse)
        if key not in self._wedges:
            g = self.g_inv if inverse else self.g
            r = len(g)
            tuples = list(combinations(range(r), q))
            mat = []
            for I in tuples:
                row = []
                for J in tuples:
                    row.append(_det([[g[a][b] for b in J] for a in I]))
                mat.append(row)
            self._wedges[key] = (tuples, mat)
        return self._wedges[key]

    def act(self, cls, v, inverse=False):
        """Apply Lambda^q(g) to the unprimed block of a vector of class cls."""
        tuples, mat = self.wedge(cls.q, inverse)
        keys = cls.keys()
        rank = {k: i for i, k in enumerate(keys)}
        out = [ZERO] * len(keys)
        where = {K: i for i, K in enumerate(tuples)}
        for (K, c, f), i in rank.items():
            row = mat[where[K]]
            acc = ZERO
            for J, x in zip(tuples, row):
                if x.is_zero():
                    continue
                y = v[rank[(J, c, f)]]
                if not y.is_zero():
                    acc = acc + x * y
            out[i] = acc
        return out


def _det(m):
    n = len(m)
    if n == 0:
        return ONE
    m = [list(r) for r in m]
    det = ONE
    for c in range(n):
        piv = next((i for i in range(c, n) if not m[i][c].is_zero()), None)
        if piv is None:
            return ZERO
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det = det * m[c][c]
        inv = m[c][c].inv()
        for i in range(c + 1, n):
            f = m[i][c]
            if f.is_zero():
                continue
            f = f * inv
            for j in range(c + 1, n):
                if not m[c][j].is_zero():
                    m[i][j] = m[i][j] - f * m[c][j]
    return det


def normalizer(xi):
    if "normalizer" not in xi._cache:
        xi._cache["normalizer"] = Normalizer(xi)
    return xi._cache["normalizer"]


# -- preimages --------------------------------------------------------------


def _explicit_preimage(src, dst, v):
    """Theta with sigma(normal xi) Theta = v for a first-order lower stage.

    src is the class of Theta (q = j-1, p+1 primed), dst the class of v.
    Only entries whose unprimed indices avoid {0, 1}, or contain 1 but not
    0, are nonzero.
    """
    j = dst.q
    vrank = {k: i for i, k in enumerate(dst.keys())}
    out = []
    for S, c, _ in src.keys():
        if 0 in S:
            out.append(ZERO)
            continue
        if 1 in S:
            # S = 1 u T: Theta_{1T; N} = -j v_{01T; N - 1'}
            if c >= 1:
                out.append(-v[vrank[((0,) + S, c - 1, ())]] * j)
            else:
                out.append(ZERO)
            continue
        if c >= 1:
            out.append(-v[vrank[((0,) + S, c - 1, ())]] * j)
        else:
            out.append(v[vrank[((1,) + S, 0, ())]] * j)
    return out


@lru_cache(maxsize=None)
def _normal_rref(n, k, j):
    spec = ComplexSpec(n, k)
    xi = XiMatrix([1] + [0] * (4 * n - 1))
    return sigma_build(spec, j, xi)


def theta_preimage(spec, j, xi, v):
    """Theta in Y_{j-1} with sigma_{j-1}(xi) Theta = v, for v in ker sigma_j(xi)."""
    if hasattr(v, "vector"):
        v = v.vector()
    v = [FieldElement.coerce(x) for x in v]
    dst = spec.space(j)
    if len(v) != dst.count():
        raise BadStage(f"vector of length {len(v)} is not in Y_{j}")
    if j == 0:
        if any(not x.is_zero() for x in v):
            raise NoPreimage("the first symbol map is injective; nonzero vectors have no preimage")
        return []
    if j < spec.length - 1:
        w = _apply(sigma_build(spec, j, xi), v)
        if any(not x.is_zero() for x in w):
            raise NotInKernel(f"vector is not in the kernel of sigma_{j}")
    src = spec.space(j - 1)
    if all(x.is_zero() for x in v):
        return [ZERO] * src.count()
    nz = normalizer(xi)
    vn = nz.act(dst, v)
    if spec.stage_kind(j - 1) == "lower":
        tn = _explicit_preimage(src, dst, vn)
    else:
        tn = linalg.solve(_normal_rref(spec.n, spec.k, j - 1), vn)
        if tn is None:
            raise NoPreimage(f"no preimage at stage {j}")
    theta = nz.act(src, tn, inverse=True)
    check = _apply(sigma_build(spec, j - 1, xi), theta)
    if check != v:
        raise NoPreimage(f"constructed preimage fails verification at stage {j}")
    return theta
