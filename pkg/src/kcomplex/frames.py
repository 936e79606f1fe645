"""Quaternions, the embedding tau of quaternionic matrices and the flat frame.

A quaternion a1 + a2 i + a3 j + a4 k is a 4-tuple of rationals.  A
quaternionic matrix is given either as a nested list of such tuples or as
four real matrices (A1, A2, A3, A4).
"""

import random

from gmpy2 import mpq

from .field import INV_SQRT2, ZERO, FieldElement, gaussian

# -- quaternions ------------------------------------------------------------


def qmul(x, y):
    a1, a2, a3, a4 = x
    b1, b2, b3, b4 = y
    return (
        a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
        a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
        a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
        a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
    )


def qconj(x):
    return (x[0], -x[1], -x[2], -x[3])


def qnorm2(x):
    return sum(mpq(c) * c for c in x)


def qinv(x):
    n = qnorm2(x)
    if n == 0:
        raise ZeroDivisionError("inverse of the zero quaternion")
    return tuple(mpq(c) / n for c in qconj(x))


def qadd(x, y):
    return tuple(a + b for a, b in zip(x, y))


def qneg(x):
    return tuple(-a for a in x)


QZERO = (0, 0, 0, 0)
QONE = (1, 0, 0, 0)


def qmatmul(a, b):
    out = []
    for row in a:
        orow = []
        for j in range(len(b[0])):
            acc = QZERO
            for k, x in enumerate(row):
                acc = qadd(acc, qmul(x, b[k][j]))
            orow.append(acc)
        out.append(orow)
    return out


def from_components(parts):
    """Nested quaternion matrix from four real matrices (A1, A2, A3, A4)."""
    a1, a2, a3, a4 = parts
    return [[(a1[i][j], a2[i][j], a3[i][j], a4[i][j]) for j in range(len(a1[0]))] for i in range(len(a1))]


def tau_quaternion(x):
    """2x2 complex block of a single quaternion."""
    a1, a2, a3, a4 = (mpq(c) for c in x)
    return [
        [gaussian(a1, a2), gaussian(-a3, -a4)],
        [gaussian(a3, -a4), gaussian(a1, -a2)],
    ]


def tau_embed(a, components=False):
    """Complex 2p x 2m matrix of a quaternionic p x m matrix.

    ``components=True`` means ``a`` is given as four real matrices.
    """
    if components:
        a = from_components(a)
    p = len(a)
    m = len(a[0]) if p else 0
    out = [[ZERO] * (2 * m) for _ in range(2 * p)]
    for i in range(p):
        for j in range(m):
            blk = tau_quaternion(a[i][j])
            for r in range(2):
                for c in range(2):
                    out[2 * i + r][2 * j + c] = blk[r][c]
    return out


def J_matrix(n):
    """Block diagonal symplectic matrix with blocks [[0,1],[-1,0]]."""
    out = [[ZERO] * (2 * n) for _ in range(2 * n)]
    one = FieldElement(1)
    for l in range(n):
        out[2 * l][2 * l + 1] = one
        out[2 * l + 1][2 * l] = -one
    return out


# -- flat frame -------------------------------------------------------------

# (row parity, primed index) -> [(coordinate offset within the block, coefficient)]
_PATTERN = {
    (0, 0): [(1, FieldElement(1)), (2, gaussian(0, 1))],
    (0, 1): [(3, FieldElement(-1)), (4, gaussian(0, -1))],
    (1, 0): [(3, FieldElement(1)), (4, gaussian(0, -1))],
    (1, 1): [(1, FieldElement(1)), (2, gaussian(0, -1))],
}


def frame_index(A, Ap):
    return 2 * A + Ap


def frame_split(a):
    return a // 2, a % 2


def flat_frame_rule(A, Ap):
    """Z_{AA'} as a list of (1-based coordinate, coefficient) with the 1/sqrt2 included."""
    l, r = divmod(A, 2)
    return [(4 * l + off, c * INV_SQRT2) for off, c in _PATTERN[(r, Ap)]]


def apply_flat_frame(A, Ap, f):
    out = 0
    for coord, c in flat_frame_rule(A, Ap):
        d = f.derive(coord)
        out = out + d.scale(c) if not isinstance(out, int) else d.scale(c)
    return out


# -- properties of tau ------------------------------------------------------


def _cmatmul(a, b):
    return [[sum((a[i][k] * b[k][j] for k in range(len(b))), ZERO) for j in range(len(b[0]))] for i in range(len(a))]


def _cconj(a):
    return [[x.conj() for x in row] for row in a]


def _ctranspose(a):
    return [list(col) for col in zip(*a)]


def random_quaternion_matrix(rng, p, m, bound=5):
    return [[tuple(mpq(rng.randint(-bound, bound), rng.randint(1, 3)) for _ in range(4)) for _ in range(m)] for _ in range(p)]


def tau_properties(a, b):
    """Multiplicativity on (a, b), and the conjugation and transpose relations on a.

    ``a`` is p x m and ``b`` is m x r, both as nested quaternion lists.
    """
    ta = tau_embed(a)
    p = len(a)
    m = len(a[0])
    mult = tau_embed(qmatmul(a, b)) == _cmatmul(ta, tau_embed(b))
    # conj(J_p tau(A)) = tau(A) J_m
    conj = _cconj(_cmatmul(J_matrix(p), ta)) == _cmatmul(ta, J_matrix(m))
    abar_t = [[qconj(a[i][j]) for i in range(p)] for j in range(m)]
    transpose = tau_embed(abar_t) == _ctranspose(_cconj(ta))
    return {"multiplicative": mult, "conjugation": conj, "conjugate_transpose": transpose}


def tau_sweep(trials=100, seed=0, max_size=3):
    """tau_properties on random quaternionic matrices of random shapes."""
    rng = random.Random(seed)
    out = []
    for t in range(trials):
        p, m, r = (rng.randint(1, max_size) for _ in range(3))
        res = tau_properties(random_quaternion_matrix(rng, p, m), random_quaternion_matrix(rng, m, r))
        out.append({"trial": t, "shape": [p, m, r], **res})
    return out
