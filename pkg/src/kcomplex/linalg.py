"""Exact linear algebra over Q(i, sqrt2).

Matrices are lists of rows of FieldElement.  Rank is computed by realifying
to a rational matrix and calling FLINT; reduced row echelon forms, kernels
and particular solutions use Gauss-Jordan elimination with the first nonzero
entry of each column as pivot, so kernel bases are reproducible.
"""

import flint

from .field import ONE, ZERO, FieldElement


def zeros(r, c):
    return [[ZERO] * c for _ in range(r)]


def identity(n):
    m = zeros(n, n)
    for i in range(n):
        m[i][i] = ONE
    return m


def matmul(a, b):
    if not a:
        return []
    cols = len(b[0]) if b else 0
    out = []
    for row in a:
        acc = [ZERO] * cols
        for k, x in enumerate(row):
            if x.is_zero():
                continue
            brow = b[k]
            for j in range(cols):
                y = brow[j]
                if not y.is_zero():
                    acc[j] = acc[j] + x * y
        out.append(acc)
    return out


def matvec(a, v):
    out = []
    for row in a:
        acc = ZERO
        for x, y in zip(row, v):
            if not x.is_zero() and not y.is_zero():
                acc = acc + x * y
        out.append(acc)
    return out


def is_zero_matrix(a):
    return all(x.is_zero() for row in a for x in row)


def _gaussian_only(a):
    return all(x.is_gaussian() for row in a for x in row)


def realify(a):
    """Rational matrix of the Q-linear map underlying a.

    Entries in Q(i) use the 2x2 block [[re, -im], [im, re]]; general entries
    use the 4x4 multiplication matrix on the basis (1, sqrt2, i, i sqrt2).
    """
    if _gaussian_only(a):
        rows = []
        for row in a:
            r0, r1 = [], []
            for x in row:
                r0 += [x.a, -x.c]
                r1 += [x.c, x.a]
            rows += [r0, r1]
        return rows, 2
    rows = []
    for row in a:
        block = [[], [], [], []]
        for x in row:
            p, q, r, s = x.a, x.b, x.c, x.d
            # columns: images of 1, sqrt2, i, i sqrt2 in coordinates (1, sqrt2, i, i sqrt2)
            block[0] += [p, 2 * q, -r, -2 * s]
            block[1] += [q, p, -s, -r]
            block[2] += [r, 2 * s, p, 2 * q]
            block[3] += [s, r, q, p]
        rows += block
    return rows, 4


def rank(a):
    if not a or not a[0]:
        return 0
    rows, factor = realify(a)
    m = flint.fmpq_mat(len(rows), len(rows[0]), [flint.fmpq(int(x.numerator), int(x.denominator)) for r in rows for x in r])
    return m.rank() // factor


def rref(a):
    """Reduced row echelon form and pivot columns."""
    m = [list(row) for row in a]
    nrows = len(m)
    ncols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = None
        for i in range(r, nrows):
            if not m[i][c].is_zero():
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = m[r][c].inv()
        prow = [x * inv if not x.is_zero() else ZERO for x in m[r]]
        m[r] = prow
        nz = [j for j in range(c, ncols) if not prow[j].is_zero()]
        for i in range(nrows):
            if i == r:
                continue
            f = m[i][c]
            if f.is_zero():
                continue
            row = m[i]
            for j in nz:
                row[j] = row[j] - f * prow[j]
        pivots.append(c)
        r += 1
    return m, pivots


def kernel(a, ncols=None):
    """Basis of the right kernel {v : a v = 0}."""
    if not a:
        n = ncols or 0
        return [[ONE if i == j else ZERO for i in range(n)] for j in range(n)]
    ncols = len(a[0])
    r, pivots = rref(a)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        v = [ZERO] * ncols
        v[fcol] = ONE
        for row_i, pc in enumerate(pivots):
            x = r[row_i][fcol]
            if not x.is_zero():
                v[pc] = -x
        basis.append(v)
    return basis


def solve(a, b):
    """One solution x of a x = b, or None when the system is inconsistent."""
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    aug = [list(a[i]) + [b[i]] for i in range(nrows)]
    r, pivots = rref(aug)
    if ncols in pivots:
        return None
    x = [ZERO] * ncols
    for row_i, pc in enumerate(pivots):
        x[pc] = r[row_i][ncols]
    return x


def inverse(a):
    n = len(a)
    aug = [list(a[i]) + [ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    r, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in r]


def to_fe_matrix(rows):
    return [[FieldElement.coerce(x) for x in row] for row in rows]
