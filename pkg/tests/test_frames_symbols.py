import random
from math import comb

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from kcomplex import linalg
from kcomplex.errors import BadStage, DegenerateCovector, NoPreimage, NotInKernel
from kcomplex.field import I, ONE, SQRT2, ZERO, FieldElement
from kcomplex.frames import (
    J_matrix,
    apply_flat_frame,
    flat_frame_rule,
    qconj,
    qmatmul,
    qmul,
    random_quaternion_matrix,
    tau_embed,
    tau_properties,
    tau_sweep,
)
from kcomplex.scalars import PolynomialFn
from kcomplex.symbols import ComplexSpec, XiMatrix, exactness_check, sigma_build, theta_preimage

F = FieldElement


def mat(rows):
    return [[FieldElement.coerce(x) for x in r] for r in rows]


def test_tau_of_units():
    assert tau_embed([[(1, 0, 0, 0)]]) == mat([[1, 0], [0, 1]])
    assert tau_embed([[(0, 1, 0, 0)]]) == [[I, ZERO], [ZERO, -I]]
    assert tau_embed([[(0, 0, 1, 0)]]) == mat([[0, -1], [1, 0]])
    k = tau_embed([[(0, 0, 0, 1)]])
    assert k == [[ZERO, -I], [-I, ZERO]]
    assert linalg.matmul(tau_embed([[(0, 1, 0, 0)]]), tau_embed([[(0, 0, 1, 0)]])) == k


def test_tau_from_components():
    parts = ([[1, 0]], [[0, 2]], [[0, 0]], [[3, 0]])
    assert tau_embed(parts, components=True) == tau_embed([[(1, 0, 0, 3), (0, 2, 0, 0)]])


def test_tau_sweep_properties():
    rows = tau_sweep(100, seed=3)
    assert len(rows) == 100
    assert all(r["multiplicative"] and r["conjugation"] and r["conjugate_transpose"] for r in rows)


@given(st.integers(0, 10**6))
def test_tau_properties_random(seed):
    rng = random.Random(seed)
    a = random_quaternion_matrix(rng, 2, 3)
    b = random_quaternion_matrix(rng, 3, 1)
    assert all(tau_properties(a, b).values())


UNITS = [(1, 0, 0, 0), (mpq(1, 5), mpq(2, 5), mpq(2, 5), mpq(4, 5)), (mpq(3, 5), 0, mpq(-4, 5), 0), (0, 0, 0, 1)]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_symplectic_on_sp1_blocks(n):
    rng = random.Random(n)
    J = J_matrix(n)
    for _ in range(5):
        diag = [rng.choice(UNITS) for _ in range(n)]
        perm = list(range(n))
        rng.shuffle(perm)
        A = [[diag[i] if perm[i] == j else (0, 0, 0, 0) for j in range(n)] for i in range(n)]
        # A is unitary over the quaternions
        abar_t = [[qconj(A[j][i]) for j in range(n)] for i in range(n)]
        ident = qmatmul(abar_t, A)
        assert all(ident[i][j] == ((1, 0, 0, 0) if i == j else (0, 0, 0, 0)) for i in range(n) for j in range(n))
        t = tau_embed(A)
        tt = [list(c) for c in zip(*t)]
        assert linalg.matmul(linalg.matmul(t, J), tt) == J


def test_quaternion_product_table():
    i, j, k = (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)
    assert qmul(i, j) == k and qmul(j, k) == i and qmul(k, i) == j
    assert qmul(i, i) == (-1, 0, 0, 0)


# -- xi and symbols ---------------------------------------------------------------


def test_xi_normal_form():
    x = XiMatrix([1, 0, 0, 0])
    assert x.lower == mat([[1, 0], [0, 1]])
    assert x.raised == mat([[0, -1], [1, 0]])
    x2 = XiMatrix([1, 0, 0, 0, 0, 0, 0, 0])
    assert x2.lower == mat([[1, 0], [0, 1], [0, 0], [0, 0]])
    assert x2.raised == mat([[0, -1], [1, 0], [0, 0], [0, 0]])
    assert XiMatrix([0, 0, 1, 0]).lower == mat([[0, -1], [1, 0]])


@given(st.lists(st.integers(-5, 5), min_size=8, max_size=8))
def test_xi_columns_conjugate(xi):
    x = XiMatrix(xi)
    J = J_matrix(2)
    col0 = [r[0].conj() for r in x.lower]
    col1 = [r[1] for r in x.lower]
    assert col1 == [-v for v in linalg.matvec(J, col0)]


@pytest.mark.parametrize("n,k", [(n, k) for n in (1, 2, 3) for k in range(5)])
def test_dimensions(n, k):
    spec = ComplexSpec(n, k)
    dims = spec.dims()
    for j in range(min(k, 2 * n) + 1):
        assert dims[j] == comb(2 * n, j) * (k - j + 1)
    for m in range(2 * n - k - 1):
        assert dims[k + 1 + m] == comb(2 * n, k + 2 + m) * (m + 1)
    assert spec.euler() == 0


def test_dimension_tables():
    assert ComplexSpec(2, 0).dims() == [1, 6, 8, 3]
    assert ComplexSpec(2, 1).dims() == [2, 4, 4, 2]
    assert ComplexSpec(2, 2).dims() == [3, 8, 6, 1]
    assert ComplexSpec(1, 1).dims() == [2, 2]
    with pytest.raises(BadStage):
        ComplexSpec(2, 1).space(7)


def test_first_symbol_at_e1():
    spec = ComplexSpec(2, 1)
    s0 = sigma_build(spec, 0, XiMatrix([1, 0, 0, 0, 0, 0, 0, 0]))
    assert s0 == mat([[0, -1], [1, 0], [0, 0], [0, 0]])


def test_kernel_characterization_at_e1():
    spec = ComplexSpec(2, 2)
    xi = XiMatrix([1, 0, 0, 0, 0, 0, 0, 0])
    keys = spec.space(1).keys()
    ker = linalg.kernel(sigma_build(spec, 1, xi))
    assert len(ker) == 3
    for v in ker:
        val = dict(zip(keys, v))
        assert all(val[((A,), c, ())].is_zero() for A in (2, 3) for c in (0, 1))
        assert val[((1,), 1, ())] == -val[((0,), 0, ())]


def random_xi(rng, n):
    while True:
        xi = [mpq(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(4 * n)]
        if any(xi):
            return xi


@pytest.mark.parametrize("n,k", [(2, 0), (2, 1), (2, 2), (2, 3), (3, 1)])
def test_symbol_sequence_exact(n, k, rng):
    spec = ComplexSpec(n, k)
    for _ in range(10):
        rep = exactness_check(spec, XiMatrix(random_xi(rng, n)))
        assert rep.composition_zero and rep.exact and rep.euler == 0


def test_degenerate_covector():
    with pytest.raises(DegenerateCovector):
        exactness_check(ComplexSpec(2, 1), XiMatrix([0] * 8))


def test_zero_preimage():
    spec = ComplexSpec(2, 1)
    xi = XiMatrix([1, 2, 0, 0, 0, 0, 1, 0])
    assert theta_preimage(spec, 1, xi, [ZERO] * 4) == [ZERO] * 2


def test_preimage_of_kernel_at_e1():
    spec = ComplexSpec(2, 1)
    xi = XiMatrix([1, 0, 0, 0, 0, 0, 0, 0])
    for v in linalg.kernel(sigma_build(spec, 1, xi)):
        theta = theta_preimage(spec, 1, xi, v)
        assert linalg.matvec(sigma_build(spec, 0, xi), theta) == v


@given(st.integers(0, 10**6), st.sampled_from([(2, 0), (2, 1), (2, 2), (2, 4), (1, 3)]))
def test_preimage_random(seed, nk):
    rng = random.Random(seed)
    spec = ComplexSpec(*nk)
    xi = XiMatrix(random_xi(rng, spec.n))
    rep = exactness_check(spec, xi, kernels=True)
    for j in range(1, spec.length):
        for v in rep.kernels[j]:
            scale = rng.randint(1, 3)
            w = [c * scale for c in v]
            theta = theta_preimage(spec, j, xi, w)
            assert linalg.matvec(sigma_build(spec, j - 1, xi), theta) == w


def test_preimage_errors():
    spec = ComplexSpec(2, 1)
    xi = XiMatrix([1, 0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(NotInKernel):
        theta_preimage(spec, 1, xi, [ZERO, ZERO, ONE, ZERO])
    with pytest.raises(NoPreimage):
        theta_preimage(spec, 0, xi, [ONE, ZERO])


# -- flat frame -----------------------------------------------------------------


def test_frame_pattern():
    s = SQRT2 / 2
    assert flat_frame_rule(0, 0) == [(1, s), (2, I * s)]
    assert flat_frame_rule(0, 1) == [(3, -s), (4, -I * s)]
    assert flat_frame_rule(1, 0) == [(3, s), (4, -I * s)]
    assert flat_frame_rule(1, 1) == [(1, s), (2, -I * s)]
    assert flat_frame_rule(2, 0) == [(5, s), (6, I * s)]


def test_frame_on_holomorphic_coordinate():
    x1, x2 = PolynomialFn.variable(8, 1), PolynomialFn.variable(8, 2)
    f = x1 + x2.scale(I)
    assert apply_flat_frame(0, 0, f).is_zero()
    assert apply_flat_frame(1, 1, f) == PolynomialFn.constant(8, SQRT2)


@given(st.integers(0, 10**6))
def test_frame_vectors_commute(seed):
    from kcomplex.flat import random_poly

    rng = random.Random(seed)
    f = random_poly(rng, 8, 3, terms=3)
    (a, ap), (b, bp) = [(rng.randrange(4), rng.randrange(2)) for _ in range(2)]
    assert apply_flat_frame(a, ap, apply_flat_frame(b, bp, f)) == apply_flat_frame(b, bp, apply_flat_frame(a, ap, f))
