import random
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcomplex.curvature import (
    CurvatureData,
    CurvatureDecomposition,
    apply_ricci_identity,
    check_traces,
    decompose_curvature,
    decomposition_ok,
    qk_curvature,
    random_decomposition,
    reconstruct_curvature,
    ricci_scalar,
    sym_alt_commutator,
)
from kcomplex.errors import BadSlots, NotQuaternionicKahler
from kcomplex.field import ONE, ZERO, FieldElement
from kcomplex.tensor import E_UP, EPS_HI, H_LO, SpinorTensor, SymmetryClass, omega_lo

seeds = st.integers(0, 10**6)


def raised_pair(get, A, B, Ap, Bp, C, D):
    """Raise the two primed derivative indices of a curvature component."""
    t = ZERO
    for X, Y in product((0, 1), repeat=2):
        m = EPS_HI[X][Ap] * EPS_HI[Y][Bp]
        if m:
            t = t + get(A, X, B, Y, C, D) * m
    return t


def test_zero():
    R = reconstruct_curvature(CurvatureDecomposition(2))
    assert R == CurvatureData(2, {}, {})
    assert decompose_curvature(R) == CurvatureDecomposition(2)
    assert all(check_traces(R).values())
    ric, s, _ = ricci_scalar(R)
    assert ric == {} and s == 0


def test_single_lambda_entry():
    d = CurvatureDecomposition(2, {(0, 1): ONE, (1, 0): -ONE})
    assert decompose_curvature(reconstruct_curvature(d)) == d


@pytest.mark.parametrize("n", [2, 3])
@given(seed=seeds)
def test_round_trip(n, seed):
    d = random_decomposition(n, seed)
    assert decomposition_ok(d)
    R = reconstruct_curvature(d)
    assert decompose_curvature(R) == d
    tr = check_traces(R)
    tr.pop("first_bianchi")
    assert all(tr.values()), tr


@given(seed=seeds)
def test_round_trip_n1(seed):
    d = random_decomposition(1, seed)
    assert decomposition_ok(d)
    assert decompose_curvature(reconstruct_curvature(d)) == d


@given(seed=seeds)
def test_qk_primed_part(seed):
    n = 2
    d = random_decomposition(n, seed, qk=True)
    lam = d.scalar_lambda()
    R = reconstruct_curvature(d)
    J = omega_lo(n)
    for A, B, Ap, Bp, C, D in product(range(4), range(4), (0, 1), (0, 1), (0, 1), (0, 1)):
        want = lam * J[A][B] * (int(C == Ap) * EPS_HI[Bp][D] + int(C == Bp) * EPS_HI[Ap][D])
        assert raised_pair(R.H, A, B, Ap, Bp, C, D) == want
    # with Phi = 0 the primed-symmetric part of R_E vanishes
    for A, B, Ap, Bp, C, D in product(range(4), range(4), (0, 1), (0, 1), range(4), range(4)):
        assert raised_pair(R.E, A, B, Ap, Bp, C, D) + raised_pair(R.E, A, B, Bp, Ap, C, D) == ZERO


@pytest.mark.parametrize("n,s", [(2, 64), (3, 120), (1, 24)])
def test_qk_scalar_curvature(n, s):
    ric, scal, einstein = ricci_scalar(qk_curvature(n, 1), qk=True)
    assert scal == FieldElement(s)
    assert einstein


def test_scalar_needs_qk():
    with pytest.raises(NotQuaternionicKahler):
        ricci_scalar(reconstruct_curvature(random_decomposition(2, 1)), qk=True)


def test_scalar_section_has_no_commutator():
    R = reconstruct_curvature(random_decomposition(2, 3))
    f = SpinorTensor(SymmetryClass(2), {((), 0, ()): FieldElement(7)})
    assert apply_ricci_identity(R, f, (0, 1), (2, 0)).is_zero()


def test_upper_unprimed_rejected():
    R = reconstruct_curvature(random_decomposition(2, 3))
    f = SpinorTensor(SymmetryClass(2, 0, 0, (E_UP,)), {})
    with pytest.raises(BadSlots):
        apply_ricci_identity(R, f, (0, 0), (1, 1))


@given(seed=seeds)
def test_qk_commutator_on_primed_spinor(seed):
    rng = random.Random(seed)
    n = 2
    lam = FieldElement(rng.randint(1, 4))
    R = qk_curvature(n, lam, random_decomposition(n, seed, qk=True).psi)
    cls = SymmetryClass(n, 0, 0, (H_LO,))
    f = SpinorTensor(cls, {((), 0, (c,)): FieldElement(rng.randint(-3, 3)) for c in (0, 1)})
    J = omega_lo(n)
    A1, A2 = rng.sample(range(4), 2)
    for A1p, A2p in product((0, 1), repeat=2):
        got = sym_alt_commutator(R, f, A1, A2, A1p, A2p)
        for C in (0, 1):
            want = ZERO
            for D in (0, 1):
                sym = (int(C == A1p) * EPS_HI[A2p][D] + int(C == A2p) * EPS_HI[A1p][D]) * J[A1][A2]
                want = want - lam * f.get((D,)) * sym / 2
            assert got.get((C,)) == want


def test_phi_free_substitution_vanishes():
    n = 2
    R = qk_curvature(n, 3, random_decomposition(n, 2, qk=True).psi)
    for A, B, C, D in product(range(4), repeat=4):
        for Ap, Bp in product((0, 1), repeat=2):
            assert raised_pair(R.E, A, B, Ap, Bp, C, D) + raised_pair(R.E, A, B, Bp, Ap, C, D) == ZERO
