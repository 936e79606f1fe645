import random
from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from kcomplex.adjoint import (
    PLACEMENTS,
    AdjointPair,
    adjoint_apply,
    adjoint_pairings,
    admissible_tensor,
    c_constant,
    constants_check,
    constrained_section,
    curvature_contractions,
    derived_constants,
    expansion_s45_coefficient,
    frame_adjoint,
    frame_apply,
    frame_pairings,
    harmonic_modes,
    contracted_index_identity,
    contracted_index_sweep,
    contracted_index_class,
    mode_pool,
    nabla_star,
    random_trig_section,
    s45_pairing,
    s_decomposition,
    s_pieces,
    sample_modes,
    s5_tilde_report,
    weitzenbock_check,
)
from kcomplex.errors import BadHypothesis, UnsupportedBackend
from kcomplex.field import I, ONE, SQRT2, FieldElement
from kcomplex.flat import random_section
from kcomplex.scalars import TrigPolynomialFn, torus_pair
from kcomplex.tensor import SpinorTensor, SymmetryClass


def test_frame_adjoint_example():
    e = TrigPolynomialFn.mode(8, (1, 0, 0, 0, 0, 0, 0, 0))
    lhs = torus_pair(frame_apply(2, 0, 0, e), e)
    rhs = torus_pair(e, frame_adjoint(2, 0, 0, e))
    assert lhs == rhs == I * SQRT2 / 2


def test_frame_adjoint_is_minus_conjugate_frame():
    e = TrigPolynomialFn.mode(8, (0, 1, 1, 0, 0, 0, 0, 0))
    assert frame_adjoint(2, 0, 0, e) == -frame_apply(2, 1, 1, e)


def test_nabla_star_of_constant():
    cls = SymmetryClass(2, 1, 1)
    f = SpinorTensor(cls, {k: TrigPolynomialFn.constant(8, 3) for k in cls.keys()})
    assert nabla_star(f).is_zero()
    assert adjoint_apply(AdjointPair("D", 2), SpinorTensor(SymmetryClass(2, 2, 0), {})).is_zero()


def test_polynomial_sections_rejected(rng):
    f = random_section(rng, SymmetryClass(2, 1, 1), 2)
    with pytest.raises(UnsupportedBackend):
        s_decomposition(f)


@pytest.mark.parametrize("q,p", [(0, 1), (1, 1), (1, 2), (2, 1), (3, 3)])
def test_pairings(q, p):
    for rep in adjoint_pairings(2, q, p, trials=8, seed=q + 7 * p):
        assert rep.mismatches == 0
        assert rep.constant == ONE
        assert rep.nonzero > 0


def test_frame_pairings():
    rep = frame_pairings(2, trials=20, seed=1)
    assert rep.ok and rep.constant == ONE


@given(st.integers(0, 10**6))
def test_contracted_index_r2_antisymmetric(seed):
    f = admissible_tensor(random.Random(seed), 2, 1, 2)
    for K in range(4):
        assert f.get((0, K, 1)) == -f.get((1, K, 0))
        assert f.get((0, K, 0)) == 0 and f.get((1, K, 1)) == 0


def test_contracted_index_zero_and_hypothesis():
    assert contracted_index_identity(SpinorTensor(contracted_index_class(2, 1, 3), {})) == {pl: True for pl in PLACEMENTS}
    cls = contracted_index_class(2, 1, 3)
    with pytest.raises(BadHypothesis):
        contracted_index_identity(SpinorTensor(cls, {k: ONE for k in cls.keys()}))


def test_contracted_index_r3():
    sweep = contracted_index_sweep(2, (3,), trials=100, seed=5)
    assert sweep["convention"] == "raised_first"
    assert sweep["per_r"][3]["holds"]["raised_last"] < 100


def test_constant_section_pieces(rng):
    cls = SymmetryClass(2, 1, 1)
    f = SpinorTensor(cls, {k: TrigPolynomialFn.constant(8, FieldElement(rng.randint(1, 4))) for k in cls.keys()})
    assert all(S.is_zero() for S in s_pieces(f))


@pytest.mark.parametrize("q,p", [(1, 1), (2, 1), (1, 2), (3, 1)])
def test_flat_identity(q, p):
    rng = random.Random(q * 10 + p)
    for _ in range(2):
        f = random_trig_section(rng, SymmetryClass(2, q, p), 2, density=3, pool=mode_pool(rng, 8))
        _, _, checks = s_decomposition(f)
        assert all(checks.values()), checks


def test_inplace_reading_fails_for_even_q():
    rng = random.Random(4)
    f = random_trig_section(rng, SymmetryClass(2, 2, 1), 2, density=4, pool=mode_pool(rng, 8))
    assert not s_decomposition(f, "inplace")[2]["lhs_equals_s1_s4_s5"]


def test_s45_pairing_constant():
    rng = random.Random(2)
    for q, p in [(1, 1), (2, 1), (1, 2)]:
        for m in sample_modes(2, 6, seed=q + p)[1:]:
            f = constrained_section(rng, 2, q, p, m)
            if f is None:
                continue
            measured, norm = s45_pairing(f)
            assert measured == norm * FieldElement(mpq(expansion_s45_coefficient(q, p)))


def test_s5_remainder_pairs_to_zero():
    rep = s5_tilde_report(2, 1, 2, trials=2, seed=3)
    assert rep["pairs_to_zero"]
    assert rep["nonzero_remainders"] > 0


def test_qk_contractions_flat():
    r = curvature_contractions(2, 2, 1, 0)
    assert r["checks"]["s2_closed_form"] and r["checks"]["s3_closed_form"]


def test_s2_specific_value():
    r = curvature_contractions(2, 2, 1, Fraction(5, 2), seed=3)
    assert r["s2_coefficient"] == "-3"
    assert r["ok"]


def test_even_stage_values():
    r = curvature_contractions(2, 3, 2, 1, seed=1)
    assert r["s3_coefficient"] == "0"
    assert r["pairing_coefficient"] == "-2"
    assert r["ok"]


@pytest.mark.parametrize("n,k", [(2, 1), (2, 3), (3, 2), (3, 4)])
def test_closed_forms(n, k):
    for j in range(k):
        assert curvature_contractions(n, k, j, Fraction(-2, 3), seed=j)["ok"]


def test_constants():
    rows = constants_check()
    assert len(rows) == 108 and all(r["matches"] and r["sign_ok"] for r in rows)
    assert c_constant(1, 1) == Fraction(3, 4)
    assert derived_constants(2, 2, 1)[0] == 0


def test_harmonic_modes():
    modes = sample_modes(2, 5, seed=1)
    rows = harmonic_modes(2, 2, 1, modes)
    assert all(r["ok"] for r in rows)
    assert rows[0]["kernel_dim"] == SymmetryClass(2, 1, 1).count()
    assert all(r["kernel_dim"] == 0 for r in rows[1:])


def test_report_records():
    recs = weitzenbock_check(2, trials=1, seed=0, max_k=2, contracted_trials=5, mode_count=2)
    assert recs and all(r["status"] in ("pass", "reported") for r in recs)
    assert all(set(r) >= {"case", "identity", "status"} for r in recs)
    assert any(r.get("convention_choice") == "raised_first" for r in recs)
