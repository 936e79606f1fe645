import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcomplex.covariant import D_lower, FlatGeometry, apply_D
from kcomplex.field import I, ONE, SQRT2, FieldElement
from kcomplex.flat import (
    flat_apply_D,
    flat_nabla,
    mode_section,
    random_poly,
    random_section,
    regular_example,
    symbol_consistency,
    torus_cohomology,
    verify_flat_complex,
)
from kcomplex.scalars import PolynomialFn, is_zero
from kcomplex.symbols import ComplexSpec
from kcomplex.tensor import H_LO, SpinorTensor, SymmetryClass, contract, project_sym, raise_lower


def constant_section(cls, rng):
    nv = 4 * cls.n
    return SpinorTensor(cls, {k: PolynomialFn.constant(nv, FieldElement(rng.randint(1, 5))) for k in cls.keys()})


def test_nabla_of_constant(rng):
    f = constant_section(SymmetryClass(2, 1, 2), rng)
    assert flat_nabla(f).is_zero()
    assert flat_nabla(f, "antisym").is_zero()


@given(st.integers(0, 10**6), st.integers(0, 2), st.integers(0, 2))
def test_nabla_hat_is_antisymmetrised_nabla(seed, q, p):
    rng = random.Random(seed)
    f = random_section(rng, SymmetryClass(2, q, p), 2, density=3)
    full = flat_nabla(f)
    hat = flat_nabla(f, "antisym")
    # out index (A', A_0 .. A_q, primes) read from nabla_{A_0 A'} f_{A_1..A_q ...}
    proj = project_sym(lambda idx: full.get((idx[1], idx[0]) + idx[2:]), SymmetryClass(2, q + 1, p, (H_LO,)))
    assert proj.entries == hat.entries


def test_regular_function_is_annihilated():
    spec, f = regular_example()
    assert flat_apply_D(spec, 0, f).is_zero()


def test_laplacian_of_linear_function(rng):
    spec = ComplexSpec(2, 0)
    f = SpinorTensor(spec.space(0), {((), 0, ()): random_poly(rng, 8, 1, terms=4)})
    assert flat_apply_D(spec, 0, f).is_zero()


def test_two_step_on_cubic(rng):
    spec = ComplexSpec(2, 2)
    for _ in range(3):
        f = random_section(rng, spec.space(0), 3)
        g = flat_apply_D(spec, 0, f)
        assert not g.is_zero()
        assert flat_apply_D(spec, 1, g).is_zero()


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_constants_killed_at_first_stage(k, rng):
    spec = ComplexSpec(2, k)
    assert flat_apply_D(spec, 0, constant_section(spec.space(0), rng)).is_zero()


@pytest.mark.parametrize("n,k", [(1, 0), (1, 2), (2, 0), (2, 1), (2, 2), (2, 3), (3, 1)])
def test_flat_complex(n, k):
    rep = verify_flat_complex(ComplexSpec(n, k), trials=3, degree=4, seed=n + k)
    assert rep.ok
    assert all(st["nonzero_images"] > 0 for st in rep.stages)


@pytest.mark.parametrize("n,k", [(2, 0), (2, 1), (2, 2), (2, 3)])
def test_single_mode_is_symbol(n, k):
    rng = random.Random(k)
    spec = ComplexSpec(n, k)
    for j in range(len(spec.kinds)):
        m = [rng.randint(-2, 2) for _ in range(4 * n)]
        vals = [FieldElement(rng.randint(-3, 3), 0, rng.randint(-3, 3)) for _ in spec.space(j).keys()]
        assert symbol_consistency(spec, j, m, vals)


def test_operator_respects_storage_round_trip(rng):
    spec = ComplexSpec(2, 2)
    f = random_section(rng, spec.space(1), 3)
    f2 = project_sym(lambda idx: f.get(idx), spec.space(1))
    assert apply_D(spec, 1, f2, FlatGeometry(2)).entries == apply_D(spec, 1, f, FlatGeometry(2)).entries


def test_mode_section_derivative():
    cls = SymmetryClass(1, 0, 0)
    f = mode_section(cls, [1, 0, 0, 0], [ONE])
    # Z_{11'} e^{i x_1} = i / sqrt2 e^{i x_1}
    from kcomplex.frames import apply_flat_frame

    assert apply_flat_frame(1, 1, f[((), 0, ())]).mode_coefficient((1, 0, 0, 0)) == I * SQRT2 / 2


@pytest.mark.parametrize("k,dims", [(0, [1, 6, 8, 3]), (1, [2, 4, 4, 2])])
def test_torus_cohomology_small(k, dims):
    rep = torus_cohomology(ComplexSpec(2, k), 1)
    assert rep.dims == dims
    assert rep.modes == 3**8 - 1
    assert not rep.failures


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("seed", range(3))
def test_fused_operator_matches_raise_and_contract(n, seed):
    # reference path: nabla, raise the derivative's primed slot, trace against f's
    f = random_section(random.Random(seed), SymmetryClass(n, 0, 1), 3)
    free = SpinorTensor(SymmetryClass(n, 0, 0, (H_LO,)), {((), 0, (a,)): f.get((a,)) for a in range(2)})
    ref = contract(raise_lower(flat_nabla(free), 1, "raise"), 1, 2)
    out = D_lower(FlatGeometry(n), f)
    for A in range(2 * n):
        assert is_zero(out.get((A,)) - ref.get((A,)))
