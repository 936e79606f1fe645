import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcomplex.errors import BadContraction, BadIndex, BadVariance
from kcomplex.field import FieldElement, ONE, ZERO
from kcomplex.tensor import (
    E_LO,
    E_UP,
    EPS_HI,
    EPS_LO,
    H_LO,
    H_UP,
    SpinorTensor,
    SymmetryClass,
    canonical_index,
    contract,
    delta_tensor,
    eps_tensor,
    inner_product,
    omega_hi,
    omega_lo,
    perm_sign,
    project_sym,
    raise_lower,
    to_full_map,
)

classes = st.builds(
    lambda n, q, p, free: SymmetryClass(n, min(q, 2 * n), p, free),
    st.integers(1, 2),
    st.integers(0, 3),
    st.integers(0, 2),
    st.lists(st.sampled_from([E_LO, H_LO]), max_size=2).map(tuple),
)


def random_tensor(rng, cls, density=None):
    keys = cls.keys()
    if density is not None:
        keys = rng.sample(keys, min(density, len(keys)))
    return SpinorTensor(cls, {k: FieldElement(rng.randint(-3, 3), 0, rng.randint(-3, 3)) for k in keys})


@st.composite
def tensors(draw, cls_strategy=classes):
    cls = draw(cls_strategy)
    seed = draw(st.integers(0, 10**6))
    return random_tensor(random.Random(seed), cls)


def test_counts():
    assert SymmetryClass(2, 1, 1).count() == 8
    assert SymmetryClass(2, 4, 0).count() == 1
    assert len(canonical_index(SymmetryClass(2, 2, 2), "enumerate")) == 18


def test_rank_unrank():
    cls = SymmetryClass(2, 2, 2, (H_LO,))
    for i, key in enumerate(cls.keys()):
        assert canonical_index(cls, "rank", key) == i
        assert canonical_index(cls, "unrank", i) == key
    with pytest.raises(BadIndex):
        cls.rank(((1, 0), 0, (0,)))


def test_key_order_is_lexicographic():
    keys = SymmetryClass(2, 2, 1).keys()
    assert list(keys) == sorted(keys)
    assert keys[0] == ((0, 1), 0, ())


def test_antisymmetrise_pair():
    cls = SymmetryClass(1, 2, 0)
    t = project_sym({(0, 1): ONE, (1, 0): ZERO}, cls)
    assert t[((0, 1), 0, ())] == FieldElement(1) / 2


def test_symmetrise_antisymmetric_input():
    cls = SymmetryClass(1, 0, 2)
    assert project_sym({(0, 1): ONE, (1, 0): -ONE}, cls).is_zero()


@given(tensors())
def test_projection_idempotent_and_lossless(t):
    full = to_full_map(t)
    assert project_sym(full, t.cls).entries == t.entries
    assert project_sym(to_full_map(project_sym(full, t.cls)), t.cls).entries == t.entries


@given(tensors(), st.data())
def test_permuted_reads(t, data):
    cls = t.cls
    if not cls.keys():
        return
    key = data.draw(st.sampled_from(cls.keys()))
    idx = cls.full_index(key)
    nf = cls.nfree
    block = list(idx[nf : nf + cls.q])
    perm = data.draw(st.permutations(range(cls.q)))
    prim = list(idx[nf + cls.q :])
    prim = data.draw(st.permutations(prim)) if prim else prim
    moved = idx[:nf] + tuple(block[i] for i in perm) + tuple(prim)
    want = t[key]
    got = t.get(moved)
    assert got == (want if perm_sign(perm) == 1 else -want)


def test_eps_inverse_pair():
    for a, c in itertools.product(range(2), repeat=2):
        assert sum(EPS_LO[a][b] * EPS_HI[b][c] for b in range(2)) == (a == c)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_symplectic_block(n):
    J = omega_lo(n)
    for a, b in itertools.product(range(2 * n), repeat=2):
        assert J[a][b] == -J[b][a]
        assert sum(J[a][c] * J[c][b] for c in range(2 * n)) == -(a == b)
        assert sum(J[a][c] * omega_hi(n)[c][b] for c in range(2 * n)) == (a == b)


def test_raise_primed_example():
    cls = SymmetryClass(1, 0, 0, (H_LO,))
    f = SpinorTensor(cls, {((), 0, (0,)): ONE})
    up = raise_lower(f, 0, "raise", "eps_primed")
    assert up.get((0,)) == 0 and up.get((1,)) == -ONE


@given(tensors(st.builds(lambda n, f: SymmetryClass(n, 1, 1, f), st.integers(1, 2), st.sampled_from([(H_LO,), (E_LO,), (H_LO, E_LO)]))))
def test_lower_raise_identity(t):
    for slot in range(t.cls.nfree):
        assert raise_lower(raise_lower(t, slot, "raise"), slot, "lower").entries == t.entries


def test_raise_lower_variance_errors():
    f = SpinorTensor(SymmetryClass(1, 0, 0, (H_UP,)), {})
    with pytest.raises(BadVariance):
        raise_lower(f, 0, "raise")
    with pytest.raises(BadVariance):
        raise_lower(SpinorTensor(SymmetryClass(1, 0, 0, (H_LO,)), {}), 0, "raise", "omega_E")


def test_contraction_order_flip(rng):
    # f_{A'}{}^{A'} = -f^{A'}{}_{A'} for a two slot primed tensor
    t = random_tensor(rng, SymmetryClass(1, 0, 0, (H_LO, H_LO)))
    a = contract(raise_lower(t, 1, "raise"), 1, 0)
    b = contract(raise_lower(t, 0, "raise"), 0, 1)
    assert a.entries[((), 0, ())] == -b.entries[((), 0, ())]


def test_traces():
    assert contract(delta_tensor(1, "H"), 1, 0).entries == {((), 0, ()): FieldElement(2)}
    assert contract(delta_tensor(2, "E"), 1, 0).entries == {((), 0, ()): FieldElement(4)}
    with pytest.raises(BadContraction):
        contract(SpinorTensor(SymmetryClass(1, 0, 0, (E_UP, H_LO))), 0, 1)


def test_eps_full_contraction():
    lo = eps_tensor(1, "lo")
    raised = raise_lower(raise_lower(lo, 0, "raise"), 1, "raise")
    total = sum((lo.get((a, b)) * raised.get((a, b)) for a in range(2) for b in range(2)), ZERO)
    assert total == FieldElement(2)
    # against the fixed matrix eps^{A'B'} the same contraction is -delta_{A'}^{A'}
    hi = eps_tensor(1, "hi")
    total = sum((lo.get((a, b)) * hi.get((a, b)) for a in range(2) for b in range(2)), ZERO)
    assert total == FieldElement(-2)


def test_norm_of_unit_pair():
    v = SpinorTensor(SymmetryClass(2, 2, 0), {((0, 1), 0, ()): ONE})
    assert inner_product(v, v) == FieldElement(2)


@given(tensors(), st.integers(0, 10**6))
def test_inner_product_properties(v, seed):
    w = random_tensor(random.Random(seed), v.cls)
    assert inner_product(v, w) == inner_product(w, v).conj()
    assert inner_product(v, w) == inner_product(v, w, method="weighted")
    if not v.is_zero():
        assert inner_product(v, v).is_positive_real()
