"""Spinor tensors with an antisymmetric unprimed block and a symmetric primed block.

Full index tuples are laid out as ``free slots + antisymmetric block +
symmetric block``.  Unprimed indices take values 0..2n-1, primed indices
0..1 (standing for 0', 1').  Canonical keys are
``(increasing unprimed tuple, number of 1' in the primed block, free tuple)``.
"""

import itertools
from functools import lru_cache
from math import comb, factorial

from gmpy2 import mpq

from .errors import BadClass, BadContraction, BadIndex, BadVariance
from .field import ONE, ZERO, FieldElement
from .scalars import TrigPolynomialFn, scalar_conj, torus_pair

E_LO = ("E", "lo")
E_UP = ("E", "up")
H_LO = ("H", "lo")
H_UP = ("H", "up")

# eps_{A'B'} and eps^{A'B'}
EPS_LO = ((0, 1), (-1, 0))
EPS_HI = ((0, -1), (1, 0))


def omega_lo(n):
    """Block symplectic matrix J, used as the unprimed eps_{AB}."""
    m = [[0] * (2 * n) for _ in range(2 * n)]
    for l in range(n):
        m[2 * l][2 * l + 1] = 1
        m[2 * l + 1][2 * l] = -1
    return m


def omega_hi(n):
    """Inverse of J, used as eps^{AB}; eps_{AB} eps^{BC} = delta."""
    return [[-x for x in row] for row in omega_lo(n)]


def perm_sign(seq):
    """Sign of the permutation sorting seq (0 when there is a repeat)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class SymmetryClass:
    __slots__ = ("n", "q", "p", "free", "sym_upper", "_hash")

    def __init__(self, n, q_anti=0, p_sym=0, free_slots=(), sym_upper=False):
        if n < 1 or not 0 <= q_anti <= 2 * n or p_sym < 0:
            raise BadClass(f"invalid class n={n} q={q_anti} p={p_sym}")
        for s in free_slots:
            if s not in (E_LO, E_UP, H_LO, H_UP):
                raise BadClass(f"unknown slot tag {s!r}")
        self.n = n
        self.q = q_anti
        self.p = p_sym
        self.free = tuple(free_slots)
        self.sym_upper = sym_upper
        self._hash = hash((n, q_anti, p_sym, self.free, sym_upper))

    def __eq__(self, o):
        return (
            isinstance(o, SymmetryClass)
            and (self.n, self.q, self.p, self.free, self.sym_upper) == (o.n, o.q, o.p, o.free, o.sym_upper)
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"SymmetryClass(n={self.n}, q={self.q}, p={self.p}, free={list(self.free)}, sym_upper={self.sym_upper})"

    def to_json(self):
        return {
            "n": self.n,
            "q_anti": self.q,
            "p_sym": self.p,
            "free_slots": ["".join(s) for s in self.free],
            "sym_upper": self.sym_upper,
        }

    @property
    def slots(self):
        """Slot tags of the full index tuple, in order."""
        return self.free + (E_LO,) * self.q + ((H_UP if self.sym_upper else H_LO),) * self.p

    def range_of(self, tag):
        return 2 * self.n if tag[0] == "E" else 2

    @property
    def nfree(self):
        return len(self.free)

    def count(self):
        total = comb(2 * self.n, self.q) * (self.p + 1)
        for s in self.free:
            total *= self.range_of(s)
        return total

    def keys(self):
        return _keys(self)

    def rank(self, key):
        try:
            return _ranks(self)[key]
        except KeyError:
            raise BadIndex(f"{key!r} is not a canonical key of {self!r}") from None

    def unrank(self, i):
        ks = _keys(self)
        if not 0 <= i < len(ks):
            raise BadIndex(f"ordinal {i} out of range")
        return ks[i]

    def canonicalize(self, idx):
        """Map a full index tuple to (sign, canonical key); sign 0 means the entry vanishes."""
        nf = len(self.free)
        q = self.q
        if len(idx) != nf + q + self.p:
            raise BadIndex(f"index {idx!r} has wrong length for {self!r}")
        block = idx[nf : nf + q]
        sign = perm_sign(block) if q > 1 else 1
        if sign == 0:
            return 0, None
        return sign, (tuple(sorted(block)), sum(idx[nf + q :]), tuple(idx[:nf]))

    def full_index(self, key):
        """A representative full index tuple of a canonical key."""
        unp, c, free = key
        return tuple(free) + tuple(unp) + (0,) * (self.p - c) + (1,) * c

    def all_indices(self):
        ranges = [range(self.range_of(s)) for s in self.slots]
        return itertools.product(*ranges)

    def multiplicity(self, key):
        return factorial(self.q) * comb(self.p, key[1])


@lru_cache(maxsize=None)
def _keys(cls):
    ranges = [range(cls.range_of(s)) for s in cls.free]
    out = []
    for unp in itertools.combinations(range(2 * cls.n), cls.q):
        for c in range(cls.p + 1):
            for free in itertools.product(*ranges):
                out.append((unp, c, free))
    return tuple(out)


@lru_cache(maxsize=None)
def _ranks(cls):
    return {k: i for i, k in enumerate(_keys(cls))}


def _is_zero(x):
    return x is None or (isinstance(x, int) and x == 0) or (not isinstance(x, int) and x.is_zero())


class SpinorTensor:
    """Canonical storage of a tensor of a given symmetry class."""

    __slots__ = ("cls", "entries")

    def __init__(self, cls, entries=None, check=True):
        self.cls = cls
        entries = {} if entries is None else entries
        if check:
            ranks = _ranks(cls)
            for k in entries:
                if k not in ranks:
                    raise BadIndex(f"{k!r} is not canonical for {cls!r}")
        self.entries = {k: v for k, v in entries.items() if not _is_zero(v)}

    def get(self, idx):
        sign, key = self.cls.canonicalize(idx)
        if sign == 0:
            return 0
        v = self.entries.get(key)
        if v is None:
            return 0
        return v if sign == 1 else -v

    def __getitem__(self, key):
        return self.entries.get(key, 0)

    def is_zero(self):
        return not self.entries

    def map(self, fn, cls=None):
        return SpinorTensor(cls or self.cls, {k: fn(v) for k, v in self.entries.items()}, check=False)

    def __add__(self, o):
        if o.cls != self.cls:
            raise BadClass("adding tensors of different classes")
        out = dict(self.entries)
        for k, v in o.entries.items():
            out[k] = out[k] + v if k in out else v
        return SpinorTensor(self.cls, out, check=False)

    def __sub__(self, o):
        return self + (-o)

    def __neg__(self):
        return self.map(lambda v: -v)

    def scale(self, c):
        return self.map(lambda v: v * c)

    def __eq__(self, o):
        if not isinstance(o, SpinorTensor) or o.cls != self.cls:
            return False
        return (self - o).is_zero()

    def __repr__(self):
        return f"SpinorTensor({self.cls!r}, {len(self.entries)} nonzero entries)"

    def values_at_origin(self):
        """Order-0 values of jet entries as a FieldElement tensor."""
        out = {}
        for k, v in self.entries.items():
            out[k] = v.constant_term() if hasattr(v, "constant_term") else v
        return SpinorTensor(self.cls, out, check=False)

    def truncate(self, m):
        return self.map(lambda v: v.truncate(m) if hasattr(v, "truncate") else v)

    def vector(self):
        """Entries in canonical key order (zeros filled in)."""
        return [self.entries.get(k, ZERO) for k in self.cls.keys()]

    @classmethod
    def from_vector(cls_, cls, vec):
        return SpinorTensor(cls, dict(zip(cls.keys(), vec)), check=False)

    def to_json(self):
        from .field import serialize

        return {
            "class": self.cls.to_json(),
            "entries": [
                {"key": [list(k[0]), k[1], list(k[2])], "value": serialize(v)}
                for k, v in sorted(self.entries.items())
            ],
        }


def canonical_index(cls, mode, key=None):
    if mode == "enumerate":
        return list(cls.keys())
    if mode == "rank":
        return cls.rank(key)
    if mode == "unrank":
        return cls.unrank(key)
    raise ValueError(f"unknown mode {mode!r}")


def project_sym(t, cls):
    """Apply the normalised (anti)symmetrisers of cls to a full index map.

    ``t`` is a callable or dict on full index tuples.
    """
    get = t.get if isinstance(t, dict) else t
    q, p = cls.q, cls.p
    perms_q = [(perm, perm_sign(perm)) for perm in itertools.permutations(range(q))]
    out = {}
    for key in cls.keys():
        unp, c, free = key
        prim_arrangements = [
            tuple(1 if i in ones else 0 for i in range(p)) for ones in itertools.combinations(range(p), c)
        ]
        total = 0
        for perm, sgn in perms_q:
            block = tuple(unp[i] for i in perm)
            for prim in prim_arrangements:
                v = get(tuple(free) + block + prim)
                if v is None or _is_zero(v):
                    continue
                total = total + (v if sgn == 1 else -v)
        if not _is_zero(total):
            out[key] = total * FieldElement(mpq(1, factorial(q) * len(prim_arrangements)))
    return SpinorTensor(cls, out, check=False)


def to_full_map(t):
    """Dense dictionary of every full index tuple of t (nonzero values only)."""
    out = {}
    for idx in t.cls.all_indices():
        v = t.get(idx)
        if not _is_zero(v):
            out[idx] = v
    return out


def _metric(kind, direction, n):
    if kind == "H":
        return EPS_HI if direction == "raise" else EPS_LO
    return omega_hi(n) if direction == "raise" else omega_lo(n)


def raise_lower(t, slot, direction, metric=None):
    """Raise or lower the free slot at position ``slot``.

    Raising uses f^A = f_B eps^{BA}; lowering uses f_C = f^A eps_{AC}.
    The unprimed metric is the block matrix J (only for Kahler-type use).
    """
    cls = t.cls
    tag = cls.free[slot]
    if direction == "raise" and tag[1] != "lo" or direction == "lower" and tag[1] != "up":
        raise BadVariance(f"cannot {direction} slot {slot} with variance {tag[1]}")
    if metric is not None:
        if (metric == "eps_primed") != (tag[0] == "H"):
            raise BadVariance("metric does not match slot kind")
    m = _metric(tag[0], direction, cls.n)
    new_tag = (tag[0], "up" if direction == "raise" else "lo")
    new_free = cls.free[:slot] + (new_tag,) + cls.free[slot + 1 :]
    ncls = SymmetryClass(cls.n, cls.q, cls.p, new_free, cls.sym_upper)
    rng = cls.range_of(tag)
    out = {}
    for key in ncls.keys():
        unp, c, free = key
        idx = list(ncls.full_index(key))
        a = idx[slot]
        total = 0
        for b in range(rng):
            coef = m[b][a]
            if coef:
                idx[slot] = b
                v = t.get(tuple(idx))
                if not _is_zero(v):
                    total = total + (v if coef == 1 else -v)
        if not _is_zero(total):
            out[key] = total
    return SpinorTensor(ncls, out, check=False)


def contract(t, slot_up, slot_dn):
    """Trace over a pair of free slots of the same kind and opposite variance."""
    cls = t.cls
    tu, td = cls.free[slot_up], cls.free[slot_dn]
    if tu[0] != td[0]:
        raise BadContraction("contracting primed against unprimed")
    if tu[1] != "up" or td[1] != "lo":
        raise BadContraction("contraction needs one upper and one lower slot")
    keep = [i for i in range(len(cls.free)) if i not in (slot_up, slot_dn)]
    ncls = SymmetryClass(cls.n, cls.q, cls.p, tuple(cls.free[i] for i in keep), cls.sym_upper)
    rng = cls.range_of(tu)
    out = {}
    for key in ncls.keys():
        unp, c, free = key
        rest = ncls.full_index(key)[len(free) :]
        total = 0
        for a in range(rng):
            fidx = [None] * len(cls.free)
            for pos, val in zip(keep, free):
                fidx[pos] = val
            fidx[slot_up] = a
            fidx[slot_dn] = a
            v = t.get(tuple(fidx) + rest)
            if not _is_zero(v):
                total = total + v
        if not _is_zero(total):
            out[key] = total
    return SpinorTensor(ncls, out, check=False)


def _pair(x, y):
    if isinstance(x, TrigPolynomialFn):
        return torus_pair(x, y)
    return x * scalar_conj(y)


def inner_product(v, w, method="all"):
    """Hermitian pairing summing over all index tuples (not just canonical keys).

    ``method="weighted"`` evaluates the same sum over canonical keys with
    multiplicities.
    """
    if v.cls != w.cls:
        raise BadClass("inner product of tensors in different classes")
    if any(s[1] == "up" for s in v.cls.slots):
        raise BadClass("inner product expects all-lower slots")
    total = ZERO
    if method == "all":
        for idx in v.cls.all_indices():
            a, b = v.get(idx), w.get(idx)
            if _is_zero(a) or _is_zero(b):
                continue
            total = total + _pair(a, b)
        return total
    for key, a in v.entries.items():
        b = w.entries.get(key)
        if b is None:
            continue
        total = total + _pair(a, b) * v.cls.multiplicity(key)
    return total


def delta_tensor(n, kind):
    """delta_X^Y as a tensor with free slots (lo, up)."""
    tag_lo, tag_up = (E_LO, E_UP) if kind == "E" else (H_LO, H_UP)
    cls = SymmetryClass(n, 0, 0, (tag_lo, tag_up))
    rng = cls.range_of(tag_lo)
    return SpinorTensor(cls, {((), 0, (a, a)): ONE for a in range(rng)})


def eps_tensor(n, variance="lo"):
    tag = H_LO if variance == "lo" else H_UP
    m = EPS_LO if variance == "lo" else EPS_HI
    cls = SymmetryClass(n, 0, 0, (tag, tag))
    return SpinorTensor(cls, {((), 0, (a, b)): FieldElement(m[a][b]) for a in range(2) for b in range(2) if m[a][b]})


def levi_civita_E(n):
    """The volume form eps_{A_1..A_2n} as the top antisymmetric tensor."""
    cls = SymmetryClass(n, 2 * n, 0)
    return SpinorTensor(cls, {(tuple(range(2 * n)), 0, ()): ONE})


class EpsilonStructures:
    def __init__(self, n):
        self.n = n
        self.eps_primed_lo = EPS_LO
        self.eps_primed_hi = EPS_HI
        self.omega_lo = omega_lo(n)
        self.omega_hi = omega_hi(n)
        self.eps_E = levi_civita_E(n)
