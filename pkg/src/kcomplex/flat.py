"""The complex on flat quaternionic space and on the flat torus."""

import random
from collections import Counter
from itertools import combinations_with_replacement, product
from math import factorial

from . import linalg
from .covariant import FlatGeometry, apply_D, nabla
from .field import I, INV_SQRT2, ZERO, gaussian
from .frames import qmul
from .scalars import PolynomialFn, TrigPolynomialFn
from .symbols import ComplexSpec, XiMatrix, exactness_check, sigma_build
from .tensor import SpinorTensor


def flat_nabla(f, variant="full"):
    return nabla(FlatGeometry(f.cls.n), f, variant)


def flat_apply_D(spec, j, f):
    return apply_D(spec, j, f, FlatGeometry(spec.n))


# -- random sections --------------------------------------------------------


def random_poly(rng, nvars, degree, terms=2):
    """Sparse homogeneous polynomial with Gaussian integer coefficients in [-3, 3]."""
    coeffs = {}
    for _ in range(terms):
        e = [0] * nvars
        for _ in range(degree):
            e[rng.randrange(nvars)] += 1
        coeffs[tuple(e)] = gaussian(rng.randint(-3, 3), rng.randint(-3, 3))
    return PolynomialFn.from_dict(nvars, coeffs)


def random_section(rng, cls, degree, terms=2, density=None):
    """Random polynomial section of a symmetry class.

    ``density`` caps the number of nonzero canonical entries (all by default).
    """
    keys = list(cls.keys())
    if density is not None and density < len(keys):
        keys = rng.sample(keys, density)
    return SpinorTensor(cls, {k: random_poly(rng, 4 * cls.n, degree, terms) for k in keys}, check=False)


class FlatReport:
    def __init__(self, spec, trials, degree, seed, stages):
        self.spec = spec
        self.trials = trials
        self.degree = degree
        self.seed = seed
        self.stages = stages

    @property
    def failures(self):
        return [f for s in self.stages for f in s["failures"]]

    @property
    def ok(self):
        return not self.failures

    def to_json(self):
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "trials": self.trials,
            "degree": self.degree,
            "seed": self.seed,
            "stages": self.stages,
            "failures": self.failures,
            "ok": self.ok,
        }


def verify_flat_complex(spec, trials=20, degree=4, seed=0, terms=2):
    """Check D_{j+1} D_j f = 0 for random polynomial sections at every stage."""
    rng = random.Random(seed)
    geom = FlatGeometry(spec.n)
    stages = []
    for j in range(len(spec.kinds) - 1):
        failures = []
        nonzero = 0
        for t in range(trials):
            f = random_section(rng, spec.space(j), degree, terms)
            g = apply_D(spec, j, f, geom)
            if not g.is_zero():
                nonzero += 1
            h = apply_D(spec, j + 1, g, geom)
            if not h.is_zero():
                failures.append({"stage": j, "trial": t, "nonzero_entries": len(h.entries)})
        stages.append(
            {
                "stage": j,
                "kinds": [spec.kinds[j], spec.kinds[j + 1]],
                "trials": trials,
                "nonzero_images": nonzero,
                "failures": failures,
            }
        )
    return FlatReport(spec, trials, degree, seed, stages)


def regular_example():
    """The section f_{0'} = x1 + i x2, f_{1'} = x3 + i x4 at stage 0 of n=2, k=1."""
    spec = ComplexSpec(2, 1)
    x = [PolynomialFn.variable(8, a) for a in range(1, 9)]
    f = SpinorTensor(spec.space(0), {((), 0, ()): x[0] + x[1] * I, ((), 1, ()): x[2] + x[3] * I})
    return spec, f


# -- symbols on Fourier modes -----------------------------------------------


def mode_section(cls, m, values):
    """Section with entries values[i] * exp(i m.x) in canonical key order."""
    nv = 4 * cls.n
    return SpinorTensor(
        cls, {k: TrigPolynomialFn.mode(nv, m, v) for k, v in zip(cls.keys(), values) if not v.is_zero()}, check=False
    )


def symbol_consistency(spec, j, m, values):
    """True when D_j on a single mode equals (i/sqrt2)^order times the symbol matrix."""
    f = mode_section(spec.space(j), m, values)
    Df = apply_D(spec, j, f, FlatGeometry(spec.n))
    c = I * INV_SQRT2
    if spec.stage_kind(j) == "baston":
        c = c * c
    want = [x * c for x in linalg.matvec(sigma_build(spec, j, XiMatrix(m)), values)]
    got = []
    for key in spec.space(j + 1).keys():
        v = Df[key]
        got.append(ZERO if isinstance(v, int) else v.mode_coefficient(m))
    return got == want


# -- torus cohomology -------------------------------------------------------

_UNITS = [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
_UNITS = _UNITS + [tuple(-x for x in u) for u in _UNITS]


def _block_orbits(bound):
    """Integer quaternions in the box grouped into orbits of left unit multiplication.

    Left multiplication by a unit permutes coordinates up to sign, so the box
    is preserved.  Returns {representative: orbit size}.
    """
    sizes = {}
    for q in product(range(-bound, bound + 1), repeat=4):
        rep = min(qmul(u, q) for u in _UNITS)
        sizes[rep] = sizes.get(rep, 0) + 1
    return sizes


def _arrangements(blocks):
    """Number of distinct orderings of a multiset of blocks."""
    out = factorial(len(blocks))
    for c in Counter(blocks).values():
        out //= factorial(c)
    return out


class TorusReport:
    def __init__(self, spec, mode_bound, dims, modes, representatives, failures):
        self.spec = spec
        self.mode_bound = mode_bound
        self.dims = dims
        self.modes = modes
        self.representatives = representatives
        self.failures = failures

    def to_json(self):
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "mode_bound": self.mode_bound,
            "cohomology_dims": self.dims,
            "fiber_dims": self.spec.dims(),
            "modes": self.modes,
            "orbit_representatives": self.representatives,
            "failures": self.failures,
        }


def torus_cohomology(spec, mode_bound=1):
    """Dimensions of the cohomology of the complex restricted to modes with |m|_inf <= mode_bound.

    The zero mode contributes the fibres (every operator kills constants).
    A nonzero mode contributes dim ker sigma_j(m) - rank sigma_{j-1}(m).
    Modes are enumerated through orbits of the group generated by left unit
    multiplication in each quaternionic block and block permutations; the
    symbol ranks are constant on such orbits because that group acts by
    unprimed frame changes.
    """
    if mode_bound < 1:
        raise ValueError("mode_bound must be at least 1")
    dims = spec.dims()
    coh = list(dims)
    orbits = _block_orbits(mode_bound)
    zero = (0, 0, 0, 0)
    reps = sorted(orbits)
    modes = 0
    nreps = 0
    failures = []
    for blocks in combinations_with_replacement(reps, spec.n):
        if all(b == zero for b in blocks):
            continue
        count = _arrangements(blocks)
        for b in blocks:
            count *= orbits[b]
        m = [x for b in blocks for x in b]
        rep = exactness_check(spec, XiMatrix(m))
        padded = [0] + rep.ranks + [0]
        for j, d in enumerate(dims):
            extra = d - padded[j + 1] - padded[j]
            if extra:
                coh[j] += extra * count
        if not rep.exact:
            failures.append({"mode": m, "stages": rep.failures})
        modes += count
        nreps += 1
    return TorusReport(spec, mode_bound, coh, modes, nreps, failures)
