import itertools

import numpy as np

from subgap.certify import data_path
from subgap.io import load_discs, load_map
from subgap.polyalg import MultiPoly, PolyMap


def example_map() -> PolyMap:
    return load_map(data_path("conic_line.json"))


def example_discs():
    return load_discs(data_path("conic_line_discs.json"), 3)


def exponents(n, d, homogeneous):
    degs = [d] if homogeneous else range(d + 1)
    return [e for k in degs for e in itertools.product(range(k + 1), repeat=n) if sum(e) == k]


def random_poly(rng, n, d, homogeneous=False, density=0.7):
    terms = {}
    for e in exponents(n, d, homogeneous):
        if rng.random() < density:
            terms[e] = complex(rng.standard_normal(), rng.standard_normal())
    if not terms:
        e = exponents(n, d, True)[0]
        terms[e] = 1.0
    return MultiPoly(n, terms)


def random_map(rng, n, d, homogeneous=False) -> PolyMap:
    comps = tuple(random_poly(rng, n, d, homogeneous) for _ in range(n))
    return PolyMap(n, comps, d if homogeneous else None)


def random_point(rng, n, scale=1.0):
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def power_map(n, d) -> PolyMap:
    return PolyMap(n, tuple(MultiPoly.variable(n, k) ** d for k in range(n)), d)
