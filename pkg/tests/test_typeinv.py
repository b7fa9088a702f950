import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from _helpers import example_discs, example_map, power_map, random_point
from subgap.leviform import HypothesisError, foliation_prepare
from subgap.polyalg import JetSeries, MultiPoly, PolyMap
from subgap.typeinv import (
    critical_kernel_certificate,
    disc_order_search,
    disc_order_verify,
    hp_flatness,
    locus_singular_points,
    project_to_locus,
    projective_kernel_dim,
    sharp_order,
    t_invariant,
    type_report,
)

XI = np.exp(2j * np.pi / 3)
INTERSECTION = np.array([1.0, 0.0, 0.0])
CONIC = np.array([1.0, XI**2, 2 * XI])
LINE = np.array([1.0, 2.0, 0.0])


def unit(p):
    p = np.asarray(p, dtype=complex)
    return p / np.linalg.norm(p)


def sympy_disc_order(psi, K=8):
    # oracle: exact Taylor expansion of F o psi - F(psi(0)) for the example map written out by hand
    t = sympy.symbols("t")
    z1, z2, z3 = (sympy.expand(c.subs(sympy.Symbol("zeta"), t)) for c in psi)
    comps = (z1**2 + z2 * z3, z2**2 + z1 * z3, z3**2)
    orders = []
    for f in comps:
        poly = sympy.Poly(sympy.expand(f), t)
        nz = [k for k in range(1, K + 1) if sympy.simplify(poly.coeff_monomial(t**k)) != 0]
        orders.append(nz[0] if nz else math.inf)
    return min(orders)


def test_certificate_example():
    cert = critical_kernel_certificate(example_map(), samples=300)
    assert cert.passed and cert.max_kernel_dim == 1 and cert.samples > 0
    assert not cert.immersion


def test_certificate_squares_and_cube_failure():
    sq = critical_kernel_certificate(power_map(2, 2), samples=100)
    assert sq.passed and sq.max_kernel_dim == 1
    cube = critical_kernel_certificate(power_map(3, 3), samples=200)
    assert not cube.passed and cube.max_kernel_dim == 2


def test_certificate_immersion_flag():
    cert = critical_kernel_certificate(PolyMap.linear(np.diag([1.0, 2.0, 3.0])), samples=50)
    assert cert.passed and cert.immersion


def test_project_to_locus_lands_on_locus():
    F = example_map()
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(20):
        w, ok = project_to_locus(F, unit(random_point(rng, 3)))
        if ok:
            hits += 1
            x1, x2, x3 = w
            assert abs(8 * x1 * x2 * x3 - 2 * x3**3) <= 1e-10
            assert np.linalg.norm(w) == pytest.approx(1.0)
    assert hits >= 10


def test_singular_points_include_line_conic_intersections():
    F = example_map()
    rng = np.random.default_rng(1)
    starts = []
    for _ in range(40):
        w, ok = project_to_locus(F, unit(random_point(rng, 3)))
        if ok:
            starts.append(w)
    found = locus_singular_points(F, starts)
    targets = [INTERSECTION, np.array([0.0, 1.0, 0.0])]
    for target in targets:
        # projective distance
        assert min(np.linalg.norm(np.cross(q, target)) / np.linalg.norm(q) for q in found) < 1e-6


def test_projective_kernel_dim_matches_affine():
    F = example_map()
    for p in (INTERSECTION, CONIC, LINE, np.array([1.0, 1.0, 1.0])):
        s = np.linalg.svd(F.jacobian_at(p), compute_uv=False)
        assert projective_kernel_dim(F, p) == int(np.sum(s < 1e-8 * s[0]))


def test_witness_disc_orders_match_symbolic_oracle():
    F = example_map()
    line, conic, inter = example_discs()
    assert disc_order_verify(F, inter).order == 4
    assert disc_order_verify(F, conic).order == 3
    assert disc_order_verify(F, line).order == 2
    zeta = sympy.Symbol("zeta")
    xi = sympy.Rational(-1, 2) + sympy.sqrt(3) * sympy.I / 2
    assert sympy_disc_order((1 + zeta**3 / 2, zeta, -zeta**2)) == 4
    assert sympy_disc_order((1 + xi * zeta, xi**2 - zeta - xi * zeta**2 / 2, 2 * xi)) == 3
    assert sympy_disc_order((1 + 4 * zeta, 2 + zeta, -4 * zeta)) == 2


def test_radial_disc_has_order_one():
    F = example_map()
    p = np.array([1.0, 0.3, -0.2j])
    disc = tuple(JetSeries([pk, pk]) for pk in p)
    assert disc_order_verify(F, disc).order == 1


def test_singular_disc_rejected():
    F = example_map()
    disc = tuple(JetSeries([pk, 0, 1]) for pk in (1.0, 0.0, 0.0))
    with pytest.raises(HypothesisError):
        disc_order_verify(F, disc)


def test_order_reparametrization_invariant():
    F = example_map()
    repar = JetSeries([0, 2.0, 1.0 - 0.5j, 0.3])
    for disc in example_discs():
        base = disc_order_verify(F, disc, 10).order
        moved = tuple(_compose_shifted(c, repar, 10) for c in disc)
        assert disc_order_verify(F, moved, 10).order == base


def _compose_shifted(c: JetSeries, inner: JetSeries, K: int) -> JetSeries:
    # c(inner(zeta)) for a series c with nonzero constant term
    c0 = c.coeffs[0]
    rest = JetSeries(np.concatenate([[0], c.coeffs[1:]]), K)
    out = rest.compose(JetSeries(inner.coeffs, K))
    return JetSeries(out.coeffs + np.eye(1, K + 1, 0)[0] * c0)


def test_search_example_points():
    F = example_map()
    assert disc_order_search(F, unit(INTERSECTION)).order == 4
    assert disc_order_search(F, unit([0.0, 1.0, 0.0])).order == 4
    assert disc_order_search(F, unit(CONIC)).order == 3
    assert disc_order_search(F, unit(LINE)).order == 2
    assert disc_order_search(F, unit([1.0, 4.0, 4.0])).order == 2


def test_search_witness_achieves_order():
    F = example_map()
    res = disc_order_search(F, unit(INTERSECTION))
    assert res.complete
    assert disc_order_verify(F, res.witness, res.depth).order == 4
    assert all(r <= 1e-8 for r in res.residuals[:-1])


def test_search_incomplete_when_depth_too_small():
    res = disc_order_search(example_map(), unit(INTERSECTION), K=3)
    assert not res.complete and math.isinf(res.order)


def test_search_power_map():
    for d in (2, 3):
        res = disc_order_search(power_map(2, d), np.array([0.0, 1.0]))
        assert res.order == d and res.kernel_dim == 1


def test_search_rejects_two_dimensional_kernel():
    with pytest.raises(HypothesisError):
        disc_order_search(power_map(3, 3), np.array([0.0, 0.0, 1.0]))


def test_t_invariant_cases():
    assert t_invariant(PolyMap.linear(np.eye(3)), samples=20).t == 1
    ti = t_invariant(power_map(2, 2), samples=40)
    assert ti.t == 2 and ti.complete
    ti = t_invariant(power_map(2, 3), samples=40)
    assert ti.t == 3


def test_t_invariant_monotone_in_depth():
    F = example_map()
    pts = [unit(INTERSECTION), unit(CONIC)]
    shallow = t_invariant(F, K=3, samples=0, special_points=pts)
    deep = t_invariant(F, K=6, samples=0, special_points=pts)
    assert not shallow.complete and "search incomplete" in shallow.mode
    assert deep.complete and deep.t == 4
    assert deep.t >= min(shallow.t, 4)


def test_sharp_order_values():
    F = example_map()
    assert sharp_order(F, 4) == (Fraction(1, 8), 8)
    for d in (1, 2, 3):
        one_var = PolyMap(1, (MultiPoly.variable(1, 0) ** d,), d)
        assert sharp_order(one_var, 1)[0] == Fraction(1, 2 * d)
    assert sharp_order(PolyMap.linear(np.eye(2)), 1)[0] == Fraction(1, 2)
    cert = critical_kernel_certificate(power_map(3, 3), samples=100)
    with pytest.raises(HypothesisError, match="certificate"):
        sharp_order(power_map(3, 3), 3, cert)


def test_hp_flatness_values():
    F = example_map()
    assert hp_flatness(F, np.zeros(3)) == 2
    assert hp_flatness(F, unit(INTERSECTION)) == 6
    assert hp_flatness(power_map(2, 3), np.zeros(2)) == 4


def test_hp_dominates_weierstrass_order():
    F = example_map()
    for p in (LINE, CONIC, [1.0, 4.0, 4.0]):
        p = unit(p)
        chart = foliation_prepare(F, p, 8)
        assert 2 * chart.m <= hp_flatness(F, p)


def test_type_report_example():
    rep = type_report(example_map(), witness_discs=example_discs(), samples=100, kernel_samples=300)
    out = rep.to_json()
    assert (out["s_num"], out["s_den"]) == (1, 8)
    assert out["t"] == 4 and out["d"] == 2 and out["T1"] == 8
    assert out["t_mode"].startswith("verified-by-supplied-discs;")
    assert sorted(w["order"] for w in out["witnesses"]) == [2, 3, 4]


def test_type_report_rejects_bad_hypotheses():
    with pytest.raises(HypothesisError):
        type_report(power_map(3, 3), samples=10, kernel_samples=100)
    degenerate = PolyMap(2, (MultiPoly.variable(2, 0) ** 2, MultiPoly.variable(2, 0) * MultiPoly.variable(2, 1)), 2)
    with pytest.raises(HypothesisError):
        type_report(degenerate, samples=10, kernel_samples=50)
