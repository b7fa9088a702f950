import numpy as np
import pytest

from subgap.gaplab import (
    ComparabilityError,
    DiscGrid,
    FieldSpec,
    GridError,
    annulus_norm_check,
    annulus_potential,
    assemble,
    basic_gap,
    discrete_laplacian,
    gap_1d_general,
    min_gap,
    power_weight,
    random_real_polynomial,
    random_subharmonic_polynomial,
    real_polynomial_field,
    scaling_check,
    sharpness_scan,
)


def test_grid_validation():
    with pytest.raises(GridError):
        DiscGrid(0, 1, 8)
    with pytest.raises(GridError):
        DiscGrid(0, -1, 64)
    g = DiscGrid(0.5j, 2.0, 64)
    assert g.h == pytest.approx(2 * 2.0 / 64)
    assert np.all(np.abs(g.points - 0.5j) < 2.0)


def test_holomorphic_energy_vanishes():
    g = DiscGrid(0, 1, 128)
    a = assemble(g, None, 0.0)
    assert a.energy(g.points) <= 1e-3
    assert a.energy(g.points**3) <= 1e-3


def test_antiholomorphic_energy_and_area():
    g = DiscGrid(0, 1, 256)
    a = assemble(g, None, 0.0)
    # |d zbar / d zbar|^2 = 1 integrates to the area pi
    assert a.energy(np.conj(g.points)) == pytest.approx(np.pi, rel=0.02)
    assert a.mass(np.ones(g.count)) == pytest.approx(np.pi, rel=0.02)


def test_energy_matrix_hermitian_psd():
    g = DiscGrid(0, 1, 32)
    phi = real_polynomial_field(random_real_polynomial(np.random.default_rng(0)))
    a = assemble(g, phi, annulus_potential(2.0, 1.0))
    E = a.energy_matrix.toarray()
    assert np.max(np.abs(E - E.conj().T)) <= 1e-10 * np.max(np.abs(E))
    assert np.linalg.eigvalsh(E)[0] >= -1e-10 * np.max(np.abs(E))
    assert np.all(a.mass_matrix.diagonal() > 0)


def test_assemble_rejects_bad_fields():
    g = DiscGrid(0, 1, 32)
    with pytest.raises(ValueError):
        assemble(g, None, -1.0)
    with pytest.raises(ValueError):
        assemble(g, np.full(g.count, np.inf), 0.0)
    with pytest.raises(ValueError):
        real_polynomial_field({(1, 0): 1.0})


def test_gap_zero_for_flat_form():
    assert abs(min_gap(assemble(DiscGrid(0, 1, 64))).gap) <= 1e-10


def test_gap_is_rayleigh_quotient():
    g = DiscGrid(0, 1, 64)
    a = assemble(g, real_polynomial_field({(1, 1): 1.0}), annulus_potential(1.0, 1.0))
    r = min_gap(a)
    assert a.energy_u(r.minimizer_u) / a.mass_u(r.minimizer_u) == pytest.approx(r.gap, rel=1e-12)


def test_gap_against_dense_eigensolver():
    g = DiscGrid(0, 1, 24)
    a = assemble(g, real_polynomial_field({(1, 1): 0.5}), annulus_potential(3.0, 1.0))
    dense = np.linalg.eigvalsh(a.energy_matrix.toarray() / a.h2)[0]
    assert min_gap(a).gap == pytest.approx(dense, rel=1e-9)


def test_gap_monotone_in_potential():
    g = DiscGrid(0, 1, 64)
    lo = min_gap(assemble(g, None, annulus_potential(1.0, 1.0))).gap
    hi = min_gap(assemble(g, None, lambda z: 1.0 + 0 * np.abs(z))).gap
    assert hi >= lo - 1e-10
    assert lo > 0.01


def test_gauge_invariance_converges():
    # phi -> phi + Re G with G = z^2 + 0.6 i z leaves the continuum form unchanged;
    # the discrete defect is a truncation error and must shrink at second order
    V = annulus_potential(1.0, 1.0)
    base = {(1, 1): 1.0}
    shifted = {**base, (2, 0): 0.5, (0, 2): 0.5, (1, 0): 0.3j, (0, 1): -0.3j}
    defects = []
    for N in (64, 128):
        g = DiscGrid(0, 1, N)
        a = min_gap(assemble(g, real_polynomial_field(base), V)).gap
        b = min_gap(assemble(g, real_polynomial_field(shifted), V)).gap
        defects.append(abs(a - b) / a)
    assert defects[1] < 1e-4
    assert defects[1] < defects[0] / 3


def test_scaling_identity_trivial_and_exact():
    phi = real_polynomial_field({(2, 2): 1.0})
    bump = lambda z: np.exp(-4 * np.abs(z) ** 2)
    assert scaling_check(phi, bump, 1.0, N=64) == 0.0
    assert scaling_check(phi, bump, 2.0, N=128) <= 1e-12
    rng = np.random.default_rng(1)
    phi = real_polynomial_field(random_subharmonic_polynomial(rng))
    w = lambda z: np.exp(-np.abs(z - 0.2) ** 2) * (1 + z * np.conj(z) ** 2)
    assert scaling_check(phi, w, 0.5, N=96) <= 1e-12
    with pytest.raises(ValueError):
        scaling_check(phi, w, 0.0)


def test_random_subharmonic_laplacian_nonnegative():
    rng = np.random.default_rng(2)
    g = DiscGrid(0, 1, 64)
    for _ in range(5):
        f = real_polynomial_field(random_subharmonic_polynomial(rng))
        assert np.all(f.laplacian(g.points) >= -1e-12)
        interior = np.isfinite(discrete_laplacian(g, f.value(g.points)))
        num = discrete_laplacian(g, f.value(g.points))[interior]
        assert np.max(np.abs(num - f.laplacian(g.points)[interior])) <= 1e-2 * np.max(np.abs(num))


def test_power_weight_laplacian_matches_stencil():
    g = DiscGrid(0, 1, 128)
    f = power_weight(3.0, 2)
    num = discrete_laplacian(g, f.value(g.points))
    ok = np.isfinite(num)
    assert np.max(np.abs(num[ok] - f.laplacian(g.points)[ok])) <= 1e-2 * np.max(np.abs(num[ok]))


def test_basic_gap_unit_case():
    r64, r128 = basic_gap(1.0, 1.0, 64).gap, basic_gap(1.0, 1.0, 128).gap
    assert r128 >= 0.01
    assert abs(r64 - r128) / r128 < 0.1


def test_sharpness_degree_zero_small_amplitude():
    # d = 0: V = 4 A^2 constant, so the gap equals 4 A^2 exactly while below the O(1) scale
    A = np.array([0.01, 0.02, 0.04, 0.08])
    res = sharpness_scan(0, A, N=64)
    assert np.allclose(res.gaps, 4 * A**2, rtol=1e-8)
    assert res.slope == pytest.approx(2.0, abs=1e-6)


def test_sharpness_saturation_guard():
    with pytest.raises(GridError, match="larger N"):
        sharpness_scan(1, [1e4, 1e5, 1e6, 1e7], N=32)
    with pytest.raises(ValueError):
        sharpness_scan(1, [1, 2, 3], N=32)


def test_gap_1d_general_monomial_normalized():
    # phi = A^2 |z|^{2d+2} / (4 (d+1)^2) has Laplacian exactly |A z^d|^2
    d = 2
    ratios = []
    for A in (1e2, 1e3):
        f = power_weight(A, d)
        phi = FieldSpec(lambda z, f=f: f.value(z) / (4 * (d + 1) ** 2), lambda z, f=f: f.dbar(z) / (4 * (d + 1) ** 2),
                        lambda z, f=f: f.laplacian(z) / (4 * (d + 1) ** 2))
        rep = gap_1d_general([0, 0, A], 1.0 + 1e-9, phi, N=96)
        assert rep.passed
        ratios.append(rep.ratio)
    assert 0.2 < ratios[0] / ratios[1] < 5


def test_gap_1d_general_constant_case():
    # degree 0: the form is the flat one with V = A^2, so the gap is min(A^2, O(1))
    # phi = |z|^2 / 16 has Laplacian 1/4 = |P|^2; w = 1 is holomorphic, so the gap is exactly A^2
    phi = FieldSpec(lambda z: np.abs(z) ** 2 / 16, lambda z: z / 16, lambda z: 0.25 + 0 * np.abs(z))
    rep = gap_1d_general([0.5], 1.0, phi, N=64)
    assert rep.result.gap == pytest.approx(0.25, rel=1e-8)


def test_gap_1d_general_rejects():
    flat = FieldSpec(lambda z: 0 * np.abs(z), lambda z: 0 * z, lambda z: 0 * np.abs(z))
    with pytest.raises(ComparabilityError) as exc:
        gap_1d_general([0, 1.0], 2.0, flat, N=32)
    assert isinstance(exc.value.witness, complex)
    with pytest.raises(ValueError):
        gap_1d_general([-0.8, 1.0], 2.0, flat, N=32)


def test_annulus_norm_ratios():
    assert annulus_norm_check([1.0]) == pytest.approx(4 / 3, rel=0.02)
    for k in (1, 3, 6):
        c = np.zeros(k + 1)
        c[k] = 1
        assert annulus_norm_check(c) == pytest.approx(1 / (1 - 2.0 ** (-2 * k - 2)), rel=0.02)
    rng = np.random.default_rng(3)
    for _ in range(10):
        c = rng.standard_normal(11) + 1j * rng.standard_normal(11)
        assert annulus_norm_check(c) <= (4 / 3) / (1 - 0.25)
