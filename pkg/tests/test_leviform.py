import numpy as np
import pytest
from scipy.integrate import solve_ivp

from _helpers import example_map, random_map, random_point, random_poly
from subgap.leviform import (
    HypothesisError,
    ame_field,
    ame_ratio,
    flow_laplacian_ratio,
    flow_residual,
    flow_taylor,
    foliation_prepare,
    kernel_dimension,
    levi_form,
    min_eigenvalue,
    resolvent_projector,
    unitary_separation,
)
from subgap.polyalg import JetSeries, MultiPoly, PolyMap


def z(n, k):
    return MultiPoly.variable(n, k)


def squares_map():
    return PolyMap(2, (z(2, 0) ** 2, z(2, 1) ** 2), 2)


def decoupled_map():
    return PolyMap(2, (z(2, 0), z(2, 1) ** 2))


def test_levi_form_diagonal():
    spec = levi_form(squares_map(), np.array([1, 0.5]))
    assert np.allclose(spec.matrix, np.diag([4, 1]))
    assert spec.lambda1 == pytest.approx(1.0)
    assert spec.reconstruction_error() <= 1e-10 * np.linalg.norm(spec.matrix)


def test_levi_form_identity():
    F = PolyMap(3, tuple(z(3, k) for k in range(3)))
    rng = np.random.default_rng(0)
    for _ in range(5):
        spec = levi_form(F, random_point(rng, 3))
        assert np.allclose(spec.matrix, np.eye(3)) and spec.lambda1 == pytest.approx(1.0)


def test_levi_form_example_det_identity():
    F = example_map()
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = random_point(rng, 3)
        spec = levi_form(F, p)
        x1, x2, x3 = p
        detJ = 8 * x1 * x2 * x3 - 2 * x3**3  # closed form of det J for this map
        assert np.prod(spec.eigenvalues) == pytest.approx(abs(detJ) ** 2, rel=1e-9)
        assert np.all(np.diff(spec.eigenvalues) >= 0)
        assert np.all(spec.eigenvalues >= -1e-12 * spec.eigenvalues[-1])


def test_lambda1_homogeneity():
    rng = np.random.default_rng(2)
    for d in (2, 3):
        F = random_map(rng, 3, d, homogeneous=True)
        for _ in range(10):
            p = random_point(rng, 3)
            R = float(rng.uniform(0.3, 3.0))
            a = levi_form(F, R * p, check=False).lambda1
            b = R ** (2 * d - 2) * levi_form(F, p, check=False).lambda1
            assert a == pytest.approx(b, rel=1e-10)


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.diag([4.0, 1.0])) == pytest.approx(1.0)
    assert min_eigenvalue([[2, 1], [1, 2]]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        min_eigenvalue([[1, 2], [0, 1]])
    with pytest.raises(ValueError):
        min_eigenvalue(np.ones((2, 3)))


def test_min_eigenvalue_characteristic_polynomial_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        B = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        H = B + B.conj().T
        roots = np.roots(np.poly(H)).real
        assert min_eigenvalue(H) == pytest.approx(roots.min(), rel=1e-8, abs=1e-8)


def test_kernel_dimension():
    assert kernel_dimension(np.diag([1.0, 0.0, 0.0])) == 2
    assert kernel_dimension(np.zeros((2, 2))) == 2
    assert kernel_dimension(np.eye(3)) == 0


def test_resolvent_projector_diagonal():
    assert np.allclose(resolvent_projector(np.diag([0.0, 5.0])), np.diag([1.0, 0.0]), atol=1e-12)


def test_resolvent_projector_nonnormal():
    # residue of (zeta - A)^{-1} at 0 for A = [[0, 1], [0, 5]]
    P = resolvent_projector(np.array([[0, 1], [0, 5]]))
    assert np.allclose(P, [[1, -0.2], [0, 0]], atol=1e-12)


def test_resolvent_projector_random_laws():
    rng = np.random.default_rng(4)
    for _ in range(20):
        Q = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        lam = np.array([0.1, -0.3j, 3.0, 4.0 + 1j])
        A = Q @ np.diag(lam) @ np.linalg.inv(Q)
        P = resolvent_projector(A)
        assert np.linalg.norm(P @ P - P, 2) <= 1e-8
        assert np.linalg.norm(A @ P - P @ A, 2) <= 1e-8
        assert np.trace(P).real == pytest.approx(2.0, abs=1e-8)


def test_resolvent_projector_rejects_contour_eigenvalue():
    with pytest.raises(ValueError, match="radius"):
        resolvent_projector(np.diag([1.0, 3.0]))
    with pytest.raises(ValueError):
        resolvent_projector(np.eye(2) * 3, nodes=16)


def test_unitary_separation_cases():
    M = unitary_separation(np.diag([1.0, 0.0]))
    assert np.allclose(M.conj().T @ M, np.eye(2))
    J = np.array([[0, 1], [0, 0]], dtype=complex)
    M = unitary_separation(J)
    MJ = M @ J
    eig = np.sort(np.abs(np.linalg.eigvals(MJ)))
    assert eig[0] < 1e-12 and eig[1] > 0.5
    with pytest.raises(HypothesisError):
        unitary_separation(np.zeros((2, 2)))


def test_unitary_separation_random_rank_deficient():
    rng = np.random.default_rng(5)
    for _ in range(20):
        U = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
        V = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
        J = U @ np.diag([2.0, 0.7, 0.0]) @ V
        M = unitary_separation(J)
        eig = np.sort(np.abs(np.linalg.eigvals(M @ J)))
        assert eig[0] < 1e-10 and eig[1] > 1e-3


def test_ame_field_squares():
    fld = ame_field(squares_map(), np.array([1.0, 0.0]), 4)
    assert abs(abs(np.vdot(fld.v0, [0, 1])) - 1) < 1e-12
    rng = np.random.default_rng(6)
    for _ in range(5):
        q = np.array([1.0, 0.0]) + 0.05 * random_point(rng, 2)
        X = fld.X(q)
        assert abs(X[0]) < 1e-10
        J = squares_map().jacobian_at(q)
        hxx = np.linalg.norm(J @ (X / np.linalg.norm(X))) ** 2
        assert hxx == pytest.approx(4 * abs(q[1]) ** 2, rel=1e-8)


def test_ame_field_decoupled_eigenvalue_jet():
    fld = ame_field(decoupled_map(), np.array([1.0, 0.0]), 3)
    assert fld.eigen_residual() <= 1e-10 and fld.idempotence_residual() <= 1e-10
    # alpha(z) = 2 z2 after the separating rotation, up to the phase fixed by M
    alpha = fld.alpha_jet
    assert abs(alpha[0]) < 1e-12
    assert np.max(np.abs(alpha)) == pytest.approx(2.0, rel=1e-10)


def test_ame_field_example_conic():
    F = example_map()
    p = np.array([1, 1, 2]) / np.sqrt(6)
    fld = ame_field(F, p, 4)
    P0 = fld.projector_at(p)
    assert np.linalg.norm(P0 @ fld.v0 - fld.v0) <= 1e-8
    assert fld.eigen_residual() <= 1e-6
    assert fld.idempotence_residual() <= 1e-6
    assert fld.commutation_residual() <= 1e-6
    C = ame_ratio(F, fld, radius=0.05, samples=200)
    assert np.isfinite(C) and C >= 1 - 1e-9


def test_ame_field_errors():
    F = example_map()
    with pytest.raises(HypothesisError):
        ame_field(F, np.zeros(3), 2)
    cube = PolyMap(3, tuple(z(3, k) ** 3 for k in range(3)), 3)
    with pytest.raises(HypothesisError):
        ame_field(cube, np.array([1.0, 0, 0]), 2)
    triv = ame_field(F, np.array([1.0, 1.0, 1.0]), 2)
    assert triv.trivial


def test_flow_constant_field():
    v = np.array([1 + 2j, -0.5])
    X = tuple(MultiPoly(2, {(0, 0): c}) for c in v)
    theta = flow_taylor(X, 5, start=np.array([0.3, 0.1j]))
    assert np.allclose(theta[0].coeffs[:2], [0.3, 1 + 2j]) and np.allclose(theta[1].coeffs[:2], [0.1j, -0.5])
    assert np.allclose(theta[0].coeffs[2:], 0)


def test_flow_exponential():
    theta = flow_taylor((MultiPoly.variable(1, 0),), 8, start=np.array([1.0]))
    fact = np.cumprod([1] + list(range(1, 9)))
    assert np.allclose(theta[0].coeffs, 1 / fact, rtol=1e-14)


def test_flow_against_ode_integrator():
    rng = np.random.default_rng(8)
    n, K = 2, 12
    X = tuple(random_poly(rng, n, 2) for _ in range(n))
    start = 0.3 * random_point(rng, n)
    theta = flow_taylor(X, K, start)
    assert flow_residual(X, theta) <= 1e-12
    zeta = 0.01

    def rhs(t, y):
        w = y[:n] + 1j * y[n:]
        v = np.array([p.evaluate(w) for p in X]) * zeta
        return np.concatenate([v.real, v.imag])

    sol = solve_ivp(rhs, (0, 1), np.concatenate([start.real, start.imag]), rtol=1e-13, atol=1e-15)
    ref = sol.y[:n, -1] + 1j * sol.y[n:, -1]
    jet = np.array([t.evaluate(zeta) for t in theta])
    assert np.linalg.norm(jet - ref) <= 1e-9 * np.linalg.norm(ref)


def test_foliation_decoupled():
    chart = foliation_prepare(decoupled_map(), np.array([1.0, 0.0]), 4)
    assert chart.m == 1
    det = chart.det_jets[0].coeffs
    assert abs(abs(det[1]) - 2) < 1e-10 and np.allclose(det[2:], 0, atol=1e-10)


def test_foliation_example_line_point():
    F = example_map()
    p = np.array([1.0, 2.0, 0.0]) / np.sqrt(5)
    chart = foliation_prepare(F, p, 6)
    assert chart.m == 1
    for theta in chart.flows[:5]:
        # the field is expressed in h = z - p
        local = tuple(JetSeries(t.coeffs - np.eye(1, t.coeffs.size)[0] * pk) for t, pk in zip(theta, p))
        assert flow_residual(chart.field.X_polys, local) <= 1e-10
    zetas = 0.02 * np.exp(2j * np.pi * np.arange(20) / 20)
    ratios = flow_laplacian_ratio(F, chart, zetas)
    assert np.all(np.isfinite(ratios)) and np.all(ratios > 0)
    assert ratios.max() / ratios.min() < 10


def test_foliation_rejects_noncritical():
    with pytest.raises(HypothesisError):
        foliation_prepare(example_map(), np.array([1.0, 1.0, 1.0]) / np.sqrt(3), 4)
