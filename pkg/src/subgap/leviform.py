"""Levi forms of Hermitian sums of squares, spectral projectors and approximate minimal eigenvector fields.

For ``phi = |F|^2`` the Levi form is ``H = J^* J``.  Near a point ``p`` where
``J(p)`` has a one-dimensional kernel, a unitary ``M`` is chosen so that the zero
eigenvalue of ``M J(p)`` is simple.  The Riesz projector of ``M J(z)`` on a small
circle around 0 is holomorphic in ``z``; applied to a kernel vector it gives the
field ``X``.  Everything holomorphic is carried as a Taylor jet in ``h = z - p``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .polyalg import JetSeries, MultiPoly, PolyMap, vanishing_order

KERNEL_RTOL = 1e-8
HERMITIAN_TOL = 1e-12
PROJECTOR_TOL = 1e-8
DEFAULT_NODES = 256
MAX_NODES = 1 << 14


class HypothesisError(ValueError):
    """A mathematical hypothesis of the construction fails at the given input."""


class ConvergenceError(RuntimeError):
    """A numerical iteration did not reach its tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class HermitianSpectrum:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    def reconstruction_error(self) -> float:
        U, lam = self.eigenvectors, self.eigenvalues
        return float(np.linalg.norm(U @ np.diag(lam) @ U.conj().T - self.matrix))


def levi_form(poly_map: PolyMap, z, check: bool = True) -> HermitianSpectrum:
    """``H(z) = J(z)^* J(z)`` with eigenpairs in ascending order.

    Eigenvalues are squared singular values of ``J``, which keeps small
    eigenvalues accurate relative to themselves.
    """
    J = poly_map.jacobian_at(z)
    H = J.conj().T @ J
    _, s, Vh = np.linalg.svd(J)
    lam = (s**2)[::-1]
    U = Vh.conj().T[:, ::-1]
    if check:
        detJ = poly_map.det_jacobian_poly.evaluate(np.asarray(z, dtype=complex))
        lhs = float(np.prod(lam))
        rhs = abs(detJ) ** 2
        floor = 1e-13 * float(np.max(lam)) ** poly_map.n
        if abs(lhs - rhs) > 1e-9 * rhs + floor:
            raise AssertionError(f"det H = {lhs:.6e} differs from |det J|^2 = {rhs:.6e}")
    return HermitianSpectrum(H, lam, U)


def min_eigenvalue(H) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("square matrix required")
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - H.conj().T)) > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian")
    return float(np.linalg.eigvalsh(H)[0])


def kernel_dimension(J, rtol: float = KERNEL_RTOL) -> int:
    s = np.linalg.svd(np.asarray(J, dtype=complex), compute_uv=False)
    if s[0] == 0:
        return len(s)
    return int(np.sum(s < rtol * s[0]))


def _check_circle(A: np.ndarray, center: complex, radius: float):
    eig = np.linalg.eigvals(A)
    gap = np.min(np.abs(np.abs(eig - center) - radius))
    eps = np.finfo(float).eps
    if gap <= 10 * eps * max(np.linalg.norm(A, 2), 1.0):
        raise ValueError("an eigenvalue lies on the contour; choose a different radius")
    return eig


def _trapezoid_projector(A: np.ndarray, center: complex, radius: float, nodes: int) -> np.ndarray:
    n = A.shape[0]
    w = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    shifted = (center + w)[:, None, None] * np.eye(n) - A[None]
    R = np.linalg.solve(shifted, np.broadcast_to(np.eye(n), shifted.shape))
    return np.tensordot(w, R, axes=(0, 0)) / nodes


def resolvent_projector(A, center: complex = 0.0, radius: float = 1.0, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Riesz projector ``(1/2 pi i) \\oint (zeta I - A)^{-1} d zeta`` by the trapezoidal rule.

    The node count starts at ``nodes`` and doubles until ``||P^2 - P|| < 1e-8``.
    """
    A = np.asarray(A, dtype=complex)
    if nodes < 64:
        raise ValueError("at least 64 quadrature nodes required")
    if radius <= 0:
        raise ValueError("radius must be positive")
    _check_circle(A, center, radius)
    best = None
    while nodes <= MAX_NODES:
        P = _trapezoid_projector(A, center, radius, nodes)
        err = np.linalg.norm(P @ P - P, 2)
        if err < PROJECTOR_TOL:
            return P
        best = P
        nodes *= 2
    raise ConvergenceError("projector quadrature did not converge", best)


def unitary_separation(Jp) -> np.ndarray:
    """Unitary ``M`` making the zero eigenvalue of ``M J_p`` simple.

    With ``J_p = U S V^*`` take ``M = V U^*``; then ``M J_p = V S V^*`` is Hermitian
    positive semidefinite, its range is the orthogonal complement of the kernel.
    """
    Jp = np.asarray(Jp, dtype=complex)
    if kernel_dimension(Jp) != 1:
        raise HypothesisError("kernel of J(p) must be one-dimensional")
    U, s, Vh = np.linalg.svd(Jp)
    M = Vh.conj().T @ U.conj().T
    eig = np.abs(np.linalg.eigvals(M @ Jp))
    small = np.sum(eig < KERNEL_RTOL * s[0])
    if small != 1:
        raise AssertionError("zero eigenvalue of M J(p) is not simple")
    return M


@lru_cache(maxsize=64)
def monomials(n: int, K: int) -> tuple[tuple[int, ...], ...]:
    """All exponents in ``n`` variables of total degree at most ``K`` in graded order."""
    out = []
    for deg in range(K + 1):
        for c in itertools.combinations_with_replacement(range(n), deg):
            e = [0] * n
            for k in c:
                e[k] += 1
            out.append(tuple(e))
    out = sorted(set(out), key=lambda e: (sum(e), tuple(-x for x in e)))
    return tuple(out)


@lru_cache(maxsize=64)
def product_table(n: int, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index triples ``(i, j, k)`` with ``mono[i] + mono[j] = mono[k]`` within degree ``K``."""
    monos = monomials(n, K)
    index = {e: i for i, e in enumerate(monos)}
    I, Jx, Kx = [], [], []
    for i, a in enumerate(monos):
        for j, b in enumerate(monos):
            if sum(a) + sum(b) > K:
                continue
            I.append(i)
            Jx.append(j)
            Kx.append(index[tuple(x + y for x, y in zip(a, b))])
    return np.array(I), np.array(Jx), np.array(Kx)


def matrix_jet_product(A: np.ndarray, B: np.ndarray, n: int, K: int) -> np.ndarray:
    """Truncated product of matrix (or vector) jets stored as ``(monomials, ...)`` arrays."""
    I, Jx, Kx = product_table(n, K)
    if B.ndim == A.ndim:
        terms = A[I] @ B[Jx]
    else:
        terms = np.einsum("tij,tj->ti", A[I], B[Jx])
    out = np.zeros((len(monomials(n, K)),) + terms.shape[1:], dtype=complex)
    np.add.at(out, Kx, terms)
    return out


def scalar_jet_product(a: np.ndarray, B: np.ndarray, n: int, K: int) -> np.ndarray:
    I, Jx, Kx = product_table(n, K)
    terms = a[I].reshape((-1,) + (1,) * (B.ndim - 1)) * B[Jx]
    out = np.zeros_like(B, dtype=complex)
    np.add.at(out, Kx, terms)
    return out


def polynomial_jet(poly: MultiPoly, p, K: int) -> np.ndarray:
    """Coefficients of ``poly(p + h)`` on :func:`monomials` (exact for degree <= K)."""
    q = poly.shift(p)
    monos = monomials(poly.n, K)
    return np.array([q.coefficient(e) for e in monos], dtype=complex)


def jet_to_polys(jet: np.ndarray, n: int, K: int) -> tuple[MultiPoly, ...]:
    """Turn a vector jet ``(monomials, n)`` into MultiPoly components in ``h``."""
    monos = monomials(n, K)
    return tuple(MultiPoly(n, zip(monos, jet[:, j]), prune=False) for j in range(jet.shape[1]))


@dataclass(frozen=True)
class AmeField:
    """Approximate minimal eigenvector field at ``p`` as Taylor jets in ``h = z - p``."""

    p: np.ndarray
    v0: np.ndarray
    M: np.ndarray
    eps: float
    order: int
    projector_jet: np.ndarray | None
    alpha_jet: np.ndarray | None
    field_jet: np.ndarray
    matrix_jet: np.ndarray | None = None
    trivial: bool = False
    nodes: int = DEFAULT_NODES
    monos: tuple = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return self.p.size

    @property
    def X_polys(self) -> tuple[MultiPoly, ...]:
        """Components of ``X`` as polynomials in ``h = z - p``."""
        return jet_to_polys(self.field_jet, self.n, self.order)

    def X(self, z) -> np.ndarray:
        h = np.asarray(z, dtype=complex) - self.p
        return np.stack([np.asarray(c.evaluate(h)) for c in self.X_polys], axis=-1)

    def projector_at(self, z) -> np.ndarray:
        h = np.asarray(z, dtype=complex) - self.p
        mons = np.array([np.prod(h ** np.array(e)) for e in monomials(self.n, self.order)])
        return np.tensordot(mons, self.projector_jet, axes=(0, 0))

    def eigen_residual(self) -> float:
        """Largest coefficient of ``M J Pi - alpha Pi`` through the jet order."""
        if self.trivial:
            return 0.0
        n, K = self.n, self.order
        lhs = matrix_jet_product(self.matrix_jet, self.projector_jet, n, K)
        rhs = scalar_jet_product(self.alpha_jet, self.projector_jet, n, K)
        return float(np.max(np.abs(lhs - rhs)))

    def idempotence_residual(self) -> float:
        if self.trivial:
            return 0.0
        P = self.projector_jet
        return float(np.max(np.abs(matrix_jet_product(P, P, self.n, self.order) - P)))

    def commutation_residual(self) -> float:
        if self.trivial:
            return 0.0
        n, K = self.n, self.order
        A, P = self.matrix_jet, self.projector_jet
        return float(np.max(np.abs(matrix_jet_product(A, P, n, K) - matrix_jet_product(P, A, n, K))))


def _jacobian_jet(poly_map: PolyMap, p, K: int) -> np.ndarray:
    n = poly_map.n
    out = np.zeros((len(monomials(n, K)), n, n), dtype=complex)
    for j, row in enumerate(poly_map.jacobian_polys):
        for k, entry in enumerate(row):
            out[:, j, k] = polynomial_jet(entry, p, K)
    return out


def _resolvent_projector_jet(A: np.ndarray, n: int, K: int, radius: float, nodes: int) -> np.ndarray:
    """Jet of the projector of the matrix jet ``A`` on the circle ``|zeta| = radius``.

    Degree by degree, ``R_a = R_0 sum_{b + c = a, |b| >= 1} A_b R_c`` with
    ``R_0 = (zeta - A_0)^{-1}``, evaluated at all nodes at once.
    """
    monos = monomials(n, K)
    index = {e: i for i, e in enumerate(monos)}
    w = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    eye = np.eye(n)
    R0 = np.linalg.inv(w[:, None, None] * eye - A[0][None])
    R = np.zeros((len(monos), nodes, n, n), dtype=complex)
    R[0] = R0
    nonconst = [(i, e) for i, e in enumerate(monos) if sum(e) >= 1 and np.any(A[i] != 0)]
    for ia, a in enumerate(monos):
        if ia == 0:
            continue
        acc = np.zeros((nodes, n, n), dtype=complex)
        for ib, b in nonconst:
            if sum(b) > sum(a):
                break
            c = tuple(x - y for x, y in zip(a, b))
            if min(c) < 0:
                continue
            acc += A[ib][None] @ R[index[c]]
        R[ia] = R0 @ acc
    return np.tensordot(w, R, axes=(0, 1)) / nodes


def ame_field(poly_map: PolyMap, p, K: int, nodes: int = DEFAULT_NODES) -> AmeField:
    """Approximate minimal eigenvector field of ``|F|^2`` at ``p`` as jets of order ``K``."""
    p = np.asarray(p, dtype=complex)
    n = poly_map.n
    if np.linalg.norm(p) == 0:
        raise HypothesisError("base point must differ from the origin")
    Jp = poly_map.jacobian_at(p)
    kdim = kernel_dimension(Jp)
    monos = monomials(n, K)
    if kdim == 0:
        jet = np.zeros((len(monos), n), dtype=complex)
        jet[0, 0] = 1.0
        return AmeField(p, np.eye(n)[0].astype(complex), np.eye(n, dtype=complex), 0.0, K, None, None, jet,
                        trivial=True, monos=monos)
    if kdim >= 2:
        raise HypothesisError(f"kernel of J(p) has dimension {kdim}; fields need a one-dimensional kernel")
    M = unitary_separation(Jp)
    _, s, Vh = np.linalg.svd(Jp)
    v0 = Vh[-1].conj()
    A = np.einsum("ij,tjk->tik", M, _jacobian_jet(poly_map, p, K))
    lam = np.sort(np.abs(np.linalg.eigvals(A[0])))
    eps = 0.5 * float(lam[1])
    best = None
    while nodes <= MAX_NODES:
        P = _resolvent_projector_jet(A, n, K, eps, nodes)
        scale = max(1.0, float(np.max(np.abs(P))))
        err = float(np.max(np.abs(matrix_jet_product(P, P, n, K) - P))) / scale
        if err < PROJECTOR_TOL:
            break
        best = P
        nodes *= 2
    else:
        raise ConvergenceError("projector jet quadrature did not converge", best)
    alpha = np.einsum("tii->t", matrix_jet_product(A, P, n, K))
    X = np.einsum("tij,j->ti", P, v0)
    return AmeField(p, v0, M, eps, K, P, alpha, X, A, False, nodes, monos)


def ame_ratio(poly_map: PolyMap, field_: AmeField, radius: float = 0.05, samples: int = 400, seed: int = 0) -> float:
    """Largest ``(H X, X) / lambda_1`` over random points of the ball ``B(p, radius)``."""
    rng = np.random.default_rng(seed)
    n = poly_map.n
    g = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(samples) ** (1.0 / (2 * n))
    pts = field_.p + r[:, None] * g
    worst = 0.0
    for z in pts:
        X = field_.X(z)
        J = poly_map.jacobian_at(z)
        hxx = float(np.linalg.norm(J @ X) ** 2)
        lam1 = levi_form(poly_map, z, check=False).lambda1
        worst = max(worst, hxx / lam1)
    return worst


def _batched_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of batches of series stored along the last axis."""
    K = a.shape[-1] - 1
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    for j in range(K + 1):
        out[..., j:] += a[..., j:j + 1] * b[..., : K + 1 - j]
    return out


def batched_compose(polys, jets: np.ndarray) -> np.ndarray:
    """Compose polynomials with a batch of vector jets.

    ``jets`` has shape ``(S, n, K + 1)``; the result has shape ``(S, len(polys), K + 1)``.
    """
    S, n, K1 = jets.shape
    one = np.zeros((S, K1), dtype=complex)
    one[:, 0] = 1.0
    powers = [[one] for _ in range(n)]

    def power(k, e):
        while len(powers[k]) <= e:
            powers[k].append(_batched_mul(powers[k][-1], jets[:, k]))
        return powers[k][e]

    cache: dict = {}
    out = np.zeros((S, len(polys), K1), dtype=complex)
    for i, poly in enumerate(polys):
        for e, c in poly:
            if e not in cache:
                mono = one
                for k, ek in enumerate(e):
                    if ek:
                        mono = _batched_mul(mono, power(k, ek))
                cache[e] = mono
            out[:, i] += c * cache[e]
    return out


def flow_taylor_batch(X, K: int, starts) -> np.ndarray:
    """Flow jets for a batch of start points; shape ``(S, n, K + 1)``."""
    X = tuple(X)
    starts = np.atleast_2d(np.asarray(starts, dtype=complex))
    S, n = starts.shape
    coeffs = np.zeros((S, n, K + 1), dtype=complex)
    coeffs[:, :, 0] = starts
    for k in range(K):
        vals = batched_compose(X, coeffs)
        coeffs[:, :, k + 1] = vals[:, :, k] / (k + 1)
    return coeffs


def flow_taylor(X, K: int, start=None) -> tuple[JetSeries, ...]:
    """Taylor jet of the solution of ``d Theta / d zeta = X(Theta)``, ``Theta(0) = start``.

    ``X`` is a sequence of MultiPoly giving the field in the coordinates in which
    ``start`` is expressed (default: the origin).  Coefficients come from
    ``theta_{k+1} = [zeta^k] X(Theta) / (k + 1)``.
    """
    X = tuple(X)
    n = len(X)
    start = np.zeros(n, dtype=complex) if start is None else np.asarray(start, dtype=complex)
    coeffs = flow_taylor_batch(X, K, start[None])[0]
    return tuple(JetSeries(coeffs[j]) for j in range(n))


def flow_residual(X, theta) -> float:
    """Largest coefficient of ``Theta' - X(Theta)`` through order ``K - 1``."""
    K = theta[0].order
    worst = 0.0
    for j, Xj in enumerate(X):
        lhs = theta[j].derivative().coeffs
        rhs = Xj.compose(list(theta)).coeffs[:K]
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@dataclass(frozen=True)
class FoliationChart:
    p: np.ndarray
    radius: float
    transverse: np.ndarray
    offsets: np.ndarray
    flows: tuple
    det_jets: tuple
    m: int
    weierstrass_coeffs: np.ndarray
    field: AmeField

    def to_json(self) -> dict:
        return {
            "p": [[float(x.real), float(x.imag)] for x in self.p],
            "radius": self.radius,
            "samples": int(self.offsets.shape[0]),
            "weierstrass_order": self.m,
            "max_abs_c_at_base": float(np.max(np.abs(self.weierstrass_coeffs[0]))) if self.m else 0.0,
            "max_abs_c": float(np.max(np.abs(self.weierstrass_coeffs))) if self.m else 0.0,
        }


def transverse_grid(n: int, radius: float = 0.05, per_dim: int = 5) -> np.ndarray:
    """Tensor grid of the real ``2(n-1)``-ball, returned as complex ``(points, n-1)``."""
    t = np.linspace(-radius, radius, per_dim)
    pts = np.array(list(itertools.product(t, repeat=2 * (n - 1))))
    pts = pts[np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)]
    return pts[:, : n - 1] + 1j * pts[:, n - 1:]


def weierstrass_coefficients(jet: JetSeries, m: int) -> np.ndarray:
    """Coefficients ``c_0 .. c_{m-1}`` of the monic factor built from the ``m`` smallest roots."""
    c = jet.coeffs
    nz = np.nonzero(np.abs(c) > 0)[0]
    roots = np.roots(c[: nz[-1] + 1][::-1])
    roots = roots[np.argsort(np.abs(roots), kind="stable")][:m]
    return np.poly(roots)[::-1][:m]


def foliation_prepare(poly_map: PolyMap, p, K: int, per_dim: int = 5, radius: float = 0.05) -> FoliationChart:
    """Flow the field from a transverse ball and read off the Weierstrass order of ``det J``."""
    p = np.asarray(p, dtype=complex)
    n = poly_map.n
    fld = ame_field(poly_map, p, K)
    if fld.trivial:
        raise HypothesisError("p is not a critical point; the chart is trivial")
    X0 = fld.field_jet[0]
    # orthonormal basis of the complement of X(p)
    Q, _ = np.linalg.qr(np.column_stack([X0, np.eye(n, dtype=complex)]))
    T = Q[:, 1:n]
    offsets = transverse_grid(n, radius, per_dim) if n > 1 else np.zeros((1, 0), dtype=complex)
    detJ = poly_map.det_jacobian_poly
    Xp = fld.X_polys
    starts = offsets @ T.T
    theta_h = flow_taylor_batch(Xp, K, starts)
    theta_all = theta_h.copy()
    theta_all[:, :, 0] += p
    det_all = batched_compose([detJ], theta_all)[:, 0]
    flows = [tuple(JetSeries(row) for row in th) for th in theta_all]
    dets = [JetSeries(row) for row in det_all]
    base = int(np.argmin(np.linalg.norm(offsets, axis=1))) if n > 1 else 0
    jet0 = dets[base]
    scale = max(1.0, float(np.max(np.abs(jet0.coeffs))))
    if abs(jet0.coeffs[0]) > 1e-8 * scale:
        raise HypothesisError("p is not on the critical locus")
    m = vanishing_order(jet0)
    if m == float("inf"):
        raise HypothesisError("det J vanishes along the flow through order K; increase K or check hypotheses")
    m = int(m)
    cs = np.array([weierstrass_coefficients(j, m) for j in dets]) if m else np.zeros((len(dets), 0))
    order = np.argsort(np.linalg.norm(offsets, axis=1), kind="stable")
    return FoliationChart(p, radius, T, offsets[order], tuple(flows[i] for i in order),
                          tuple(dets[i] for i in order), m, cs[order], fld)


def flow_laplacian_ratio(poly_map: PolyMap, chart: FoliationChart, zetas, step: float = 1e-4) -> np.ndarray:
    """Ratios ``Delta_zeta |F(Theta(zeta))|^2 / |J(p; zeta)|^2`` along the base flow line."""
    theta = chart.flows[0]
    det = chart.det_jets[0]

    def phi(z):
        pts = np.stack([np.asarray(t.evaluate(z)) for t in theta], axis=-1)
        return np.sum(np.abs(poly_map.evaluate(pts)) ** 2, axis=-1)

    z = np.asarray(zetas, dtype=complex)
    lap = (phi(z + step) + phi(z - step) + phi(z + 1j * step) + phi(z - 1j * step) - 4 * phi(z)) / step**2
    return lap / np.abs(det.evaluate(z)) ** 2
