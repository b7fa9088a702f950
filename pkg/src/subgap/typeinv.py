"""Type invariants of homogeneous polynomial maps: kernel certificates, disc orders, sharp order.

Orders are computed in the affine space.  For a disc through ``p != 0`` whose
tangent is not radial, rescaling the disc by a holomorphic scalar factor turns
the projective order of ``F o psi`` into the affine order of the rescaled disc,
so both notions agree at critical points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .leviform import HypothesisError, KERNEL_RTOL, kernel_dimension
from .polyalg import (
    JetSeries,
    PolyMap,
    _to_complex,
    _to_real,
    compose_jet,
    default_jet_order,
    evaluate,
    jet_values,
    sphere_samples,
    vanishing_order,
)

RANGE_RTOL = 1e-8


# kernel certificate


def _det_and_grad(poly_map: PolyMap, z: np.ndarray):
    f = poly_map.det_jacobian_poly
    val = f.evaluate(z)
    grad = np.array([f.diff(k).evaluate(z) for k in range(poly_map.n)])
    return complex(val), grad


def project_to_locus(poly_map: PolyMap, z, iters: int = 60, tol: float = 1e-13):
    """Newton steps for ``det J = 0`` followed by renormalization to the unit sphere."""
    z = np.asarray(z, dtype=complex)
    z = z / np.linalg.norm(z)
    for _ in range(iters):
        f, g = _det_and_grad(poly_map, z)
        gn = float(np.vdot(g, g).real)
        if abs(f) <= tol * max(1.0, math.sqrt(gn)):
            return z, True
        if gn == 0:
            return z, False
        z = z - f * np.conj(g) / gn
        z = z / np.linalg.norm(z)
    f, g = _det_and_grad(poly_map, z)
    return z, abs(f) <= 1e-9 * max(1.0, float(np.linalg.norm(g)))


def _low_rank_objective(poly_map: PolyMap):
    n = poly_map.n

    def obj(x):
        z = _to_complex(x)
        s = np.linalg.svd(poly_map.jacobian_at(z), compute_uv=False)
        return float(np.log(s[n - 2] ** 2 + s[n - 1] ** 2 + 1e-300) - 2 * np.log(s[0]))

    return obj


def refine_low_rank(poly_map: PolyMap, z0) -> np.ndarray:
    """Local minimization of ``log(s_{n-1}^2 + s_n^2) - 2 log s_1`` on the sphere."""
    from scipy.optimize import minimize

    res = minimize(_low_rank_objective(poly_map), _to_real(np.asarray(z0, dtype=complex)), method="BFGS",
                   options={"gtol": 1e-10, "maxiter": 2000})
    return _to_complex(res.x)


def _polish_singular(grads, z, iters: int = 20) -> np.ndarray:
    """Minimum-norm Newton steps for ``grad det J = 0``; the radial direction is free by homogeneity."""
    n = len(grads)
    hess = [[g.diff(k) for k in range(n)] for g in grads]
    for _ in range(iters):
        r = np.array([g.evaluate(z) for g in grads])
        if np.linalg.norm(r) < 1e-15:
            break
        Hm = np.array([[h.evaluate(z) for h in row] for row in hess])
        step = np.linalg.lstsq(Hm, r, rcond=1e-10)[0]
        z = z - step
        z = z / np.linalg.norm(z)
    return z


def locus_singular_points(poly_map: PolyMap, starts, tol: float = 1e-10) -> list[np.ndarray]:
    """Points of the critical locus where the gradient of ``det J`` nearly vanishes.

    Minimizes ``|det J|^2 + |grad det J|^2`` (scaled) on the sphere from each start
    and keeps distinct projective points below ``tol``.
    """
    from scipy.optimize import minimize

    f = poly_map.det_jacobian_poly
    grads = [f.diff(k) for k in range(poly_map.n)]

    def obj(x):
        z = _to_complex(x)
        z = z / np.linalg.norm(z)
        v = abs(f.evaluate(z)) ** 2 + sum(abs(g.evaluate(z)) ** 2 for g in grads)
        return float(v)

    found: list[np.ndarray] = []
    for z0 in starts:
        res = minimize(obj, _to_real(np.asarray(z0, dtype=complex)), method="BFGS", options={"gtol": 1e-14, "maxiter": 1000})
        z = _to_complex(res.x)
        z = z / np.linalg.norm(z)
        if obj(_to_real(z)) < tol:
            z = _polish_singular(grads, z)
            if not any(abs(abs(np.vdot(w, z)) - 1) < 1e-6 for w in found):
                found.append(z)
    return found


@dataclass(frozen=True)
class KernelCertificate:
    max_kernel_dim: int
    samples: int
    witnesses: tuple
    passed: bool
    immersion: bool
    low_rank_ratio: float
    note: str = "sampling certificate on the critical locus; not an algebraic proof"


def critical_kernel_certificate(poly_map: PolyMap, samples: int = 1000, seed: int = 0, refine: int = 8) -> KernelCertificate:
    """Largest ``dim ker J`` found on a sample of the critical locus on the unit sphere.

    Sphere samples are pulled onto ``det J = 0`` by Newton steps; the most nearly
    rank-deficient ones are then refined by a local search for rank ``n - 2``.
    """
    n = poly_map.n
    rng = np.random.default_rng(seed)
    if poly_map.det_jacobian_poly.is_zero():
        raise HypothesisError("det J vanishes identically")
    if n == 1:
        # det J is a monomial z^{d-1}: the locus on the sphere is empty for d = 1 and {0} otherwise
        return KernelCertificate(0, 0, (), True, True, 1.0)
    pts = []
    for z in sphere_samples(n, samples, rng):
        w, ok = project_to_locus(poly_map, z)
        if ok:
            pts.append(w)
    if not pts:
        return KernelCertificate(0, samples, (), True, True, 1.0)

    def ratio(z):
        s = np.linalg.svd(poly_map.jacobian_at(z), compute_uv=False)
        return s[n - 2] / s[0]

    ratios = np.array([ratio(z) for z in pts])
    order = np.argsort(ratios, kind="stable")[:refine]
    cands = list(pts) + [refine_low_rank(poly_map, pts[i]) for i in order]
    cands += locus_singular_points(poly_map, [pts[i] for i in order])
    dims = [kernel_dimension(poly_map.jacobian_at(z)) for z in cands]
    kmax = max(dims)
    wit = tuple(cands[i] for i, k in enumerate(dims) if k == kmax)[:5]
    best_ratio = float(min(ratio(z) for z in cands))
    return KernelCertificate(kmax, len(pts), wit, kmax <= 1, False, best_ratio)


def projective_kernel_dim(poly_map: PolyMap, p) -> int:
    """``dim ker`` of the differential of the induced map of projective space at ``[p]``."""
    p = np.asarray(p, dtype=complex)
    n = poly_map.n
    Fp = evaluate(poly_map, p)
    J = poly_map.jacobian_at(p)
    k = int(np.argmax(np.abs(p)))
    j = int(np.argmax(np.abs(Fp)))
    p = p / p[k]
    Fp = evaluate(poly_map, p)
    J = poly_map.jacobian_at(p)
    # chart coordinates: z_l for l != k, target chart: F_i / F_j for i != j
    cols = [l for l in range(n) if l != k]
    rows = [i for i in range(n) if i != j]
    D = (J[np.ix_(rows, cols)] * Fp[j] - np.outer(Fp[rows], J[j, cols])) / Fp[j] ** 2
    return kernel_dimension(D)


# disc orders


def _jet_inverse(a: JetSeries) -> JetSeries:
    c = a.coeffs
    if c[0] == 0:
        raise ZeroDivisionError("series not invertible")
    out = np.zeros_like(c)
    out[0] = 1 / c[0]
    for k in range(1, c.size):
        out[k] = -np.dot(c[1: k + 1], out[k - 1:: -1][:k]) / c[0]
    return JetSeries(out)


@dataclass(frozen=True)
class DiscOrder:
    order: float
    projective_order: float
    truncation: int


def disc_order_verify(poly_map: PolyMap, disc, K: int | None = None) -> DiscOrder:
    """Order at 0 of ``F o psi - F(psi(0))`` for a nonsingular disc given by its jets."""
    disc = tuple(disc)
    K = default_jet_order(poly_map) if K is None else K
    if np.linalg.norm(jet_values(disc, 1)) < 1e-12:
        raise HypothesisError("disc is singular: psi'(0) = 0")
    f = compose_jet(poly_map, disc, K)
    aff = vanishing_order(tuple(JetSeries(c.coeffs - np.eye(1, K + 1, 0)[0] * c.coeffs[0]) for c in f))
    f0 = jet_values(f, 0)
    j = int(np.argmax(np.abs(f0)))
    if abs(f0[j]) == 0:
        return DiscOrder(aff, math.nan, K)
    inv = _jet_inverse(f[j])
    ratios = tuple(f[i] * inv for i in range(poly_map.n) if i != j)
    proj = vanishing_order(tuple(JetSeries(r.coeffs - np.eye(1, K + 1, 0)[0] * r.coeffs[0]) for r in ratios)) if ratios else math.inf
    return DiscOrder(aff, proj, K)


@dataclass(frozen=True)
class DiscSearchResult:
    point: np.ndarray
    order: float
    witness: tuple
    complete: bool
    kernel_dim: int
    depth: int
    residuals: tuple = field(default=(), repr=False)

    def witness_json(self) -> dict:
        return {
            "point": [[float(x.real), float(x.imag)] for x in self.point],
            "jet": [[[float(c.real), float(c.imag)] for c in j.coeffs] for j in self.witness],
            "order": None if math.isinf(self.order) else int(self.order),
            "complete": self.complete,
        }


def disc_order_search(poly_map: PolyMap, p, K: int | None = None) -> DiscSearchResult:
    """Largest order of ``F o psi - F(p)`` over nonsingular discs through ``p``, up to depth ``K``.

    The disc is ``p + v0 zeta + sum a_k zeta^k`` with ``v0`` spanning ``ker J(p)``.
    Killing the ``zeta^k`` coefficient means ``J(p) a_k = -b_k``, where ``b_k`` is
    that coefficient for ``a_k = 0``.  The kernel component of ``a_k`` only
    reparametrizes the disc, so ``a_k`` is taken orthogonal to ``v0`` and no
    branching is needed.  The order is the first ``k`` whose ``b_k`` is not in
    the range of ``J(p)``; reaching ``K`` leaves the search incomplete.
    """
    p = np.asarray(p, dtype=complex)
    n = poly_map.n
    K = default_jet_order(poly_map) if K is None else K
    if K < 1:
        raise ValueError("depth must be at least 1")
    J = poly_map.jacobian_at(p)
    U, s, Vh = np.linalg.svd(J)
    kdim = kernel_dimension(J)
    coeffs = np.zeros((n, K + 1), dtype=complex)
    coeffs[:, 0] = p
    if kdim == 0 or np.linalg.norm(p) == 0:
        # at the origin every nonsingular disc has order d; elsewhere J(p) is injective
        v = Vh[0].conj() if kdim == 0 else np.eye(n)[0]
        coeffs[:, 1] = v
        disc = tuple(JetSeries(c) for c in coeffs)
        order = disc_order_verify(poly_map, disc, K).order
        return DiscSearchResult(p, order, disc, not math.isinf(order), kdim, K)
    if kdim >= 2:
        raise HypothesisError(f"kernel of J(p) has dimension {kdim}; the search needs a one-dimensional kernel")
    v0 = Vh[-1].conj()
    coeffs[:, 1] = v0
    rank_tol = KERNEL_RTOL * s[0]
    r = int(np.sum(s > rank_tol))
    Ur, sr, Vr = U[:, :r], s[:r], Vh[:r].conj().T
    residuals = []
    for k in range(2, K + 1):
        disc = tuple(JetSeries(c) for c in coeffs[:, : k + 1])
        b = jet_values(compose_jet(poly_map, disc, k), k)
        bn = float(np.linalg.norm(b))
        scale = max(1.0, float(np.max(np.abs(coeffs))), float(np.linalg.norm(evaluate(poly_map, p))))
        if bn <= 1e-13 * scale:
            continue
        y = Ur.conj().T @ b
        out_of_range = float(np.linalg.norm(b - Ur @ y))
        residuals.append(out_of_range / bn)
        if out_of_range > RANGE_RTOL * bn:
            disc = tuple(JetSeries(c) for c in coeffs)
            return DiscSearchResult(p, k, disc, True, kdim, K, tuple(residuals))
        coeffs[:, k] = -(Vr @ (y / sr))
    disc = tuple(JetSeries(c) for c in coeffs)
    return DiscSearchResult(p, math.inf, disc, False, kdim, K, tuple(residuals))


# invariants


@dataclass(frozen=True)
class TInvariant:
    t: int
    mode: str
    complete: bool
    per_point: tuple
    locus_samples: int

    @property
    def best(self) -> DiscSearchResult | None:
        done = [r for r in self.per_point if not math.isinf(r.order)]
        return max(done, key=lambda r: r.order) if done else None


def t_invariant(
    poly_map: PolyMap,
    K: int | None = None,
    samples: int = 200,
    special_points=(),
    seed: int = 0,
    include_singular: bool = True,
) -> TInvariant:
    """Maximal disc order over sampled critical points, supplied points and locus singular points.

    The search at each point is exhaustive up to depth ``K``; the choice of
    points is heuristic.  Points where the search reaches ``K`` make the result
    incomplete and their order is reported as at least ``K + 1``.
    """
    n = poly_map.n
    d = poly_map.homogeneous_degree or poly_map.infer_homogeneous_degree()
    if d is None:
        raise HypothesisError("map must be homogeneous")
    K = default_jet_order(poly_map) if K is None else K
    rng = np.random.default_rng(seed)
    points = [np.asarray(q, dtype=complex) for q in special_points]
    locus = []
    if n >= 2 and samples:
        for z in sphere_samples(n, samples, rng):
            w, ok = project_to_locus(poly_map, z)
            if ok:
                locus.append(w)
    if include_singular and locus:
        points += locus_singular_points(poly_map, locus[: min(len(locus), 12)])
    results = []
    for q in points + locus:
        if kernel_dimension(poly_map.jacobian_at(q)) == 0:
            continue
        results.append(disc_order_search(poly_map, q, K))
    complete = all(r.complete for r in results)
    orders = [K + 1 if math.isinf(r.order) else int(r.order) for r in results]
    t = max([1] + orders)
    if n == 2 and complete and t > d:
        raise AssertionError(f"computed t = {t} exceeds the degree {d} for a map of the projective line")
    mode = f"searched-to-depth-K={K}" + ("" if complete else ";search incomplete")
    return TInvariant(t, mode, complete, tuple(results), len(locus))


def sharp_order(poly_map: PolyMap, t: int, certificate: KernelCertificate | None = None) -> tuple[Fraction, int]:
    """``s = 1 / (2 max(d, t))`` and the type ``2 max(d, t)``."""
    if certificate is not None and not certificate.passed:
        raise HypothesisError(
            f"kernel certificate failed (dimension {certificate.max_kernel_dim} found); the sharp-order formula does not apply"
        )
    d = poly_map.homogeneous_degree or poly_map.infer_homogeneous_degree()
    if d is None:
        raise HypothesisError("map must be homogeneous")
    if t < 1:
        raise ValueError("t is at least 1")
    T = 2 * max(d, int(t))
    return Fraction(1, T), T


def hp_flatness(poly_map: PolyMap, p, K: int | None = None) -> float:
    """``2 * (best disc order at p) - 2``; ``inf`` when the search is incomplete."""
    p = np.asarray(p, dtype=complex)
    d = poly_map.homogeneous_degree or poly_map.infer_homogeneous_degree()
    if np.linalg.norm(p) == 0:
        if d is None:
            raise HypothesisError("flatness at the origin needs a homogeneous map")
        return 2 * d - 2
    res = disc_order_search(poly_map, p, K)
    return math.inf if math.isinf(res.order) else 2 * int(res.order) - 2


@dataclass(frozen=True)
class TypeReport:
    d: int
    t: int
    t_mode: str
    s: Fraction
    T1: int
    kernel_max_dim: int
    witnesses: tuple
    complete: bool
    isolated_zero_min: float

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "t": self.t,
            "t_mode": self.t_mode,
            "s_num": self.s.numerator,
            "s_den": self.s.denominator,
            "T1": self.T1,
            "kernel_max_dim": self.kernel_max_dim,
            "complete": self.complete,
            "isolated_zero_min": self.isolated_zero_min,
            "witnesses": list(self.witnesses),
        }


def type_report(
    poly_map: PolyMap,
    K: int | None = None,
    witness_discs=(),
    special_points=(),
    samples: int = 200,
    kernel_samples: int = 1000,
    seed: int = 0,
) -> TypeReport:
    """Isolated-zero check, kernel certificate, disc search and the sharp order."""
    from .polyalg import check_isolated_zero

    d = poly_map.homogeneous_degree or poly_map.infer_homogeneous_degree()
    if d is None:
        raise HypothesisError("map must be homogeneous")
    iz = check_isolated_zero(poly_map, seed=seed)
    if not iz.passed:
        raise HypothesisError(f"F has a zero on the unit sphere (min |F| = {iz.min_abs:.3e})")
    cert = critical_kernel_certificate(poly_map, kernel_samples, seed)
    if not cert.passed:
        raise HypothesisError(f"kernel of J has dimension {cert.max_kernel_dim} on the critical locus")
    pts = [np.asarray(q, dtype=complex) for q in special_points]
    pts += [jet_values(w, 0) for w in witness_discs]
    ti = t_invariant(poly_map, K, samples, pts, seed)
    witnesses = []
    verified = []
    for disc in witness_discs:
        o = disc_order_verify(poly_map, disc, ti.per_point[0].depth if ti.per_point else K)
        verified.append(o.order)
        witnesses.append({
            "point": [[float(x.real), float(x.imag)] for x in jet_values(disc, 0)],
            "jet": [[[float(c.real), float(c.imag)] for c in j.coeffs] for j in disc],
            "order": None if math.isinf(o.order) else int(o.order),
            "source": "supplied",
        })
    best = ti.best
    if best is not None and not witness_discs:
        witnesses.append({**best.witness_json(), "source": "search"})
    t = ti.t
    mode = ti.mode
    if witness_discs:
        vmax = max(int(o) for o in verified if not math.isinf(o))
        if vmax == t:
            mode = "verified-by-supplied-discs;" + mode
    s, T = sharp_order(poly_map, t, cert)
    return TypeReport(d, t, mode, s, T, cert.max_kernel_dim, tuple(witnesses), ti.complete, iz.min_abs)
