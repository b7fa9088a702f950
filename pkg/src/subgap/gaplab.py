"""Discrete weighted dbar quadratic forms on planar discs and their spectral gaps.

The form ``int |dw/dzbar|^2 e^{-2 phi} + int V |w|^2 e^{-2 phi}`` is discretized in
the gauged variable ``u = w e^{-phi}``, where it reads
``int |du/dzbar + u dphi/dzbar|^2 + int V |u|^2`` with mass ``int |u|^2``.
This keeps every matrix entry of moderate size even when ``phi`` grows by
thousands across the disc, which an explicit ``e^{-2 phi}`` weight cannot survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

MIN_ACTIVE = 100
RQ_RTOL = 1e-10
MAX_ITER = 500


class GridError(ValueError):
    pass


class ComparabilityError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GapConvergenceError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class DiscGrid:
    """Cell-centred grid of the square around ``D(center, radius)`` keeping points inside the disc.

    The mask is computed in normalized coordinates, so grids of different radii
    and centres share exactly the same active pattern.
    """

    center: complex
    radius: float
    N: int

    def __post_init__(self):
        if self.radius <= 0 or self.N < 2:
            raise GridError("need positive radius and N >= 2")
        if self.count < MIN_ACTIVE:
            raise GridError(f"only {self.count} active points; at least {MIN_ACTIVE} required")

    @property
    def h(self) -> float:
        return 2.0 * self.radius / self.N

    @property
    def unit_coords(self) -> np.ndarray:
        return -1.0 + (2.0 * np.arange(self.N) + 1.0) / self.N

    @property
    def mask(self) -> np.ndarray:
        t = self.unit_coords
        X, Y = np.meshgrid(t, t, indexing="ij")
        return X * X + Y * Y < 1.0

    @property
    def unit_points(self) -> np.ndarray:
        t = self.unit_coords
        X, Y = np.meshgrid(t, t, indexing="ij")
        m = self.mask
        return X[m] + 1j * Y[m]

    @property
    def points(self) -> np.ndarray:
        return self.center + self.radius * self.unit_points

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def index(self) -> np.ndarray:
        idx = -np.ones((self.N, self.N), dtype=np.int64)
        m = self.mask
        idx[m] = np.arange(int(m.sum()))
        return idx

    def to_json(self) -> dict:
        return {
            "center": [float(np.real(self.center)), float(np.imag(self.center))],
            "radius": float(self.radius),
            "N": int(self.N),
            "h": self.h,
            "active": self.count,
        }


@dataclass(frozen=True)
class FieldSpec:
    """A real weight ``phi`` with optional analytic ``dphi/dzbar`` and Laplacian."""

    value: Callable
    dbar: Callable | None = None
    laplacian: Callable | None = None
    name: str = ""

    def scaled(self, R: float) -> "FieldSpec":
        """The field ``phi_R(z) = phi(z / R)``."""
        v, db, lap = self.value, self.dbar, self.laplacian
        return FieldSpec(
            lambda z: v(z / R),
            None if db is None else (lambda z: db(z / R) / R),
            None if lap is None else (lambda z: lap(z / R) / R**2),
            f"{self.name}_R",
        )

    def plus(self, other: "FieldSpec") -> "FieldSpec":
        def add(f, g):
            if f is None or g is None:
                return None
            return lambda z: f(z) + g(z)

        return FieldSpec(add(self.value, other.value), add(self.dbar, other.dbar),
                         add(self.laplacian, other.laplacian), f"{self.name}+{other.name}")


def zero_field() -> FieldSpec:
    z0 = lambda z: np.zeros(np.shape(z))
    return FieldSpec(z0, lambda z: np.zeros(np.shape(z), dtype=complex), z0, "0")


def power_weight(A: float, d: int) -> FieldSpec:
    """``phi = A^2 |z|^{2d+2}``; ``Delta phi = 4 (d+1)^2 A^2 |z|^{2d}``."""
    return FieldSpec(
        lambda z: A**2 * np.abs(z) ** (2 * d + 2),
        lambda z: A**2 * (d + 1) * np.abs(z) ** (2 * d) * z,
        lambda z: 4 * (d + 1) ** 2 * A**2 * np.abs(z) ** (2 * d),
        f"A^2|z|^{2 * d + 2}",
    )


def real_polynomial_field(c: dict) -> FieldSpec:
    """``phi = sum c[j,k] z^j zbar^k`` for a coefficient dict closed under conjugate transpose."""
    for (j, k), v in c.items():
        if abs(c.get((k, j), 0) - np.conj(v)) > 1e-14 * max(1, abs(v)):
            raise ValueError("coefficients do not define a real function")

    def value(z):
        return np.real(sum(v * z**j * np.conj(z) ** k for (j, k), v in c.items()))

    def dbar(z):
        return sum(v * k * z**j * np.conj(z) ** (k - 1) for (j, k), v in c.items() if k)

    def lap(z):
        return np.real(sum(4 * v * j * k * z ** (j - 1) * np.conj(z) ** (k - 1) for (j, k), v in c.items() if j and k))

    return FieldSpec(value, dbar, lap, "poly")


def random_real_polynomial(rng: np.random.Generator, degree: int = 4, scale: float = 0.3) -> dict:
    c = {}
    for j in range(degree + 1):
        for k in range(j, degree + 1 - j):
            v = scale * (rng.standard_normal() + 1j * rng.standard_normal())
            if j == k:
                v = v.real
            c[(j, k)] = v
            c[(k, j)] = np.conj(v)
    return c


def random_subharmonic_polynomial(rng: np.random.Generator, degree: int = 3, terms: int = 2, scale: float = 0.5) -> dict:
    """Coefficients of ``sum_j |q_j|^2 + Re g`` for random holomorphic ``q_j``, ``g``; its Laplacian is ``4 sum |q_j'|^2``."""
    c: dict = {}

    def add(key, v):
        c[key] = c.get(key, 0) + v

    for _ in range(terms):
        q = scale * (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1))
        for a in range(degree + 1):
            for b in range(degree + 1):
                add((a, b), q[a] * np.conj(q[b]))
    g = scale * (rng.standard_normal(degree + 2) + 1j * rng.standard_normal(degree + 2))
    for a in range(1, degree + 2):
        add((a, 0), g[a] / 2)
        add((0, a), np.conj(g[a]) / 2)
    return c


def difference_operators(grid: DiscGrid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Centred differences in x and y, one-sided where a neighbour is missing, zero if both are."""
    N, h = grid.N, grid.h
    idx = grid.index
    mats = []
    for axis in (0, 1):
        rows, cols, vals = [], [], []
        for i, j in zip(*np.nonzero(idx >= 0)):
            me = idx[i, j]
            if axis == 0:
                fwd = idx[i + 1, j] if i + 1 < N else -1
                bwd = idx[i - 1, j] if i > 0 else -1
            else:
                fwd = idx[i, j + 1] if j + 1 < N else -1
                bwd = idx[i, j - 1] if j > 0 else -1
            if fwd >= 0 and bwd >= 0:
                rows += [me, me]
                cols += [fwd, bwd]
                vals += [0.5 / h, -0.5 / h]
            elif fwd >= 0:
                rows += [me, me]
                cols += [fwd, me]
                vals += [1.0 / h, -1.0 / h]
            elif bwd >= 0:
                rows += [me, me]
                cols += [me, bwd]
                vals += [1.0 / h, -1.0 / h]
        n = grid.count
        mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
    return mats[0], mats[1]


def dbar_operator(grid: DiscGrid) -> sp.csr_matrix:
    Dx, Dy = difference_operators(grid)
    return (0.5 * (Dx + 1j * Dy)).tocsr()


def _field_values(f, pts, dtype=float):
    if f is None:
        return None
    if callable(f):
        return np.asarray(f(pts), dtype=dtype) * np.ones(pts.shape, dtype=dtype)
    arr = np.asarray(f, dtype=dtype)
    if arr.ndim == 0:
        return np.full(pts.shape, arr, dtype=dtype)
    if arr.shape != pts.shape:
        raise ValueError("field samples must match the active grid points")
    return arr


@dataclass(frozen=True)
class WeightedFormAssembly:
    """Energy and mass of the weighted form in the gauged variable ``u = w e^{-phi}``.

    ``energy_matrix`` and ``mass_matrix`` act on ``u``; :meth:`energy` and
    :meth:`mass` take the original ``w``.
    """

    grid: DiscGrid
    phi: np.ndarray
    V: np.ndarray
    dbar_phi: np.ndarray
    twisted_dbar: sp.csr_matrix = field(repr=False)

    @property
    def h2(self) -> float:
        return self.grid.h**2

    @property
    def energy_matrix(self) -> sp.csr_matrix:
        T = self.twisted_dbar
        return ((T.conj().T @ T) * self.h2 + sp.diags(self.V * self.h2)).tocsr()

    @property
    def mass_matrix(self) -> sp.dia_matrix:
        return sp.diags(np.full(self.grid.count, self.h2))

    def gauge(self, w) -> np.ndarray:
        return np.asarray(w, dtype=complex) * np.exp(-self.phi)

    def energy_u(self, u) -> float:
        u = np.asarray(u, dtype=complex)
        Tu = self.twisted_dbar @ u
        return float((np.vdot(Tu, Tu).real + np.sum(self.V * np.abs(u) ** 2)) * self.h2)

    def mass_u(self, u) -> float:
        u = np.asarray(u, dtype=complex)
        return float(np.vdot(u, u).real * self.h2)

    def energy(self, w) -> float:
        return self.energy_u(self.gauge(w))

    def mass(self, w) -> float:
        return self.mass_u(self.gauge(w))

    def rayleigh(self, w) -> float:
        return self.energy(w) / self.mass(w)


def assemble(grid: DiscGrid, phi: FieldSpec | np.ndarray | float | None = None, V=None) -> WeightedFormAssembly:
    """Assemble the weighted form on ``grid``.

    ``phi`` is a :class:`FieldSpec` (the analytic ``dphi/dzbar`` is used when
    given, otherwise the discrete one), an array of samples, or ``None`` for 0.
    ``V`` is a callable, an array of samples or a constant; it must be >= 0.
    """
    pts = grid.points
    D = dbar_operator(grid)
    if phi is None:
        phi = zero_field()
    if isinstance(phi, FieldSpec):
        pv = _field_values(phi.value, pts)
        db = _field_values(phi.dbar, pts, complex) if phi.dbar is not None else D @ pv.astype(complex)
    else:
        pv = _field_values(phi, pts)
        db = D @ pv.astype(complex)
    Vv = _field_values(0.0 if V is None else V, pts)
    if not (np.all(np.isfinite(pv)) and np.all(np.isfinite(db)) and np.all(np.isfinite(Vv))):
        raise ValueError("fields must be finite on the active points")
    if np.any(Vv < 0):
        raise ValueError("potential V must be nonnegative")
    T = (D + sp.diags(db)).tocsr()
    return WeightedFormAssembly(grid, pv, Vv, db, T)


@dataclass(frozen=True)
class GapResult:
    gap: float
    minimizer_u: np.ndarray
    iterations: int
    params: dict = field(default_factory=dict)

    def minimizer(self, assembly: WeightedFormAssembly) -> np.ndarray:
        """The minimizer in the original variable ``w = u e^{phi}`` (may overflow for steep weights)."""
        return self.minimizer_u * np.exp(assembly.phi)


def _start_block(grid: DiscGrid, k: int) -> np.ndarray:
    z = grid.unit_points
    cols = [np.ones_like(z), z, np.conj(z), np.abs(z) ** 2, z**2, np.conj(z) ** 2]
    return np.column_stack(cols[:k]).astype(complex)


def min_gap(assembly: WeightedFormAssembly, block: int = 6, tol: float = RQ_RTOL, max_iter: int = MAX_ITER) -> GapResult:
    """Smallest eigenvalue of the pencil (energy, mass) by block shift-invert iteration.

    The iteration starts from the all-ones vector plus a few low-order
    monomials, uses Rayleigh-Ritz on the block, and stops when the smallest Ritz
    value changes by less than ``tol`` relative between two sweeps.
    """
    E = assembly.energy_matrix / assembly.h2
    n = E.shape[0]
    scale = float(abs(E).sum(axis=1).max())
    # a tiny positive shift keeps the factorization regular when constants are in the kernel
    shift = 1e-8 / assembly.grid.h**2
    lu = spla.splu((E + shift * sp.identity(n, format="csc")).tocsc())
    X, _ = np.linalg.qr(_start_block(assembly.grid, min(block, n)))
    prev = math.inf
    theta = None
    for it in range(1, max_iter + 1):
        Y = lu.solve(X)
        Q, _ = np.linalg.qr(Y)
        Hs = Q.conj().T @ (E @ Q)
        Hs = 0.5 * (Hs + Hs.conj().T)
        vals, vecs = np.linalg.eigh(Hs)
        X = Q @ vecs
        theta = float(vals[0])
        if abs(theta - prev) <= tol * abs(theta) + 1e-15 * scale:
            u = X[:, 0]
            return GapResult(max(theta, 0.0) if theta > -1e-10 else theta, u, it,
                             {"grid": assembly.grid.to_json(), "shift": shift})
        prev = theta
    raise GapConvergenceError("gap iteration did not converge", theta)


def scaling_check(phi: FieldSpec, w: Callable, R: float, N: int = 128, radius: float = 1.0, center: complex = 0.0) -> float:
    """Relative defect of ``E^phi(w) = R^2 E^{phi_R}(Dil_R w)`` on matched grids.

    ``E^phi(w) = int |dbar w|^2 e^{-2 phi} + int (Delta phi / 2) |w|^2 e^{-2 phi}``
    and ``Dil_R w(z) = w(z / R) / R``.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if phi.laplacian is None:
        raise ValueError("scaling check needs the analytic Laplacian of phi")
    g1 = DiscGrid(center, radius, N)
    g2 = DiscGrid(R * center, R * radius, N)
    a1 = assemble(g1, phi, lambda z: 0.5 * phi.laplacian(z))
    phiR = phi.scaled(R)
    a2 = assemble(g2, phiR, lambda z: 0.5 * phiR.laplacian(z))
    lhs = a1.energy(w(g1.points))
    rhs = R**2 * a2.energy(w(g2.points / R) / R)
    return abs(lhs - rhs) / abs(lhs)


def annulus_potential(c: float, r: float):
    return lambda z: np.where(np.abs(z) >= r / 2, c, 0.0)


def basic_gap(c: float, r: float, N: int) -> GapResult:
    """Gap of the flat form with ``V = c`` on the outer annulus of ``D(0, r)``."""
    grid = DiscGrid(0.0, r, N)
    return min_gap(assemble(grid, None, annulus_potential(c, r)))


@dataclass(frozen=True)
class SharpnessResult:
    d: int
    A_values: tuple
    N: int
    gaps: tuple
    slope: float
    intercept: float

    def rows(self):
        for A, g in zip(self.A_values, self.gaps):
            yield {"d": self.d, "A": A, "N": self.N, "gap": g, "ratio": g / A ** (2 / (self.d + 1)), "slope_fit": self.slope}


def loglog_slope(x, y) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def sharpness_scan(d: int, A_values, N: int = 256, radius: float = 1.0, saturation: float | None = 0.25) -> SharpnessResult:
    """Gaps for ``phi = A^2 |z|^{2d+2}``, ``V = Delta phi`` and the log-log slope in ``A``.

    A gap above ``saturation / h^2`` means the minimizer lives at the grid scale
    and the fit would measure the grid, not the form; ``saturation=None``
    disables the check (``gap * h^2`` is still available from the result).
    """
    A_values = tuple(float(a) for a in A_values)
    if len(A_values) < 4:
        raise ValueError("at least four A values required")
    grid = DiscGrid(0.0, radius, N)
    gaps = []
    for A in A_values:
        phi = power_weight(A, d)
        res = min_gap(assemble(grid, phi, phi.laplacian))
        if saturation is not None and res.gap * grid.h**2 > saturation:
            raise GridError(f"gap {res.gap:.3g} at A={A:.3g} saturates the grid; use smaller A or larger N")
        gaps.append(res.gap)
    slope, intercept = loglog_slope(A_values, gaps)
    return SharpnessResult(d, A_values, N, tuple(gaps), slope, intercept)


def discrete_laplacian(grid: DiscGrid, values) -> np.ndarray:
    """Five-point Laplacian on the active points; NaN where a neighbour is missing."""
    idx = grid.index
    v = np.asarray(values)
    full = np.full((grid.N, grid.N), np.nan, dtype=v.dtype if np.iscomplexobj(v) else float)
    full[idx >= 0] = v
    lap = np.full_like(full, np.nan)
    lap[1:-1, 1:-1] = (full[2:, 1:-1] + full[:-2, 1:-1] + full[1:-1, 2:] + full[1:-1, :-2] - 4 * full[1:-1, 1:-1]) / grid.h**2
    return lap[idx >= 0]


@dataclass(frozen=True)
class GeneralGapReport:
    result: GapResult
    A: float
    degree: int
    ratio: float
    kappa: float
    passed: bool


def gap_1d_general(coeffs, B: float, phi, N: int = 128, kappa: float = 0.01, laplacian=None) -> GeneralGapReport:
    """Gap of ``int |dbar w|^2 e^{-2phi} + int |P|^2 |w|^2 e^{-2phi}`` on the unit disc.

    ``phi`` must satisfy ``|P|^2 / B <= Delta phi <= B |P|^2`` on the grid; the
    Laplacian is taken from ``laplacian`` samples, else the analytic one in
    ``phi``, else the five-point stencil (interior points only).
    """
    from .rootgeom import ROOT_DISC_RADIUS, polynomial_roots

    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if c.size == 0:
        raise ValueError("zero polynomial")
    d = c.size - 1
    if d:
        roots, _ = polynomial_roots(c)
        if np.any(np.abs(roots) >= ROOT_DISC_RADIUS):
            raise ValueError("roots must lie in D(0, 1/2)")
    A = float(abs(c[-1]))
    grid = DiscGrid(0.0, 1.0, N)
    pts = grid.points
    P2 = np.abs(np.polyval(c[::-1], pts)) ** 2
    if laplacian is not None:
        lap = np.asarray(laplacian, dtype=float)
    elif isinstance(phi, FieldSpec) and phi.laplacian is not None:
        lap = _field_values(phi.laplacian, pts)
    else:
        vals = _field_values(phi.value if isinstance(phi, FieldSpec) else phi, pts)
        lap = discrete_laplacian(grid, vals)
    ok = np.isfinite(lap)
    bad = ok & ((lap < P2 / B * (1 - 1e-9)) | (lap > B * P2 * (1 + 1e-9)))
    if np.any(bad):
        k = int(np.nonzero(bad)[0][0])
        raise ComparabilityError("Laplacian of phi not comparable to |P|^2", complex(pts[k]))
    res = min_gap(assemble(grid, phi, P2))
    ratio = res.gap / A ** (2.0 / (d + 1))
    return GeneralGapReport(res, A, d, ratio, kappa, ratio >= kappa)


def annulus_norm_check(coeffs, N: int = 256) -> float:
    """Grid ratio of ``int_D |h|^2`` to the integral over the annulus ``1/2 <= |z| < 1``."""
    grid = DiscGrid(0.0, 1.0, N)
    z = grid.points
    v = np.abs(np.polyval(np.asarray(coeffs, dtype=complex)[::-1], z)) ** 2
    return float(v.sum() / v[np.abs(z) >= 0.5].sum())
