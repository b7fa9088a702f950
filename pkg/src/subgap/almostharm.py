"""Newtonian potentials, holomorphic completion of nearly harmonic functions, and contact disc families."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.signal import fftconvolve

from .gaplab import DiscGrid, discrete_laplacian, loglog_slope
from .polyalg import JetSeries, PolyMap, compose_jet, jet_values

DEFAULT_FIT_DEGREE = 30
DEFAULT_T_EXPONENTS = (2, 3, 4, 5, 6)


class CurvatureError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class PlanarField:
    """Samples of a function on the active points of a disc grid."""

    grid: DiscGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.count,):
            raise ValueError("field samples must match the active grid points")
        if not np.all(np.isfinite(v)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: DiscGrid, f) -> "PlanarField":
        return cls(grid, np.asarray(f(grid.points)) * np.ones(grid.count))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _log_cell_antiderivative(x, y):
    """``F`` with ``d^2 F / dx dy = log sqrt(x^2 + y^2)``."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0, 0.5 * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        ax = np.where(x != 0, np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        ay = np.where(y != 0, np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return x * y * lg - 1.5 * x * y + 0.5 * (x * x * ax + y * y * ay)


def log_cell_integrals(N: int, h: float, unit: float = 1.0) -> np.ndarray:
    """``(1/2pi) int_cell log(|x| / unit)`` over the ``h``-cells at offsets ``-(N-1)..(N-1)``.

    With ``unit = 1`` the centre entry is the exact self-cell value
    ``h^2 (log(h/2) + (log 2 - 3 + pi/2) / 2) / (2 pi)``.
    """
    k = np.arange(-(N - 1), N, dtype=float)
    # integrate in units of h, then rescale: int log|h s| h^2 ds = h^2 (log h * 1 + int log|s|)
    e = np.concatenate([k - 0.5, [k[-1] + 0.5]])
    X, Y = np.meshgrid(e, e, indexing="ij")
    F = _log_cell_antiderivative(X, Y)
    cells = F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
    return h * h * (cells + math.log(h / unit)) / (2 * math.pi)


def newtonian_potential(b: PlanarField, unit: float = 1.0) -> PlanarField:
    """``b * Gamma`` with ``Gamma = log(|z| / unit) / (2 pi)``, ``b`` piecewise constant on the grid cells.

    Every cell is integrated against the kernel exactly; the sum over cells is
    evaluated by FFT convolution.  ``unit`` only shifts the result by the
    constant ``-log(unit) int b / (2 pi)``.
    """
    g = b.grid
    full = np.zeros((g.N, g.N))
    full[g.mask] = np.real(b.values)
    if not np.any(full):
        return PlanarField(g, np.zeros(g.count))
    ker = log_cell_integrals(g.N, g.h, unit)
    conv = fftconvolve(full, ker, mode="full")[g.N - 1: 2 * g.N - 1, g.N - 1: 2 * g.N - 1]
    return PlanarField(g, conv[g.mask])


def filled_laplacian(field: PlanarField) -> np.ndarray:
    """Five-point Laplacian, copied from the nearest interior point where the stencil leaves the disc."""
    g = field.grid
    lap = discrete_laplacian(g, np.real(field.values))
    bad = ~np.isfinite(lap)
    if not bad.any():
        return lap
    full = np.full((g.N, g.N), np.nan)
    full[g.mask] = lap
    holes = ~np.isfinite(full)
    _, (ii, jj) = distance_transform_edt(holes, return_indices=True)
    return full[ii, jj][g.mask]


@dataclass(frozen=True)
class Completion:
    G_coeffs: np.ndarray
    center: complex
    radius: float
    deviation: float
    harmonic_residual: float
    curvature_constant: float
    gradient_ratio: float
    potential: PlanarField

    def G(self, z) -> np.ndarray:
        u = (np.asarray(z, dtype=complex) - self.center) / self.radius
        return np.polyval(self.G_coeffs[::-1], u)

    def dG(self, z) -> np.ndarray:
        u = (np.asarray(z, dtype=complex) - self.center) / self.radius
        k = np.arange(1, self.G_coeffs.size)
        return np.polyval((k * self.G_coeffs[1:])[::-1], u) / self.radius


def _harmonic_fit(grid: DiscGrid, values: np.ndarray, degree: int) -> tuple[np.ndarray, float]:
    u = grid.unit_points
    P = np.stack([u**k for k in range(degree + 1)], axis=1)
    # Re(sum a_k u^k) = sum Re(a_k) Re(u^k) - Im(a_k) Im(u^k); Im(a_0) is fixed to 0
    A = np.concatenate([P.real, -P.imag[:, 1:]], axis=1)
    sol, *_ = np.linalg.lstsq(A, values, rcond=None)
    coeffs = sol[: degree + 1] + 1j * np.concatenate([[0.0], sol[degree + 1:]])
    resid = float(np.max(np.abs(A @ sol - values)))
    return coeffs, resid


def circle_points(center: complex, radius: float, count: int = 512) -> np.ndarray:
    return center + radius * np.exp(2j * np.pi * np.arange(count) / count)


def holomorphic_completion(phi: PlanarField, C_bound: float, laplacian=None, degree: int = DEFAULT_FIT_DEGREE) -> Completion:
    """Holomorphic ``G`` on the grid disc with ``phi - Re G`` controlled by the curvature bound.

    ``phi - (Delta phi) * Gamma`` is harmonic; its harmonic extension is fitted by
    ``Re`` of a polynomial of the given degree in ``(z - center) / radius``.
    ``laplacian`` supplies exact Laplacian samples; otherwise the five-point
    stencil is used.  The potential uses ``log(|z| / r)`` so that the
    construction commutes with rescaling the disc.  ``Im G(center) = 0``.
    """
    g = phi.grid
    vals = np.real(phi.values)
    lap = filled_laplacian(phi) if laplacian is None else np.asarray(laplacian, dtype=float) * np.ones(g.count)
    bound = C_bound / g.radius**2
    over = np.abs(lap) > bound * (1 + 1e-9) + 1e-300
    if np.any(over):
        k = int(np.argmax(np.abs(lap)))
        raise CurvatureError(f"|Laplacian| reaches {abs(lap[k]):.4g} > C r^-2 = {bound:.4g}", complex(g.points[k]))
    pot = newtonian_potential(PlanarField(g, lap), g.radius)
    coeffs, resid = _harmonic_fit(g, vals - pot.values, degree)
    comp = Completion(coeffs, g.center, g.radius, 0.0, resid, float(C_bound), 0.0, pot)
    dev = float(np.max(np.abs(vals - np.real(comp.G(g.points)))))
    half = circle_points(g.center, 0.5 * g.radius)
    grad = g.radius * float(np.max(np.abs(comp.dG(half))))
    denom = float(np.max(np.abs(vals))) + C_bound
    ratio = grad / denom if denom > 0 else 0.0
    return Completion(coeffs, g.center, g.radius, dev, resid, float(C_bound), ratio, pot)


def gradient_estimate_check(coeffs, r: float, N: int = 256, center: complex = 0.0) -> float:
    """``r^2 sup_{D(z, r/2)} |F'| / ||Re F||_{L^2(D(z, r))}`` for a polynomial ``F``.

    The sup is taken on the circle of radius ``r/2`` (maximum principle), the
    ``L^2`` norm by midpoint quadrature.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.size <= 1 or not np.any(c[1:]):
        return 0.0
    dc = np.arange(1, c.size) * c[1:]
    grid = DiscGrid(center, r, N)
    w = grid.points - center
    re = np.real(np.polyval(c[::-1], w))
    l2 = math.sqrt(float(np.sum(re * re)) * grid.h**2)
    sup = float(np.max(np.abs(np.polyval(dc[::-1], circle_points(0.0, 0.5 * r, 1024)))))
    return r * r * sup / l2


def random_holomorphic(rng: np.random.Generator, degree: int) -> np.ndarray:
    return (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)) / np.sqrt(np.arange(1, degree + 2))


# contact families


def _poly_jets(poly_map: PolyMap, disc, p) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact coefficients of ``F o psi - F(p)`` (full degree) and ``F(p)``."""
    top = poly_map.degree() * max(j.order for j in disc)
    disc = tuple(JetSeries(np.pad(j.coeffs, (0, top - j.order))) for j in disc)
    f = compose_jet(poly_map, disc, top)
    Fp = jet_values(f, 0)
    gs = [np.concatenate([[0.0], c.coeffs[1:]]) for c in f]
    return gs, Fp


@dataclass(frozen=True)
class DiscFamily:
    ts: tuple
    residuals: tuple
    exponent: float
    fit_residual: float
    m: int
    sup_derivative: float
    min_derivative_at_0: float
    center_distances: tuple
    deviations: tuple

    def rows(self):
        for t, r in zip(self.ts, self.residuals):
            yield {"t": t, "max_contact_residual": r}

    def summary(self) -> dict:
        return {
            "m": self.m,
            "target": self.m + 2,
            "exponent": self.exponent,
            "fit_residual": self.fit_residual,
            "sup_derivative": self.sup_derivative,
            "min_derivative_at_0": self.min_derivative_at_0,
            "max_center_distance": max(self.center_distances),
        }


def build_disc_family(
    poly_map: PolyMap,
    p,
    disc,
    m: int,
    t_values=None,
    N: int = 128,
    degree: int = DEFAULT_FIT_DEGREE,
) -> DiscFamily:
    """Discs ``psi_t(zeta) = (psi(zeta/2), i G_t(zeta/2) + i phi(p))`` and their contact with ``Im w = |F|^2``.

    ``f = |F o psi|^2 - |F(p)|^2`` is split as ``Re(2 <g, F(p)>) + |g|^2`` with
    ``g = F o psi - F(p)``; the first part is already the real part of a
    holomorphic function, so only ``|g|^2`` (Laplacian ``4 |g'|^2``) is
    completed on ``D(0, t)``.  The contact residual ``phi(psi_t) - Im`` of the
    last coordinate is measured on ``D(0, t)`` and its decay exponent in ``t``
    is fitted on a log-log scale.
    """
    p = np.asarray(p, dtype=complex)
    if np.linalg.norm(jet_values(disc, 0) - p) > 1e-12:
        raise ValueError("disc must pass through p")
    gs, Fp = _poly_jets(poly_map, disc, p)
    ts = tuple(2.0**-k for k in DEFAULT_T_EXPONENTS) if t_values is None else tuple(float(t) for t in t_values)
    dgs = [np.arange(1, c.size) * c[1:] for c in gs]
    # holomorphic part 2 <g, F(p)>
    Hc = 2 * sum(np.conj(Fp[l]) * gs[l] for l in range(len(gs)))
    dHc = np.arange(1, Hc.size) * Hc[1:]
    phi_p = float(np.vdot(Fp, Fp).real)
    dpsi = [np.arange(1, j.coeffs.size) * j.coeffs[1:] for j in disc]

    residuals, centers, devs = [], [], []
    sup_der, min_der0 = 0.0, math.inf
    for t in ts:
        grid = DiscGrid(0.0, t, N)
        z = grid.points
        g2 = sum(np.abs(np.polyval(c[::-1], z)) ** 2 for c in gs)
        lap = 4 * sum(np.abs(np.polyval(c[::-1], z)) ** 2 for c in dgs)
        C = float(np.max(lap)) * t * t
        comp = holomorphic_completion(PlanarField(grid, g2), C, lap, degree)
        # zeta in D(0, t) is evaluated at zeta/2, which is the inner half of the grid
        inner = np.abs(z) < 0.5 * t
        res = np.abs(g2 - np.real(comp.G(z)))[inner]
        residuals.append(float(np.max(res)))
        devs.append(comp.deviation)
        # G_t = H + comp.G has Im G_t(0) = 0 because H(0) = 0
        G0 = complex(comp.G(0.0))
        centers.append(abs(G0.real))
        ring = circle_points(0.0, 0.5 * t, 256)
        der_last = 0.5 * np.abs(np.polyval(dHc[::-1], ring) + comp.dG(ring))
        der_psi = 0.5 * np.sqrt(sum(np.abs(np.polyval(c[::-1], ring)) ** 2 for c in dpsi))
        sup_der = max(sup_der, float(np.max(np.hypot(der_last, der_psi))))
        d0 = 0.5 * math.hypot(float(np.linalg.norm([c[0] if c.size else 0 for c in dpsi])), abs(complex(comp.dG(0.0)) + (dHc[0] if dHc.size else 0)))
        min_der0 = min(min_der0, d0)
    logs = np.log(np.asarray(residuals))
    if np.all(np.asarray(residuals) > 0):
        slope, icpt = loglog_slope(ts, residuals)
        fit_res = float(np.max(np.abs(slope * np.log(ts) + icpt - logs)))
    else:
        slope, fit_res = math.inf, 0.0
    return DiscFamily(ts, tuple(residuals), slope, fit_res, int(m), sup_der, min_der0, tuple(centers), tuple(devs))


def planar_contact_exponent(f, laplacian, t_values=None, N: int = 128, degree: int = DEFAULT_FIT_DEGREE) -> tuple[float, tuple]:
    """Decay exponent of ``sup_{D(0,t/2)} |f - Re G_t|`` for a planar function ``f`` with ``f(0) = 0``."""
    ts = tuple(2.0**-k for k in DEFAULT_T_EXPONENTS) if t_values is None else tuple(t_values)
    out = []
    for t in ts:
        grid = DiscGrid(0.0, t, N)
        z = grid.points
        v = np.asarray(f(z), dtype=float) * np.ones(grid.count)
        lap = np.asarray(laplacian(z), dtype=float) * np.ones(grid.count)
        C = max(float(np.max(np.abs(lap))) * t * t, 1e-300)
        comp = holomorphic_completion(PlanarField(grid, v), C, lap, degree)
        out.append(float(np.max(np.abs(v - np.real(comp.G(z)))[np.abs(z) < 0.5 * t])))
    if min(out) <= 0:
        return math.inf, tuple(out)
    return loglog_slope(ts, out)[0], tuple(out)
