"""Greedy clustering of finite metric spaces and root-cluster covers of polynomials.

The cover built by :func:`sublevel_decomposition` selects a subset of the roots of
a one-variable polynomial ``P`` of degree ``d`` with leading modulus ``A``, plus
radii, such that (1) every radius is at most ``K1 * A**(-1/(d+1))``, (2) ``|P|`` is
at most ``K2 / r`` on ``D(zeta, 4r)`` and (3) ``|P|`` is at least
``A**(1/(d+1)) / K3`` off the union of the discs ``D(zeta, 2r)``.  The constants
are measured by :func:`verify_sublevel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRIANGLE_SLACK = 1e-12
ROOT_MERGE_TOL = 1e-7
ROOT_DISC_RADIUS = 0.5
MAX_WEIERSTRASS_DOUBLINGS = 200


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Points with a distance matrix, validated on construction."""

    dist: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise ValueError("distance matrix must be square and nonempty")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("distances must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have zero diagonal")
        if not np.allclose(d, d.T, rtol=0, atol=TRIANGLE_SLACK * max(1.0, d.max())):
            raise ValueError("distance matrix must be symmetric")
        scale = TRIANGLE_SLACK * max(1.0, d.max())
        # d[i,k] <= d[i,j] + d[j,k] for all i, j, k
        viol = d[:, None, :] - d[:, :, None] - d[None, :, :]
        if viol.max() > scale:
            i, j, k = np.unravel_index(int(np.argmax(viol)), viol.shape)
            raise ValueError(f"triangle inequality fails for points {i}, {k} via {j}")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        labels = tuple(self.labels) if self.labels else tuple(range(d.shape[0]))
        if len(labels) != d.shape[0]:
            raise ValueError("one label per point required")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @classmethod
    def from_points(cls, points, labels=()) -> "FiniteMetricSpace":
        """Euclidean (complex-modulus) distances between planar or complex points."""
        z = np.asarray(points)
        if np.iscomplexobj(z) or z.ndim == 1:
            z = np.asarray(z, dtype=complex).ravel()
            dist = np.abs(z[:, None] - z[None, :])
        else:
            dist = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=-1)
        return cls(dist, labels)


@dataclass(frozen=True)
class ClusterCover:
    """Centers (point indices), their radii, the scale L and the covering map."""

    centers: tuple[int, ...]
    radii: dict
    scale: float
    assignment: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "centers": list(self.centers),
            "radii": [float(self.radii[s]) for s in self.centers],
            "scale": float(self.scale),
            "assignment": list(self.assignment),
        }


def choose_radius(space: FiniteMetricSpace, x: int, L: float) -> float:
    """Smallest ``r`` in ``{L, 4L, ..., 4**(N-1) L}`` with no point at distance in ``(r, 4r]``."""
    if not L > 0:
        raise ValueError("L must be positive")
    row = space.dist[x]
    for k in range(space.size):
        r = L * 4.0**k
        if not np.any((row > r) & (row <= 4 * r)):
            return r
    # unreachable: N-1 other points cannot meet N disjoint annuli
    raise AssertionError("pigeonhole bound violated")


def greedy_cluster(space: FiniteMetricSpace, L: float) -> ClusterCover:
    """Greedy cover: take a remaining point of largest radius (lowest index on ties), drop its ball."""
    radii_all = [choose_radius(space, x, L) for x in range(space.size)]
    remaining = list(range(space.size))
    centers: list[int] = []
    while remaining:
        s = max(remaining, key=lambda i: (radii_all[i], -i))
        centers.append(s)
        remaining = [y for y in remaining if space.dist[y, s] > radii_all[s]]
    radii = {s: radii_all[s] for s in centers}
    assignment = []
    for x in range(space.size):
        owners = [s for s in centers if space.dist[x, s] <= radii[s]]
        assignment.append(owners[0])
    return ClusterCover(tuple(centers), radii, float(L), tuple(assignment))


def check_cover(space: FiniteMetricSpace, cover: ClusterCover) -> list[str]:
    """Exhaustive check of the three cover properties; returns the list of violations."""
    bad = []
    N, L = space.size, cover.scale
    for s in cover.centers:
        r = cover.radii[s]
        if not (L <= r <= 4.0 ** (N - 1) * L):
            bad.append(f"radius bound fails at {s}")
    for i, s in enumerate(cover.centers):
        for t in cover.centers[i + 1:]:
            if not space.dist[s, t] > 2 * cover.radii[s] + 2 * cover.radii[t]:
                bad.append(f"separation fails for {s}, {t}")
    for x in range(N):
        owners = [s for s in cover.centers if space.dist[x, s] <= cover.radii[s]]
        if len(owners) != 1:
            bad.append(f"point {x} covered {len(owners)} times")
    return bad


@dataclass(frozen=True)
class RootClusterCover:
    """Selected roots with radii for a polynomial given by its coefficients."""

    coeffs: np.ndarray
    roots: np.ndarray
    multiplicities: tuple[int, ...]
    selected: np.ndarray
    radii: np.ndarray
    leading_modulus: float
    degree: int
    weierstrass_factors: tuple = field(default=(), compare=False)

    @property
    def scale(self) -> float:
        return self.leading_modulus ** (-1.0 / (self.degree + 1)) if self.degree else 1.0

    def evaluate(self, z):
        return np.polyval(self.coeffs[::-1], z)

    def to_json(self) -> dict:
        return {
            "centers": [[float(z.real), float(z.imag)] for z in self.selected],
            "radii": [float(r) for r in self.radii],
            "leading_modulus": float(self.leading_modulus),
            "degree": self.degree,
        }


def polynomial_roots(coeffs) -> tuple[np.ndarray, tuple[int, ...]]:
    """Roots via companion-matrix eigenvalues, merging roots closer than the merge tolerance."""
    c = np.asarray(coeffs, dtype=complex)
    raw = np.roots(c[::-1])
    order = np.lexsort((raw.imag, raw.real))
    raw = raw[order]
    groups: list[list[complex]] = []
    for z in raw:
        for g in groups:
            if abs(np.mean(g) - z) < ROOT_MERGE_TOL:
                g.append(z)
                break
        else:
            groups.append([z])
    roots = np.array([np.mean(g) for g in groups], dtype=complex)
    mult = tuple(len(g) for g in groups)
    return roots, mult


def _trim(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex).ravel()
    if c.size == 0 or not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite and nonempty")
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise ValueError("zero polynomial has no sublevel decomposition")
    return c[: nz[-1] + 1]


def _decompose(roots: np.ndarray, mult: tuple[int, ...], A: float, factors: list) -> list[tuple[complex, float]]:
    d = sum(mult)
    if d == 0:
        return []
    L = A ** (-1.0 / (d + 1))
    space = FiniteMetricSpace.from_points(roots)
    cover = greedy_cluster(space, L)
    if len(cover.centers) == 1:
        s = cover.centers[0]
        return [(complex(roots[s]), cover.radii[s])]
    out: list[tuple[complex, float]] = []
    dsum = {s: sum(m for x, m in enumerate(mult) if cover.assignment[x] == s) for s in cover.centers}
    for s in cover.centers:
        members = [x for x in range(len(roots)) if cover.assignment[x] == s]
        base = A
        for t in cover.centers:
            if t != s:
                base *= abs(roots[t] - roots[s]) ** dsum[t]
        sub_roots = roots[members]
        sub_mult = tuple(mult[x] for x in members)
        K = 1.0
        for _ in range(MAX_WEIERSTRASS_DOUBLINGS):
            sub = _decompose(sub_roots, sub_mult, K * base, [])
            if all(r <= cover.radii[s] / 4 for _, r in sub):
                break
            K *= 2
        else:
            raise RuntimeError("no admissible constant K found for a cluster")
        factors.append(K)
        out.extend(sub)
    return out


def sublevel_decomposition(coeffs, root_radius: float = ROOT_DISC_RADIUS) -> RootClusterCover:
    """Recursive cluster cover of the roots of ``P`` (coefficients constant term first)."""
    c = _trim(coeffs)
    d = c.size - 1
    A = float(abs(c[-1]))
    if d == 0:
        empty = np.zeros(0, dtype=complex)
        return RootClusterCover(c, empty, (), empty, np.zeros(0), A, 0)
    roots, mult = polynomial_roots(c)
    if np.any(np.abs(roots) >= root_radius):
        worst = roots[int(np.argmax(np.abs(roots)))]
        raise ValueError(f"root {worst:.6g} lies outside D(0, {root_radius})")
    factors: list = []
    sel = _decompose(roots, mult, A, factors)
    selected = np.array([z for z, _ in sel], dtype=complex)
    radii = np.array([r for _, r in sel], dtype=float)
    return RootClusterCover(c, roots, mult, selected, radii, A, d, tuple(factors))


@dataclass(frozen=True)
class SublevelReport:
    K1: float
    K2: float
    K3: float
    degree: int
    leading_modulus: float
    disjoint: bool
    points: int

    def to_json(self) -> dict:
        return {
            "K1": self.K1,
            "K2": self.K2,
            "K3": self.K3,
            "degree": self.degree,
            "leading_modulus": self.leading_modulus,
            "disjoint": self.disjoint,
            "grid_points": self.points,
        }


def _disc_grid(center: complex, radius: float, n: int) -> np.ndarray:
    """Uniform grid of the closed disc plus a dense sample of its boundary circle."""
    t = np.linspace(-radius, radius, n)
    x, y = np.meshgrid(t, t)
    z = (x + 1j * y).ravel()
    z = z[np.abs(z) <= radius]
    circle = radius * np.exp(2j * np.pi * np.arange(4 * n) / (4 * n))
    return center + np.concatenate([z, circle])


def verify_sublevel(cover: RootClusterCover, resolution: int = 200) -> SublevelReport:
    """Smallest constants making the three cover properties hold on the sample points.

    Samples: a uniform grid of ``D(0, 1)``, local grids of every ``D(zeta, 4r)`` and
    dense samples of every circle ``|z - zeta| = 2r``.
    """
    d, A = cover.degree, cover.leading_modulus
    if d == 0:
        return SublevelReport(0.0, 0.0, 1.0, 0, A, True, 0)
    scale = A ** (1.0 / (d + 1))
    K1 = float(np.max(cover.radii) * scale)

    K2 = 0.0
    for z0, r in zip(cover.selected, cover.radii):
        pts = _disc_grid(z0, 4 * r, resolution // 2)
        K2 = max(K2, float(np.max(np.abs(cover.evaluate(pts)))) * r)

    far = [_disc_grid(0.0, 1.0, resolution)]
    for z0, r in zip(cover.selected, cover.radii):
        far.append(_disc_grid(z0, 4 * r, resolution // 2))
        m = 8 * resolution
        far.append(z0 + 2 * r * np.exp(2j * np.pi * np.arange(m) / m))
    pts = np.concatenate(far)
    inside = np.zeros(pts.shape, dtype=bool)
    for z0, r in zip(cover.selected, cover.radii):
        # points on the circles themselves belong to the complement of the open discs
        inside |= np.abs(pts - z0) < 2 * r * (1 - 1e-12)
    outside = pts[~inside]
    vals = np.abs(cover.evaluate(outside))
    K3 = float(scale / np.min(vals)) if outside.size else 0.0

    disjoint = True
    for i in range(len(cover.selected)):
        for j in range(i + 1, len(cover.selected)):
            if abs(cover.selected[i] - cover.selected[j]) <= 2 * (cover.radii[i] + cover.radii[j]):
                disjoint = False
    return SublevelReport(K1, K2, K3, d, A, disjoint, int(pts.size))


def random_root_polynomial(rng: np.random.Generator, degree: int, A: float, root_radius: float = 0.45):
    """Coefficients of ``A * e^{i theta} * prod (z - zeta_k)`` with roots uniform in a disc."""
    rho = root_radius * np.sqrt(rng.random(degree))
    roots = rho * np.exp(2j * np.pi * rng.random(degree))
    c = np.poly(roots)[::-1] * A * np.exp(2j * np.pi * rng.random())
    return c, roots


def sweep_constants(seed: int, count: int = 100, max_degree: int = 8, log_a=(2.0, 6.0), resolution: int = 200):
    """Randomized sweep of measured constants; one record per polynomial."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        d = int(rng.integers(1, max_degree + 1))
        la = float(rng.uniform(*log_a))
        coeffs, _ = random_root_polynomial(rng, d, 10.0**la)
        cover = sublevel_decomposition(coeffs)
        rep = verify_sublevel(cover, resolution)
        rows.append({"index": i, "degree": d, "A": 10.0**la, "K1": rep.K1, "K2": rep.K2, "K3": rep.K3})
    return rows
