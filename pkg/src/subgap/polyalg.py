"""Sparse multivariate complex polynomials, polynomial maps and truncated jets.

Coefficients are double precision complex numbers.  Terms are kept in graded
lexicographic order so that every summation happens in a fixed order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]

# relative threshold for dropping cancellation noise after arithmetic
PRUNE_RTOL = 1e-14


def grlex_key(exp: Exponent) -> tuple:
    return (sum(exp), exp)


class MultiPoly:
    """Immutable sparse polynomial in ``n`` complex variables."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Exponent, complex] | Iterable = (), *, prune: bool = True):
        if n < 1:
            raise ValueError("dimension must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Exponent, complex] = {}
        for exp, coef in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != n or any(e < 0 for e in exp):
                raise ValueError(f"bad exponent {exp} for dimension {n}")
            acc[exp] = acc.get(exp, 0j) + complex(coef)
        if prune and acc:
            cmax = max(abs(c) for c in acc.values())
            cut = PRUNE_RTOL * cmax
            acc = {e: c for e, c in acc.items() if c != 0 and abs(c) >= cut}
        else:
            acc = {e: c for e, c in acc.items() if c != 0}
        ordered = dict(sorted(acc.items(), key=lambda kv: grlex_key(kv[0])))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_terms", MappingProxyType(ordered))

    def __setattr__(self, name, value):
        raise AttributeError("MultiPoly is immutable")

    # construction helpers

    @classmethod
    def zero(cls, n: int) -> "MultiPoly":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c: complex) -> "MultiPoly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, k: int) -> "MultiPoly":
        exp = [0] * n
        exp[k] = 1
        return cls(n, {tuple(exp): 1.0})

    @property
    def terms(self) -> Mapping[Exponent, complex]:
        return self._terms

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> float:
        """Total degree; ``-inf`` for the zero polynomial."""
        if not self._terms:
            return -math.inf
        return max(sum(e) for e in self._terms)

    def is_homogeneous(self, d: int) -> bool:
        return all(sum(e) == d for e in self._terms)

    def coefficient(self, exp: Sequence[int]) -> complex:
        return self._terms.get(tuple(exp), 0j)

    def max_abs_coef(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # arithmetic

    def _check(self, other: "MultiPoly"):
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.n, other)
        self._check(other)
        return MultiPoly(self.n, itertools.chain(self, other))

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.n, ((e, -c) for e, c in self), prune=False)

    def __sub__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            c = complex(other)
            return MultiPoly(self.n, ((e, c * a) for e, a in self))
        self._check(other)
        prods = (
            (tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
            for e1, c1 in self
            for e2, c2 in other
        )
        return MultiPoly(self.n, prods)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = MultiPoly.constant(self.n, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.n == other.n and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def allclose(self, other: "MultiPoly", rtol: float = 1e-12, atol: float = 1e-14) -> bool:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        scale = max(self.max_abs_coef(), other.max_abs_coef(), 1.0)
        return all(
            abs(self.coefficient(k) - other.coefficient(k)) <= atol + rtol * scale for k in keys
        )

    def diff(self, k: int) -> "MultiPoly":
        """Exact partial derivative with respect to variable ``k``."""
        out = []
        for e, c in self:
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                out.append((tuple(e2), c * e[k]))
        return MultiPoly(self.n, out, prune=False)

    def shift(self, center: Sequence[complex]) -> "MultiPoly":
        """Return ``q(h) = p(center + h)``."""
        center = np.asarray(center, dtype=complex)
        hs = [MultiPoly.variable(self.n, k) + center[k] for k in range(self.n)]
        out = MultiPoly.zero(self.n)
        for e, c in self:
            term = MultiPoly.constant(self.n, c)
            for k, ek in enumerate(e):
                if ek:
                    term = term * hs[k] ** ek
            out = out + term
        return out

    def truncate(self, order: int) -> "MultiPoly":
        return MultiPoly(self.n, ((e, c) for e, c in self if sum(e) <= order), prune=False)

    # evaluation

    def __call__(self, z) -> complex | np.ndarray:
        return self.evaluate(z)

    def evaluate(self, z) -> complex | np.ndarray:
        """Evaluate at ``z`` of shape ``(n,)`` or a batch ``(..., n)``."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError(f"dimension mismatch: point has {z.shape[-1]} coordinates, expected {self.n}")
        acc = np.zeros(z.shape[:-1], dtype=complex)
        for e, c in self:
            t = np.full(z.shape[:-1], c, dtype=complex)
            for k, ek in enumerate(e):
                if ek:
                    t = t * z[..., k] ** ek
            acc = acc + t
        return complex(acc) if acc.ndim == 0 else acc

    def compose(self, jets: Sequence["JetSeries"]) -> "JetSeries":
        """Substitute the scalar jets ``jets[k]`` for the variables."""
        if len(jets) != self.n:
            raise ValueError("dimension mismatch between polynomial and disc")
        order = min(j.order for j in jets)
        powers: list[dict[int, JetSeries]] = [{0: JetSeries.constant(1.0, order)} for _ in jets]

        def power(k: int, e: int) -> JetSeries:
            cache = powers[k]
            if e not in cache:
                cache[e] = power(k, e - 1) * jets[k].truncate(order)
            return cache[e]

        acc = JetSeries.zero(order)
        for e, c in self:
            t = JetSeries.constant(c, order)
            for k, ek in enumerate(e):
                if ek:
                    t = t * power(k, ek)
            acc = acc + t
        return acc

    # serialisation

    def to_json(self) -> list[dict]:
        return [
            {"exp": list(e), "coef": [float(c.real), float(c.imag)]} for e, c in self
        ]

    @classmethod
    def from_json(cls, n: int, data: list[dict]) -> "MultiPoly":
        terms = []
        for t in data:
            re, im = t["coef"]
            if not (math.isfinite(re) and math.isfinite(im)):
                raise ValueError("non-finite coefficient")
            terms.append((tuple(t["exp"]), complex(re, im)))
        return cls(n, terms, prune=False)

    def __repr__(self):
        if not self._terms:
            return "MultiPoly(0)"
        parts = []
        for e, c in self:
            mono = "*".join(f"z{k + 1}^{ek}" if ek > 1 else f"z{k + 1}" for k, ek in enumerate(e) if ek)
            parts.append(f"({c:.6g})" + (f"*{mono}" if mono else ""))
        return "MultiPoly(" + " + ".join(parts) + ")"


class JetSeries:
    """Truncated power series ``sum_k a_k zeta^k`` for ``k <= order``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, order: int | None = None):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if order is not None:
            out = np.zeros(order + 1, dtype=complex)
            m = min(order + 1, c.size)
            out[:m] = c[:m]
            c = out
        if c.size == 0:
            raise ValueError("empty jet")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("JetSeries is immutable")

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def zero(cls, order: int) -> "JetSeries":
        return cls(np.zeros(order + 1))

    @classmethod
    def constant(cls, c: complex, order: int) -> "JetSeries":
        return cls([c], order)

    @classmethod
    def identity(cls, order: int) -> "JetSeries":
        return cls([0.0, 1.0], order)

    def truncate(self, order: int) -> "JetSeries":
        if order == self.order:
            return self
        return JetSeries(self.coeffs, order)

    def _coerce(self, other) -> tuple["JetSeries", "JetSeries"]:
        if not isinstance(other, JetSeries):
            return self, JetSeries.constant(other, self.order)
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        a, b = self._coerce(other)
        return JetSeries(a.coeffs + b.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return JetSeries(-self.coeffs)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return JetSeries(a.coeffs - b.coeffs)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, JetSeries):
            return JetSeries(self.coeffs * complex(other))
        a, b = self._coerce(other)
        k = a.order
        return JetSeries(np.convolve(a.coeffs, b.coeffs)[: k + 1])

    __rmul__ = __mul__

    def __pow__(self, e: int):
        out = JetSeries.constant(1.0, self.order)
        for _ in range(e):
            out = out * self
        return out

    def __getitem__(self, k: int) -> complex:
        return complex(self.coeffs[k])

    def derivative(self) -> "JetSeries":
        """Derivative; the result has order one less."""
        k = np.arange(1, self.order + 1)
        if self.order == 0:
            return JetSeries([0.0])
        return JetSeries(self.coeffs[1:] * k)

    def compose(self, inner: "JetSeries") -> "JetSeries":
        """``self(inner(zeta))``; requires ``inner`` to have zero constant term."""
        if abs(inner.coeffs[0]) != 0:
            raise ValueError("inner series must vanish at zero")
        k = min(self.order, inner.order)
        inner = inner.truncate(k)
        acc = JetSeries.zero(k)
        for a in self.coeffs[: k + 1][::-1]:
            acc = acc * inner + a
        return acc

    def evaluate(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        acc = np.zeros_like(zeta)
        for a in self.coeffs[::-1]:
            acc = acc * zeta + a
        return complex(acc) if acc.ndim == 0 else acc

    __call__ = evaluate

    def allclose(self, other: "JetSeries", atol: float = 1e-12) -> bool:
        a, b = self._coerce(other)
        return bool(np.all(np.abs(a.coeffs - b.coeffs) <= atol))

    def __repr__(self):
        return f"JetSeries({np.array2string(self.coeffs, precision=6)})"


VectorJet = tuple[JetSeries, ...]


def vector_jet(rows: Sequence[Sequence[complex]], order: int | None = None) -> VectorJet:
    """Build a vector jet from per-component coefficient lists."""
    if order is None:
        order = max(len(r) for r in rows) - 1
    return tuple(JetSeries(r, order) for r in rows)


def jet_values(jet: Sequence[JetSeries], k: int) -> np.ndarray:
    """The coefficient vector of ``zeta^k`` in a vector jet."""
    return np.array([j.coeffs[k] if k <= j.order else 0j for j in jet])


@dataclass(frozen=True)
class PolyMap:
    """An n-tuple of polynomials in n variables, optionally homogeneous of degree d."""

    n: int
    components: tuple[MultiPoly, ...]
    homogeneous_degree: int | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.n:
            raise ValueError(f"expected {self.n} components, got {len(comps)}")
        for c in comps:
            if c.n != self.n:
                raise ValueError("all components must share the map dimension")
        d = self.homogeneous_degree
        if d is not None:
            if d < 1:
                raise ValueError("homogeneous degree must be positive")
            for c in comps:
                if not c.is_homogeneous(d):
                    raise ValueError(f"component {c} is not homogeneous of degree {d}")

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls(n, tuple(MultiPoly.variable(n, k) for k in range(n)), 1, name="identity")

    @classmethod
    def linear(cls, matrix) -> "PolyMap":
        a = np.asarray(matrix, dtype=complex)
        n = a.shape[0]
        comps = tuple(
            MultiPoly(n, [(tuple(int(i == k) for i in range(n)), a[j, k]) for k in range(n)])
            for j in range(n)
        )
        return cls(n, comps, 1, name="linear")

    @classmethod
    def from_callable_terms(cls, n: int, comps: Sequence[Iterable], homogeneous_degree=None, name=""):
        return cls(n, tuple(MultiPoly(n, c) for c in comps), homogeneous_degree, name=name)

    def degree(self) -> int:
        return int(max(c.degree() for c in self.components if not c.is_zero()))

    def infer_homogeneous_degree(self) -> int | None:
        degs = {sum(e) for c in self.components for e, _ in c}
        return degs.pop() if len(degs) == 1 else None

    def evaluate(self, z) -> np.ndarray:
        return evaluate(self, z)

    __call__ = evaluate

    @cached_property
    def jacobian_polys(self) -> tuple[tuple[MultiPoly, ...], ...]:
        return tuple(tuple(c.diff(k) for k in range(self.n)) for c in self.components)

    @cached_property
    def det_jacobian_poly(self) -> MultiPoly:
        return det_jacobian(self)

    def jacobian_at(self, z) -> np.ndarray:
        """Numeric Jacobian at ``z`` (shape ``(n,)`` or batch ``(..., n)``)."""
        z = np.asarray(z, dtype=complex)
        rows = [np.stack([np.asarray(p.evaluate(z)) for p in row], axis=-1) for row in self.jacobian_polys]
        return np.stack(rows, axis=-2)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "homogeneous_degree": self.homogeneous_degree,
            "components": [c.to_json() for c in self.components],
        }

    @classmethod
    def from_json(cls, data: dict, name: str = "") -> "PolyMap":
        try:
            n = int(data["n"])
            comps = tuple(MultiPoly.from_json(n, c) for c in data["components"])
            hd = data.get("homogeneous_degree")
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed map JSON: {exc}") from exc
        return cls(n, comps, None if hd is None else int(hd), name=name)


def evaluate(poly_map: PolyMap, z) -> np.ndarray:
    """Evaluate every component of the map at ``z``."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != poly_map.n:
        raise ValueError(f"dimension mismatch: expected {poly_map.n} coordinates, got {z.shape[-1]}")
    if not np.all(np.isfinite(z)):
        raise ValueError("evaluation point must be finite")
    return np.stack([np.asarray(c.evaluate(z)) for c in poly_map.components], axis=-1)


def jacobian(poly_map: PolyMap) -> list[list[MultiPoly]]:
    """Symbolic Jacobian: entry ``(j, k)`` is the derivative of ``F_j`` in ``z_k``."""
    return [list(row) for row in poly_map.jacobian_polys]


def _det(matrix: list[list[MultiPoly]]) -> MultiPoly:
    m = len(matrix)
    if m == 1:
        return matrix[0][0]
    if m == 2:
        return matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]
    n = matrix[0][0].n
    acc = MultiPoly.zero(n)
    for k in range(m):
        if matrix[0][k].is_zero():
            continue
        minor = [row[:k] + row[k + 1:] for row in matrix[1:]]
        term = matrix[0][k] * _det(minor)
        acc = acc + term if k % 2 == 0 else acc - term
    return acc


def det_jacobian(poly_map: PolyMap) -> MultiPoly:
    """Determinant of the symbolic Jacobian by cofactor expansion."""
    return _det(jacobian(poly_map))


def compose_jet(poly_map: PolyMap, disc: Sequence[JetSeries], order: int) -> VectorJet:
    """Taylor expansion of ``F o psi`` through ``zeta^order``."""
    if len(disc) != poly_map.n:
        raise ValueError("disc dimension must match the map dimension")
    if order < 1:
        raise ValueError("order must be at least 1")
    disc = [j.truncate(order) if j.order >= order else JetSeries(j.coeffs, order) for j in disc]
    return tuple(c.compose(disc) for c in poly_map.components)


def default_jet_order(poly_map: PolyMap) -> int:
    return 2 * poly_map.degree() + 4


def vanishing_order(f: Sequence[JetSeries] | JetSeries, rtol: float = 1e-10) -> float:
    """Smallest k >= 1 with a nonzero coefficient of zeta^k; ``inf`` if none up to the order.

    Coefficients below ``rtol * max(1, max |a_k|)`` count as zero.
    """
    if isinstance(f, JetSeries):
        f = (f,)
    order = min(j.order for j in f)
    scale = max(1.0, max(float(np.max(np.abs(j.coeffs))) for j in f))
    for k in range(1, order + 1):
        if max(abs(j.coeffs[k]) for j in f) > rtol * scale:
            return k
    return math.inf


@dataclass(frozen=True)
class IsolatedZeroCertificate:
    min_abs: float
    argmin: np.ndarray
    samples: int
    tol: float
    passed: bool
    note: str = "sampling certificate on the unit sphere; not an algebraic proof"


def sphere_samples(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Quasi-uniform points on the unit sphere of C^n."""
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def _to_complex(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    z = x[:n] + 1j * x[n:]
    return z / np.linalg.norm(z)


def check_isolated_zero(
    poly_map: PolyMap,
    samples: int = 4000,
    tol: float = 1e-6,
    seed: int = 0,
    refine: int = 8,
) -> IsolatedZeroCertificate:
    """Minimum of |F| on the unit sphere from random samples plus local refinement.

    By homogeneity a positive minimum rules out zeros away from the origin, up to
    the resolution of the search.
    """
    from scipy.optimize import minimize

    d = poly_map.homogeneous_degree or poly_map.infer_homogeneous_degree()
    if d is None:
        raise ValueError("isolated-zero check needs a homogeneous map")
    if samples < 1000:
        raise ValueError("use at least 1000 sphere samples")
    rng = np.random.default_rng(seed)
    pts = sphere_samples(poly_map.n, samples, rng)
    vals = np.linalg.norm(evaluate(poly_map, pts), axis=1)
    order = np.argsort(vals, kind="stable")[:refine]

    def obj(x):
        z = _to_complex(x)
        return float(np.sum(np.abs(evaluate(poly_map, z)) ** 2))

    best, best_z = float(vals[order[0]]), pts[order[0]]
    for i in order:
        res = minimize(obj, _to_real(pts[i]), method="BFGS", options={"gtol": 1e-14, "maxiter": 400})
        z = _to_complex(res.x)
        v = float(np.linalg.norm(evaluate(poly_map, z)))
        if v < best:
            best, best_z = v, z
    return IsolatedZeroCertificate(best, best_z, samples, tol, best > tol)
