"""Certification of the degree-2 example in three variables whose critical locus is a line plus a conic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib.resources import files

import numpy as np

from .io import disc_labels, load_discs, load_map, load_points
from .polyalg import MultiPoly, PolyMap, jet_values
from .typeinv import (
    critical_kernel_certificate,
    disc_order_search,
    disc_order_verify,
    sharp_order,
    t_invariant,
)

EXPECTED = {"det_terms": {(1, 1, 1): 8.0, (0, 0, 3): -2.0}, "orders": {"line": 2, "conic": 3, "intersection": 4}, "t": 4, "s": Fraction(1, 8)}


def data_path(name: str):
    return files("subgap") / "data" / name


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class CertificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> Check | None:
        return next((c for c in self.checks if not c.passed), None)

    def text(self) -> str:
        lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        lines.append("certification " + ("PASSED" if self.passed else f"FAILED at {self.first_failure.name}"))
        return "\n".join(lines)

    def to_json(self) -> dict:
        f = self.first_failure
        return {"passed": self.passed, "checks": [c.to_json() for c in self.checks], "first_failure": None if f is None else f.name}


def expected_det(n: int = 3) -> MultiPoly:
    return MultiPoly(n, EXPECTED["det_terms"])


def certify_example(map_path=None, discs_path=None, points_path=None, K: int | None = None, seed: int = 0,
                    samples: int = 1000) -> CertificationReport:
    """Run every check in order and stop at the first divergent quantity."""
    map_path = map_path or data_path("conic_line.json")
    discs_path = discs_path or data_path("conic_line_discs.json")
    points_path = points_path or data_path("conic_line_points.json")
    F: PolyMap = load_map(map_path)
    rep = CertificationReport()

    det = F.det_jacobian_poly
    ok = F.n == 3 and det.allclose(expected_det(), rtol=1e-12, atol=1e-13)
    rep.checks.append(Check("det J symbolic", ok, f"computed {det!r}; expected 8*z1*z2*z3 - 2*z3^3"))
    if not ok:
        return rep

    cert = critical_kernel_certificate(F, samples, seed)
    ok = cert.max_kernel_dim == 1 and cert.samples > 0
    rep.checks.append(Check("kernel dimension on critical locus", ok, f"max dim {cert.max_kernel_dim} over {cert.samples} locus samples"))
    if not ok:
        return rep

    discs = load_discs(discs_path, F.n)
    labels = disc_labels(discs_path)
    depth = 2 * F.degree() + 4 if K is None else K
    for disc, lab in zip(discs, labels):
        name = lab.get("label", "disc")
        want = EXPECTED["orders"].get(name, lab.get("expected_order"))
        verified = disc_order_verify(F, disc, depth)
        p = jet_values(disc, 0)
        found = disc_order_search(F, p / np.linalg.norm(p), depth)
        got_v = verified.order
        got_s = found.order
        if math.isinf(got_v) or not found.complete:
            rep.checks.append(Check(f"order at {name} point", False,
                                    f"search incomplete at depth {found.depth}: witness order >= {found.depth + 1}, expected {want}"))
            return rep
        ok = got_v == want and got_s == want
        rep.checks.append(Check(f"order at {name} point", ok, f"witness disc {got_v}, search {got_s}, expected {want}"))
        if not ok:
            return rep

    pts, _ = load_points(points_path)
    special = list(pts) + [jet_values(d, 0) for d in discs]
    ti = t_invariant(F, depth, samples=200, special_points=special, seed=seed)
    ok = ti.complete and ti.t == EXPECTED["t"]
    rep.checks.append(Check("t invariant", ok, f"t = {ti.t} ({ti.mode}); expected {EXPECTED['t']}"))
    if not ok:
        return rep

    s, T = sharp_order(F, ti.t, cert)
    ok = s == EXPECTED["s"]
    rep.checks.append(Check("sharp order", ok, f"s = {s}, T1 = {T}; expected {EXPECTED['s']}"))
    return rep
