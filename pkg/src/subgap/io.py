"""File formats: maps, witness discs, point sets, polynomials, result schemas and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .polyalg import JetSeries, PolyMap


class InputError(ValueError):
    """Malformed or unreadable input file."""


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _complex(pair, what: str) -> complex:
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise InputError(f"{what}: expected [re, im]")
    try:
        re, im = float(pair[0]), float(pair[1])
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what}: non-numeric entry") from exc
    if not (math.isfinite(re) and math.isfinite(im)):
        raise InputError(f"{what}: non-finite entry")
    return complex(re, im)


def complex_pair(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def load_map(path) -> PolyMap:
    data = _read_json(path)
    try:
        return PolyMap.from_json(data, name=Path(path).stem)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse_disc(entry, n: int, what: str = "disc") -> tuple[JetSeries, ...]:
    if not isinstance(entry, dict) or "jet" not in entry:
        raise InputError(f"{what}: expected an object with 'jet'")
    jet = entry["jet"]
    if not isinstance(jet, list) or len(jet) != n:
        raise InputError(f"{what}: jet must have {n} components")
    comps = []
    for i, comp in enumerate(jet):
        if not isinstance(comp, list) or not comp:
            raise InputError(f"{what}: component {i} must be a nonempty coefficient list")
        comps.append(JetSeries([_complex(c, f"{what}.jet[{i}]") for c in comp]))
    if "point" in entry:
        pt = np.array([_complex(c, f"{what}.point") for c in entry["point"]])
        if pt.shape != (n,) or np.linalg.norm(pt - np.array([c.coeffs[0] for c in comps])) > 1e-12 * max(1.0, np.linalg.norm(pt)):
            raise InputError(f"{what}: point does not match the constant term of the jet")
    return tuple(comps)


def load_discs(path, n: int) -> list[tuple[JetSeries, ...]]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise InputError(f"{path}: expected a list of discs")
    return [parse_disc(e, n, f"{path}[{i}]") for i, e in enumerate(data)]


def disc_labels(path) -> list[dict]:
    """Extra keys (``label``, ``expected_order``) of a disc file, in order."""
    return [{k: v for k, v in e.items() if k not in ("jet", "point")} for e in _read_json(path)]


def disc_to_json(disc) -> dict:
    return {
        "point": [complex_pair(j.coeffs[0]) for j in disc],
        "jet": [[complex_pair(c) for c in j.coeffs] for j in disc],
    }


def load_points(path) -> tuple[np.ndarray, int | None]:
    """Complex points from ``{"points": [[re, im], ...]}`` or an ``{"n": .., "points": [[[re, im], ...], ...]}`` list."""
    data = _read_json(path)
    pts = data.get("points") if isinstance(data, dict) else data
    if not isinstance(pts, list) or not pts:
        raise InputError(f"{path}: expected a nonempty 'points' list")
    if isinstance(pts[0], list) and pts[0] and isinstance(pts[0][0], list):
        arr = np.array([[_complex(c, f"{path}.points") for c in p] for p in pts])
        return arr, arr.shape[1]
    return np.array([_complex(c, f"{path}.points") for c in pts]), None


def load_distance_matrix(path) -> np.ndarray | None:
    data = _read_json(path)
    if isinstance(data, dict) and "dist" in data:
        try:
            return np.asarray(data["dist"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: 'dist' must be a numeric matrix") from exc
    return None


def load_polynomial(path) -> np.ndarray:
    """Univariate coefficients, constant term first, from ``[[re, im], ...]`` or ``{"coeffs": [...]}``."""
    data = _read_json(path)
    coeffs = data.get("coeffs") if isinstance(data, dict) else data
    if not isinstance(coeffs, list) or not coeffs:
        raise InputError(f"{path}: expected a nonempty 'coeffs' list")
    return np.array([_complex(c, f"{path}.coeffs") for c in coeffs])


def parse_amp(spec: str) -> np.ndarray:
    """``LO:HI:COUNT`` as ``COUNT`` log-spaced values from ``LO`` to ``HI``."""
    try:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError as exc:
        raise InputError(f"bad amplitude range {spec!r}; expected LO:HI:COUNT") from exc
    if lo <= 0 or hi <= 0 or count < 1:
        raise InputError("amplitudes must be positive and COUNT >= 1")
    return np.logspace(math.log10(lo), math.log10(hi), count)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(columns, rows))


def csv_text(columns, rows) -> str:
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


# schemas

CSV_SCHEMAS = {
    "gap1d": ("d", "A", "N", "gap", "ratio", "slope_fit"),
    "scaling": ("case", "R", "N", "phi", "error"),
    "contact": ("t", "max_contact_residual"),
}

JSON_SCHEMAS = {
    "manifest": {"manifest_id": str, "subcommand": str, "inputs": dict, "seed": int, "tolerances": dict, "grid": dict, "version": str},
    "type": {"d": int, "t": int, "t_mode": str, "s_num": int, "s_den": int, "kernel_max_dim": int, "witnesses": list, "manifest_id": str},
    "cluster": {"centers": list, "radii": list, "scale": float, "violations": list, "manifest_id": str},
    "sublevel": {"cover": dict, "report": dict, "manifest_id": str},
    "ame": {"point": list, "kernel_dim": int, "trivial": bool, "ratio": (float, type(None)), "manifest_id": str},
    "foliate": {"chart": dict, "hp": (int, float, type(None)), "manifest_id": str},
    "contact": {"summary": dict, "manifest_id": str},
    "certify": {"passed": bool, "checks": list, "manifest_id": str},
    "gap1d": {"d": int, "slope": (float, type(None)), "manifest_id": str},
    "error": {"error": str, "message": str, "exit_code": int},
}


def validate_json(kind: str, obj) -> list[str]:
    """Schema violations of ``obj`` (empty when valid)."""
    schema = JSON_SCHEMAS[kind]
    if not isinstance(obj, dict):
        return ["not an object"]
    out = []
    for key, typ in schema.items():
        if key not in obj:
            out.append(f"missing key {key!r}")
            continue
        v = obj[key]
        types = typ if isinstance(typ, tuple) else (typ,)
        ok = any(
            (t is float and isinstance(v, (int, float)) and not isinstance(v, bool))
            or (t is int and isinstance(v, int) and not isinstance(v, bool))
            or (t not in (int, float) and isinstance(v, t))
            for t in types
        )
        if not ok:
            out.append(f"key {key!r} has type {type(v).__name__}")
    return out


def validate_csv(kind: str, text: str) -> list[str]:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        return ["empty CSV"]
    out = []
    if tuple(rows[0]) != CSV_SCHEMAS[kind]:
        out.append(f"header {rows[0]} != {list(CSV_SCHEMAS[kind])}")
    for i, r in enumerate(rows[1:], 1):
        if len(r) != len(rows[0]):
            out.append(f"row {i} has {len(r)} fields")
    return out


# manifests


def artifact_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        from . import __version__

        return __version__


@dataclass
class RunManifest:
    """Parameters of one CLI run.  ``manifest_id`` hashes everything except timing."""

    subcommand: str
    inputs: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    version: str = ""
    wall_clock: float = 0.0
    started: float = field(default_factory=time.time, repr=False)

    def add_input(self, path) -> None:
        self.inputs[Path(path).name] = sha256_file(path)

    @property
    def manifest_id(self) -> str:
        core = {k: v for k, v in asdict(self).items() if k not in ("wall_clock", "started")}
        return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()[:16]

    def finish(self) -> dict:
        self.wall_clock = round(time.time() - self.started, 3)
        out = {k: v for k, v in asdict(self).items() if k != "started"}
        out["manifest_id"] = self.manifest_id
        out["python"] = platform.python_version()
        return out
