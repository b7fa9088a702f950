"""Command-line entry point: ``subgap <subcommand> [options]``.

Exit codes: 0 pass, 1 certification failed, 2 hypothesis violated,
3 numerical non-convergence or insufficient resolution, 4 input error.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as sio
from .almostharm import CurvatureError
from .gaplab import ComparabilityError, GapConvergenceError, GridError
from .leviform import ConvergenceError, HypothesisError

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2, 3, 4


def _parse_point(text: str, n: int) -> np.ndarray:
    try:
        p = np.array([complex(s.strip().replace(" ", "")) for s in text.split(",")])
    except ValueError as exc:
        raise sio.InputError(f"bad point {text!r}; expected comma-separated complex numbers") from exc
    if p.shape != (n,):
        raise sio.InputError(f"point has {p.size} coordinates, map dimension is {n}")
    if not np.all(np.isfinite(p)) or np.linalg.norm(p) == 0:
        raise sio.InputError("point must be finite and nonzero")
    return p / np.linalg.norm(p)


def _require(args, name: str):
    v = getattr(args, name)
    if v is None:
        raise sio.InputError(f"--{name.replace('_', '-')} is required for this subcommand")
    return v


def _ordered_map(fn, items, jobs: int):
    """Results in input order regardless of completion order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# subcommands; each returns (result dict, optional (csv kind, rows))


def cmd_cluster(args, man):
    from .rootgeom import FiniteMetricSpace, check_cover, greedy_cluster

    path = _require(args, "points")
    man.add_input(path)
    dist = sio.load_distance_matrix(path)
    try:
        if dist is not None:
            space = FiniteMetricSpace(dist)
        else:
            pts, _ = sio.load_points(path)
            space = FiniteMetricSpace.from_points(pts)
    except ValueError as exc:
        raise sio.InputError(str(exc)) from exc
    man.tolerances["triangle_slack"] = 1e-12
    cover = greedy_cluster(space, args.scale)
    return {**cover.to_json(), "violations": check_cover(space, cover)}, None


def cmd_sublevel(args, man):
    from .rootgeom import sublevel_decomposition, verify_sublevel

    path = _require(args, "poly")
    man.add_input(path)
    coeffs = sio.load_polynomial(path)
    try:
        cover = sublevel_decomposition(coeffs)
    except ValueError as exc:
        raise HypothesisError(str(exc)) from exc
    man.grid["resolution"] = args.resolution
    rep = verify_sublevel(cover, args.resolution)
    return {"cover": cover.to_json(), "report": rep.to_json()}, None


def _gap_row(task):
    from .gaplab import DiscGrid, assemble, min_gap, power_weight

    d, A, N = task
    phi = power_weight(A, d)
    return min_gap(assemble(DiscGrid(0.0, 1.0, N), phi, phi.laplacian)).gap


def cmd_gap1d(args, man):
    from .gaplab import DiscGrid, gap_1d_general, loglog_slope

    N = args.grid or 256
    man.grid["N"] = N
    if args.poly:
        from .almostharm import PlanarField, newtonian_potential

        man.add_input(args.poly)
        c = sio.load_polynomial(args.poly)
        grid = DiscGrid(0.0, 1.0, N)
        P2 = np.abs(np.polyval(c[::-1], grid.points)) ** 2
        phi = newtonian_potential(PlanarField(grid, P2)).values
        rep = gap_1d_general(c, args.B, phi, N, args.kappa, laplacian=P2)
        row = {"d": rep.degree, "A": rep.A, "N": N, "gap": rep.result.gap, "ratio": rep.ratio, "slope_fit": ""}
        return {"d": rep.degree, "slope": None, "gap": rep.result.gap, "ratio": rep.ratio, "kappa": rep.kappa,
                "passed": rep.passed}, ("gap1d", [row])
    amps = sio.parse_amp(args.amp)
    if amps.size < 4:
        raise sio.InputError("the sharpness fit needs at least four amplitudes")
    d = args.degree
    man.tolerances["saturation"] = args.saturation
    gaps = _ordered_map(_gap_row, [(d, float(A), N) for A in amps], args.jobs)
    h = 2.0 / N
    if args.saturation is not None:
        for A, g in zip(amps, gaps):
            if g * h * h > args.saturation:
                raise GridError(f"gap {g:.3g} at A={A:.3g} saturates the grid; use smaller A or larger N")
    slope, _ = loglog_slope(amps, gaps)
    rows = [{"d": d, "A": float(A), "N": N, "gap": g, "ratio": g / A ** (2 / (d + 1)), "slope_fit": slope} for A, g in zip(amps, gaps)]
    return {"d": d, "slope": slope, "expected": 2 / (d + 1), "gap_h2_max": max(gaps) * h * h}, ("gap1d", rows)


def _scaling_case(task):
    from .gaplab import power_weight, random_subharmonic_polynomial, real_polynomial_field, scaling_check

    i, R, N, seed = task
    rng = np.random.default_rng([seed, i])
    if i == 0:
        phi, name = power_weight(1.0, 1), "|z|^4"
    else:
        phi, name = real_polynomial_field(random_subharmonic_polynomial(rng)), f"random-{i}"
    c = rng.standard_normal(2)

    def w(z):
        return np.exp(-np.abs(z - complex(*(0.2 * c))) ** 2) * (1 + 0.3 * z)

    return {"case": i, "R": R, "N": N, "phi": name, "error": scaling_check(phi, w, R, N)}


def cmd_scaling(args, man):
    N = args.grid or 128
    man.grid["N"] = N
    rng = np.random.default_rng(args.seed)
    if args.R:
        Rs = [float(r) for r in args.R.split(",")]
        if any(r <= 0 for r in Rs):
            raise sio.InputError("R values must be positive")
        tasks = [(i, R, N, args.seed) for i, R in enumerate(Rs * args.count)]
    else:
        tasks = [(i, float(np.exp(rng.uniform(np.log(0.5), np.log(2.0)))), N, args.seed) for i in range(args.count)]
    rows = _ordered_map(_scaling_case, tasks, args.jobs)
    return {"max_error": max(r["error"] for r in rows), "cases": len(rows)}, ("scaling", rows)


def cmd_ame(args, man):
    from .leviform import ame_field, ame_ratio, kernel_dimension

    F = _load_map(args, man)
    p = _parse_point(_require(args, "point"), F.n)
    K = args.depth or 2 * F.degree() + 4
    fld = ame_field(F, p, K)
    kd = kernel_dimension(F.jacobian_at(p))
    out = {"point": [sio.complex_pair(x) for x in p], "kernel_dim": kd, "trivial": fld.trivial, "order": K, "ratio": None}
    if not fld.trivial:
        out.update({
            "eps": fld.eps,
            "v0": [sio.complex_pair(x) for x in fld.v0],
            "field": [[{"exp": list(e), "coef": sio.complex_pair(c)} for e, c in X.terms.items()] for X in fld.X_polys],
            "idempotence_residual": fld.idempotence_residual(),
            "eigen_residual": fld.eigen_residual(),
            "commutation_residual": fld.commutation_residual(),
            "ratio": ame_ratio(F, fld, seed=args.seed),
        })
    return out, None


def cmd_foliate(args, man):
    from .leviform import flow_laplacian_ratio, foliation_prepare
    from .typeinv import hp_flatness

    F = _load_map(args, man)
    p = _parse_point(_require(args, "point"), F.n)
    K = args.depth or 2 * F.degree() + 4
    chart = foliation_prepare(F, p, K)
    hp = hp_flatness(F, p, K)
    zetas = 0.02 * np.exp(2j * np.pi * np.arange(20) / 20)
    ratios = flow_laplacian_ratio(F, chart, zetas)
    hp_json = None if math.isinf(hp) else int(hp)
    return {"chart": chart.to_json(), "hp": hp_json, "two_m_le_hp": hp_json is None or 2 * chart.m <= hp_json,
            "laplacian_ratio_min": float(np.min(ratios)), "laplacian_ratio_max": float(np.max(ratios))}, None


def cmd_type(args, man):
    from .typeinv import type_report

    F = _load_map(args, man)
    discs = []
    if args.witness_discs:
        man.add_input(args.witness_discs)
        discs = sio.load_discs(args.witness_discs, F.n)
    special = []
    if args.points:
        man.add_input(args.points)
        special = list(sio.load_points(args.points)[0])
    man.tolerances.update({"kernel_rtol": 1e-8, "range_rtol": 1e-8})
    rep = type_report(F, args.depth, discs, special, samples=args.samples, seed=args.seed)
    return rep.to_json(), None


def cmd_contact(args, man):
    from .almostharm import build_disc_family
    from .polyalg import jet_values
    from .typeinv import disc_order_verify

    F = _load_map(args, man)
    path = _require(args, "witness_discs")
    man.add_input(path)
    discs = sio.load_discs(path, F.n)
    if not 0 <= args.index < len(discs):
        raise sio.InputError(f"--index {args.index} out of range (file has {len(discs)} discs)")
    disc = discs[args.index]
    K = args.depth or 2 * F.degree() + 4
    order = disc_order_verify(F, disc, K).order
    if math.isinf(order):
        raise ConvergenceError(f"disc order exceeds the depth {K}")
    m = 2 * int(order) - 2
    N = args.grid or 128
    man.grid["N"] = N
    fam = build_disc_family(F, jet_values(disc, 0), disc, m, N=N)
    return {"summary": fam.summary(), "residuals": list(fam.residuals), "ts": list(fam.ts)}, ("contact", list(fam.rows()))


def cmd_certify(args, man):
    from .certify import certify_example, data_path

    map_path = args.map or data_path("conic_line.json")
    discs_path = args.witness_discs or data_path("conic_line_discs.json")
    for pth in (map_path, discs_path):
        man.add_input(pth)
    rep = certify_example(map_path, discs_path, None, args.depth, args.seed)
    print(rep.text(), file=sys.stderr)
    return rep.to_json(), None


def _load_map(args, man):
    path = _require(args, "map")
    man.add_input(path)
    return sio.load_map(path)


COMMANDS = {
    "cluster": (cmd_cluster, "cluster"),
    "sublevel": (cmd_sublevel, "sublevel"),
    "gap1d": (cmd_gap1d, "gap1d"),
    "scaling": (cmd_scaling, None),
    "ame": (cmd_ame, "ame"),
    "foliate": (cmd_foliate, "foliate"),
    "type": (cmd_type, "type"),
    "contact": (cmd_contact, "contact"),
    "certify-example": (cmd_certify, "certify"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", help="polynomial map JSON")
    common.add_argument("--out", help="directory for result files and the run manifest")
    common.add_argument("--grid", type=int, help="grid resolution N")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--depth", type=int, help="jet depth K (default 2d+4)")
    common.add_argument("--witness-discs", dest="witness_discs", help="witness disc JSON")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    parser = argparse.ArgumentParser(prog="subgap", description="Subelliptic-order computations for homogeneous special domains.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", parents=[common], help="greedy cluster cover of a point set")
    p.add_argument("--points", help="points JSON ({'points': [[re, im], ...]} or {'dist': matrix})")
    p.add_argument("--scale", type=float, default=1.0, help="scale L")

    p = sub.add_parser("sublevel", parents=[common], help="root-cluster decomposition of a polynomial")
    p.add_argument("--poly", help="polynomial JSON {'coeffs': [[re, im], ...]} (ascending)")
    p.add_argument("--resolution", type=int, default=200)

    p = sub.add_parser("gap1d", parents=[common], help="sharpness scan or general one-dimensional gap")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--amp", default="1e2:1e4:5", help="LO:HI:COUNT, log-spaced")
    p.add_argument("--saturation", type=float, default=None, help="reject gaps above this multiple of 1/h^2")
    p.add_argument("--poly", help="polynomial JSON for the general estimate")
    p.add_argument("--B", type=float, default=1.0, help="comparability constant")
    p.add_argument("--kappa", type=float, default=0.01)

    p = sub.add_parser("scaling", parents=[common], help="scaling identity on matched grids")
    p.add_argument("--R", help="comma-separated dilation factors (default: random in [1/2, 2])")
    p.add_argument("--count", type=int, default=20)

    p = sub.add_parser("ame", parents=[common], help="approximate minimal eigenvector field at a point")
    p.add_argument("--point", help="comma-separated complex coordinates")

    p = sub.add_parser("foliate", parents=[common], help="flow chart and Weierstrass order at a point")
    p.add_argument("--point", help="comma-separated complex coordinates")

    p = sub.add_parser("type", parents=[common], help="type invariants and the sharp order")
    p.add_argument("--points", help="special points JSON")
    p.add_argument("--samples", type=int, default=200, help="critical-locus samples for the disc search")

    p = sub.add_parser("contact", parents=[common], help="contact exponents of shrinking disc families")
    p.add_argument("--index", type=int, default=0, help="which disc of the witness file")

    sub.add_parser("certify-example", parents=[common], help="certify the bundled three-variable example")
    return parser


def _error(exc: BaseException, code: int) -> int:
    obj = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stdout.write(sio.dumps(obj))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    fn, schema = COMMANDS[args.command]
    man = sio.RunManifest(args.command, seed=args.seed, version=sio.artifact_version())
    if args.grid:
        man.grid["N"] = args.grid
    if args.depth:
        man.tolerances["depth"] = args.depth
    try:
        result, table = fn(args, man)
    except sio.InputError as exc:
        return _error(exc, EXIT_INPUT)
    except (HypothesisError, ComparabilityError, CurvatureError) as exc:
        return _error(exc, EXIT_HYPOTHESIS)
    except (ConvergenceError, GapConvergenceError, GridError) as exc:
        return _error(exc, EXIT_NUMERICAL)
    except (OSError, ValueError) as exc:
        return _error(exc, EXIT_INPUT)
    mid = man.manifest_id
    result = {**result, "manifest_id": mid}
    text = sio.dumps(result)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = args.command.replace("-", "_")
        (out / f"{stem}.json").write_text(text)
        if table is not None:
            kind, rows = table
            (out / f"{stem}.csv").write_text(sio.csv_text(sio.CSV_SCHEMAS[kind], rows))
        (out / "manifest.json").write_text(sio.dumps(man.finish()))
    if args.command == "certify-example" and not result["passed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
