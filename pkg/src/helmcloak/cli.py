"""Batch command-line front door.

Subcommands: mesh, pushforward, dtn, sweep, schiffer, resonance, ite.
Every run writes exactly one output file atomically (temp file + rename).
Exit codes: 0 success, 2 parameter error, 3 numerical error (resonance or
singular solve), 4 resolution error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import bessel, cloak, dtn, meshgen, spectra, xform
from .errors import (
    HelmcloakError,
    ParameterError,
    ResolutionError,
    ResonanceError,
)

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_NUMERICAL = 3
EXIT_RESOLUTION = 4


def _atomic_write(path: str, text: str) -> None:
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_target_g(spec: str) -> np.ndarray:
    if spec.startswith("iso:"):
        c = float(spec.split(":", 1)[1])
        return np.array([[c, 0.0], [0.0, c]])
    if spec.startswith("diag:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ParameterError("diag target must be diag:<a>:<b>")
        return np.array([[float(parts[1]), 0.0], [0.0, float(parts[2])]])
    raise ParameterError(f"unsupported target-g spec {spec!r}")


def _make_shape_mesh(args) -> meshgen.Mesh:
    if args.shape == "disk":
        return meshgen.make_disk(args.radius, args.h, args.interface)
    if args.shape == "annulus":
        if args.a is None:
            raise ParameterError("annulus needs --a (inner radius) and --radius")
        return meshgen.make_annulus(args.a, args.radius, args.h)
    if args.shape == "ellipse":
        if args.a is None or args.b is None:
            raise ParameterError("ellipse needs --a and --b")
        return meshgen.make_ellipse(args.a, args.b, args.h)
    raise ParameterError(f"unknown shape {args.shape!r}")


def _eig_payload(problem: str, config: dict, result) -> dict:
    return {
        "problem": problem,
        "config": config,
        "eigenvalues": [float(v) for v in result.values],
        "clusters": result.clusters,
    }


def cmd_mesh(args) -> None:
    mesh = _make_shape_mesh(args)
    _atomic_write(args.out, mesh.to_json())


def cmd_pushforward(args) -> None:
    F = xform.lookup(args.map)
    base = xform.isotropic_field(1.0, 1.0)
    m = xform.push_forward(F, base)
    rs = np.linspace(1.05, 1.95, 10)
    ts = np.linspace(0.0, 2 * math.pi, 12, endpoint=False)
    pts = np.array([[r * math.cos(t), r * math.sin(t)] for r in rs for t in ts])
    inside = F.domain_check(F.inverse(pts)) if args.map != "identity" else np.ones(len(pts), bool)
    pts = pts[inside]
    g = m.g(pts)
    q = m.q(pts)
    payload = {
        "map": args.map,
        "points": pts.tolist(),
        "g": g.tolist(),
        "q": q.tolist(),
        "det_g": np.linalg.det(g).tolist(),
    }
    _atomic_write(args.out, json.dumps(payload))


def cmd_dtn(args) -> None:
    mesh = meshgen.make_disk(args.radius, args.h)
    if args.map and args.map != "identity":
        F = xform.lookup(args.map)
        medium = xform.push_forward(F, xform.isotropic_field(1.0, 1.0))
    else:
        medium = xform.isotropic_field(1.0, 1.0)
    computed = dtn.dtn_matrix(mesh, medium, args.omega, args.modes)
    payload = json.loads(computed.to_json())
    try:
        free = dtn.dtn_free_analytic(args.omega, args.modes, args.radius)
        payload["error_vs_free"] = dtn.dtn_error(computed, free)
    except ResonanceError:
        payload["error_vs_free"] = None
    _atomic_write(args.out, json.dumps(payload))


def cmd_sweep(args) -> None:
    eps_values = [float(tok) for tok in args.eps.split(",") if tok]
    if not eps_values:
        raise ParameterError("--eps needs at least one value")
    gmat = _parse_target_g(args.target_g)
    target = xform.tensor_field(gmat, args.target_q)
    records, matrices = cloak.run_sweep(
        eps_values, args.omega, target, modes=args.modes, mesh_h=args.h
    )
    cloak.sweep_to_csv(records, args.omega, args.modes, args.out)
    if args.dump_dtn:
        dump = {
            repr(rec.epsilon): json.loads(mat.to_json())
            for rec, mat in zip(records, matrices)
        }
        _atomic_write(args.out + ".dtn.json", json.dumps(dump))


def cmd_schiffer(args) -> None:
    mesh = _make_shape_mesh(args)
    medium = xform.isotropic_field(1.0, 1.0)
    if args.map and args.map != "identity":
        F = xform.lookup(args.map)
        medium = xform.push_forward(F, medium)
    report = spectra.schiffer_scan(mesh, medium, args.lambda_max, args.flatness_tol)
    payload = {
        "problem": "schiffer",
        "config": {
            "shape": args.shape,
            "lambda_max": args.lambda_max,
            "flatness_tol": args.flatness_tol,
            "map": args.map,
        },
        "eigenvalues": [float(v) for v in report.eigenvalues],
        "flatness": [float(v) for v in report.flatness],
        "clusters": report.clusters,
        "candidates": [
            {
                "lambda": c.lam,
                "boundary_flatness": c.boundary_flatness,
                "mode_index": c.mode_index,
            }
            for c in report.candidates
        ],
    }
    _atomic_write(args.out, json.dumps(payload))


def cmd_resonance(args) -> None:
    mesh = meshgen.make_disk(1.0, args.h)
    medium = xform.isotropic_field(1.0, args.q)
    result = spectra.resonance_eigs(mesh, medium, args.count)
    payload = _eig_payload("resonance", {"q": args.q, "h": args.h}, result)
    omegas = spectra.frequencies(result)
    payload["omegas"] = [float(w) for w in omegas]
    oracle = sorted(
        {
            round(bessel.bessel_root(order, k), 12)
            for order in (1, 2, 3, 4)
            for k in (1, 2)
        }
    )
    oracle = [w / math.sqrt(args.q) for w in oracle]
    payload["oracle_comparison"] = spectra.match_to_oracle(omegas, oracle[:4], 0.05)
    _atomic_write(args.out, json.dumps(payload))


def cmd_ite(args) -> None:
    mesh = meshgen.make_disk(1.0, args.h)
    cfg = spectra.harmonic_vs_medium_config(xform.isotropic_field(1.0, args.q))
    result = spectra.ite_eigs(mesh, cfg, args.count)
    payload = _eig_payload("ite", {"q": args.q, "h": args.h}, result)
    omegas = [float(math.sqrt(v)) for v in result.values]
    payload["omegas"] = omegas
    oracle = [w for _, w in spectra.ite_disk_oracle(args.q, 4, 3)][: args.count]
    payload["oracle_comparison"] = spectra.match_to_oracle(
        np.array(omegas), oracle, 0.05
    )
    _atomic_write(args.out, json.dumps(payload))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helmcloak", description="2D cloaking and spectral toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", required=True)
        p.add_argument("--format", choices=["json", "csv"], default="json")

    def add_shape(p):
        p.add_argument("--shape", choices=["disk", "annulus", "ellipse"], default="disk")
        p.add_argument("--radius", type=float, default=1.0)
        p.add_argument("--a", type=float)
        p.add_argument("--b", type=float)
        p.add_argument("--h", type=float, required=True)
        p.add_argument("--interface", type=float, default=None)

    p = sub.add_parser("mesh", help="generate a triangulation")
    add_shape(p)
    add_common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("pushforward", help="sample a pushed-forward medium")
    p.add_argument("--map", required=True)
    add_common(p)
    p.set_defaults(func=cmd_pushforward)

    p = sub.add_parser("dtn", help="boundary DtN matrix of a medium on a disk")
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--map", default="identity")
    add_common(p)
    p.set_defaults(func=cmd_dtn)

    p = sub.add_parser("sweep", help="regularization sweep of a cloak experiment")
    p.add_argument("--eps", required=True, help="comma-separated epsilon list")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--target-g", dest="target_g", default="iso:1")
    p.add_argument("--target-q", dest="target_q", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--dump-dtn", dest="dump_dtn", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schiffer", help="over-determined Neumann boundary scan")
    add_shape(p)
    p.add_argument("--lambda-max", dest="lambda_max", type=float, required=True)
    p.add_argument("--flatness-tol", dest="flatness_tol", type=float, default=1e-2)
    p.add_argument("--map", default=None)
    p.add_argument("--seed", type=int, default=0)
    add_common(p)
    p.set_defaults(func=cmd_schiffer)

    p = sub.add_parser("resonance", help="tied-boundary resonance spectrum (unit disk)")
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--h", type=float, required=True)
    add_common(p)
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("ite", help="two-field transmission spectrum (unit disk)")
    p.add_argument("--q", type=float, default=4.0)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--h", type=float, required=True)
    add_common(p)
    p.set_defaults(func=cmd_ite)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARAMETER if exc.code not in (0, None) else 0
    try:
        args.func(args)
    except ParameterError as exc:
        print(f"error: parameter: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except ResolutionError as exc:
        print(f"error: resolution: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except (ResonanceError, HelmcloakError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
