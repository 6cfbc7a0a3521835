"""Batch front end: generate transform chains, verify pairs, transport
cocycles, reduce trivializer degree, export heatmaps.

Exit codes: 0 success, 1 verification/certification failure, 2 bad input or
configuration.  All outputs are deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import backlund as bk
from . import cocycle as cc
from . import fieldio as fio
from .errors import CocycleLabError
from .smfield import Pair, l2_inner, mu_minus, mu_plus, star_curvature
from .smfield import FourierField
from .torus import SMPoint, TorusMetric, flat_closed_geodesics, integrate_geodesic

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BADINPUT = 2

DEFAULT_TOLS = {
    "structure": 1e-9,
    "transport": 1e-6,
    "recurrence": 1e-6,
    "energy": 1e-6,
    "h0-frame": 1e-6,
    "h0-vertical": 1e-6,
    "cocycle": 1e-5,
    "holonomy": 1e-5,
}


def _metric_from_config(doc: dict) -> TorusMetric:
    m = doc.get("metric", {})
    nx, ny = int(m.get("nx", 128)), int(m.get("ny", 128))
    lx, ly = float(m.get("lx", 1.0)), float(m.get("ly", 1.0))
    harmonics = m.get("harmonics", [])
    return TorusMetric.from_harmonics(nx, ny, lx, ly, harmonics)


def _load_config(path: str) -> dict:
    doc = fio.load_json(path)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    return doc


def cmd_generate(args) -> int:
    try:
        config = _load_config(args.config)
        metric = _metric_from_config(config)
        steps = config.get("chain", [])
        tols = config.get("tolerances", {})
        outdir = Path(args.outdir or config.get("outdir", "."))
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        chain = bk.generate_chain(
            metric,
            steps,
            cert_tol=float(tols.get("cert", bk.DEFAULT_CERT_TOL)),
            gmero_tol=float(tols.get("gmero", bk.DEFAULT_GMERO_TOL)),
        )
        final = chain.certs[-1].pair_out if chain.certs else Pair.trivial(metric)
    except CocycleLabError as exc:
        print(f"certification failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    hashes = {}
    hashes["pair.json"] = fio.save_pair(outdir / "pair.json", final)
    hashes["trivializer.json"] = fio.save_field(
        outdir / "trivializer.json", final.trivializer
    )
    certs_doc = {
        "steps": [
            {"step": k, "meta": c.meta, "residuals": c.residuals}
            for k, c in enumerate(chain.certs)
        ],
        "hashes": hashes,
    }
    fio.save_json(outdir / "certificates.json", certs_doc)
    worst = max(
        (v for c in chain.certs for v in c.residuals.values()), default=0.0
    )
    print(f"wrote {outdir}/pair.json trivializer.json certificates.json "
          f"(chain length {len(chain.certs)}, worst residual {worst:.3e})")
    return EXIT_OK


def _energy_residuals(pair: Pair, count: int, seed: int) -> float:
    """Energy identity on random single-mode fields:
    ||mu_+ u||^2 = ||mu_- u||^2 + (1/2) <(i *F - m K) u, u>."""
    met = pair.metric
    rng = np.random.default_rng(seed)
    sf = star_curvature(pair.conn)
    worst = 0.0
    for _ in range(count):
        m = int(rng.integers(-3, 4))
        h = rng.normal(size=(met.ny, met.nx, 3, 3)) + 1j * rng.normal(
            size=(met.ny, met.nx, 3, 3)
        )
        # keep the sample band-limited so mode calculus is exact
        hf = np.fft.fft2(h, axes=(0, 1))
        mask = np.zeros((met.ny, met.nx), dtype=bool)
        kcut = 6
        mask[:kcut, :kcut] = mask[:kcut, -kcut:] = True
        mask[-kcut:, :kcut] = mask[-kcut:, -kcut:] = True
        h = np.fft.ifft2(hf * mask[..., None, None], axes=(0, 1))
        u = FourierField(met, {m: h})
        up = mu_plus(u, pair.conn)
        um = mu_minus(u, pair.conn)
        lhs = l2_inner(up, up).real
        rhs = l2_inner(um, um).real
        op = FourierField(
            met, {m: (1j * sf - m * met.gauss[..., None, None] * np.eye(3)) @ h}
        )
        rhs += 0.5 * l2_inner(op, u).real
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _verify_report(pair: Pair, tols: dict, seed: int, geodesic_count: int,
                   t_final: float, dt: float) -> dict:
    met = pair.metric
    u = pair.trivializer
    residuals = {}
    structure = max(
        pair.conn.antisymmetry_residual(),
        pair.higgs.antisymmetry_residual(),
        u.orthogonality_residual(),
        u.reality_residual(),
    )
    residuals["structure"] = float(structure)
    residuals["transport"] = float(cc.transport_residual_field(pair))
    residuals["recurrence"] = float(max(cc.recurrence_residuals(pair).values()))
    residuals["energy"] = float(_energy_residuals(pair, 8, seed))
    h0 = cc.h0_residuals(u, pair.higgs)
    residuals.update({k: float(v) for k, v in h0.items()})
    rng = np.random.default_rng(seed + 1)
    ctx = cc.TransportContext(pair)
    errors = {}
    tag = "holonomy" if met.is_flat else "cocycle"
    try:
        worst = 0.0
        if met.is_flat:
            for p0, t_closed in flat_closed_geodesics(met, geodesic_count, seed=seed):
                worst = max(
                    worst, cc.holonomy_closed(pair, p0, t_closed, dt, context=ctx)
                )
        else:
            for _ in range(geodesic_count):
                p0 = SMPoint(
                    rng.uniform(0, met.lx), rng.uniform(0, met.ly),
                    rng.uniform(0, 2 * np.pi),
                )
                tv = cc.triviality_residual(pair, p0, t_final, dt, context=ctx)
                worst = max(worst, tv.max_residual)
        residuals[tag] = float(worst)
    except CocycleLabError as exc:
        # e.g. orthogonality drift blowing past its bound on a broken pair;
        # report it as a failure instead of crashing the run
        errors[tag] = f"{type(exc).__name__}: {exc}"
    merged = dict(DEFAULT_TOLS)
    merged.update({k: float(v) for k, v in tols.items()})
    failures = [k for k, v in residuals.items() if v > merged.get(k, 1e-6)]
    failures += sorted(errors)
    return {
        "residuals": residuals,
        "tolerances": {k: merged.get(k, 1e-6) for k in residuals},
        "errors": errors,
        "failures": failures,
        "pass": not failures,
    }


def cmd_verify(args) -> int:
    try:
        pair = fio.load_pair(args.pair, trivializer_path=args.trivializer)
        tols = _load_config(args.tolerances) if args.tolerances else {}
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    report = _verify_report(
        pair, tols, seed=args.seed, geodesic_count=args.geodesics,
        t_final=args.t_final, dt=args.dt,
    )
    for k in sorted(report["residuals"]):
        v = report["residuals"][k]
        tol = report["tolerances"][k]
        status = "PASS" if v <= tol else "FAIL"
        print(f"{k:12s} {v:12.4e}  (tol {tol:.1e})  {status}")
    for k in sorted(report.get("errors", {})):
        print(f"{k:12s} {'n/a':>12s}  ({report['errors'][k]})  FAIL")
    if args.report:
        fio.save_json(args.report, report)
    if report["pass"]:
        print("all identities verified")
        return EXIT_OK
    print("failed: " + ", ".join(report["failures"]), file=sys.stderr)
    return EXIT_FAIL


def cmd_transport(args) -> int:
    try:
        pair = fio.load_pair(args.pair)
        p0 = SMPoint(args.x, args.y, args.theta)
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    try:
        result = cc.transport(pair, p0, args.t_final, args.dt,
                              save_every=args.save_every)
    except CocycleLabError as exc:
        print(f"transport failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    fio.write_transport_csv(args.out, result)
    print(f"wrote {args.out} ({len(result.times)} samples, "
          f"final drift {result.drift[-1]:.3e})")
    return EXIT_OK


def cmd_reduce(args) -> int:
    try:
        pair = fio.load_pair(args.pair, trivializer_path=args.trivializer)
        outdir = Path(args.outdir)
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        red = bk.reduce_degree(pair)
    except CocycleLabError as exc:
        print(f"reduction failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    fio.save_field(outdir / "g.json", red.g.field())
    fio.save_field(outdir / "trivializer_reduced.json", red.u)
    fio.save_pair(outdir / "pair_reduced.json", red.pair)
    fio.save_json(outdir / "reduction_report.json", {"residuals": red.residuals})
    print(f"reduced degree {pair.trivializer.degree} -> {red.u.degree}, "
          f"field residual {red.residuals['reduced-field']:.3e}")
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        doc = fio.load_json(args.field)
        if "modes" in doc:
            field = fio.field_from_json(doc)
        else:
            pair = fio.pair_from_json(doc)
            field = pair.higgs.as_field()
        image = fio.heatmap_from_field(field, args.selector)
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    lo, hi = fio.write_pgm(args.out, image, bits=args.bits)
    print(f"wrote {args.out} (range [{lo:.6g}, {hi:.6g}])")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cocyclelab",
        description="Construct and certify cohomologically trivial SO(3) pairs "
        "on the unit tangent bundle of a 2-torus.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a transform chain from a config file")
    g.add_argument("config")
    g.add_argument("--outdir", default=None)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="run the residual suite on a stored pair")
    v.add_argument("pair")
    v.add_argument("trivializer")
    v.add_argument("--tolerances", default=None, help="JSON file overriding tolerances")
    v.add_argument("--report", default=None, help="write the JSON report here")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--geodesics", type=int, default=3)
    v.add_argument("--t-final", type=float, default=3.0)
    v.add_argument("--dt", type=float, default=1e-3)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("transport", help="transport the cocycle along one geodesic")
    t.add_argument("pair")
    t.add_argument("--x", type=float, required=True)
    t.add_argument("--y", type=float, required=True)
    t.add_argument("--theta", type=float, required=True)
    t.add_argument("--t-final", type=float, required=True)
    t.add_argument("--dt", type=float, default=1e-3)
    t.add_argument("--save-every", type=int, default=10)
    t.add_argument("--out", default="transport.csv")
    t.set_defaults(func=cmd_transport)

    r = sub.add_parser("reduce", help="lower the trivializer fiber degree by one")
    r.add_argument("pair")
    r.add_argument("trivializer")
    r.add_argument("--outdir", default=".")
    r.set_defaults(func=cmd_reduce)

    e = sub.add_parser("export", help="render a stored field as a PGM heatmap")
    e.add_argument("field")
    e.add_argument("--selector", default="norm",
                   help="'norm' or 'm,i,j,part' with part in re/im/abs")
    e.add_argument("--bits", type=int, default=8, choices=(8, 16))
    e.add_argument("--out", default="field.pgm")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
