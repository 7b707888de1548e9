"""Command-line front end.

Commands: ``simulate``, ``learn``, ``validate`` and ``scanmap``. Each one
writes plain CSV/JSON outputs plus a provenance sidecar that records every
argument, the seed, the package version and SHA-256 digests of the inputs.

Exit codes: 0 success, 1 a validation check failed, 2 usage or
configuration error, 3 I/O error (including malformed input files).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .bayes_net import (NetParams, analytic_histogram, bootstrap_self_distance,
                        clipped_histogram, sample_beams, sample_dataset)
from .beam_model import (BeamParams, OcclusionEnvironment, occluded_count_partial_sum,
                         occluded_count_pmf, p_occl, rbbm_density, rbbm_exact_numeric,
                         verify_sum_identity)
from .dataset import DatasetFormatError, load_dataset
from .estimators import (VBPriors, default_priors, density_curve, fit_distances,
                         ml_em_fit, default_thrun_init, default_vb_init, thrun_ml_fit,
                         vb_em_fit, vb_point_estimates)
from .geometry import Pose, ScanGeometry, load_map, simulate_ideal_scan
from .metrics import build_histogram, default_edges, hellinger_distance
from .scan_model import (GridSpec, LocalRegion, Scan, ScanModelConfig, beam_marginal,
                         probability_map)
from .scenarios import room_with_box

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
CURVE_POINTS = 1001


class UsageError(Exception):
    pass


def _json_dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_provenance(path, command, args, inputs=()):
    """Sidecar with everything needed to rerun the command byte-for-byte."""
    params = {k: v for k, v in vars(args).items() if k != "func"}
    _json_dump({
        "command": command,
        "arguments": params,
        "seed": params.get("seed"),
        "version": __version__,
        "inputs": {str(p): _digest(p) for p in inputs},
    }, path)


def _out_dir(path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _floats(text, n, name):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name} must be {n} comma-separated numbers") from None
    if len(vals) != n:
        raise UsageError(f"{name} must be {n} comma-separated numbers")
    return vals


# -- simulate -------------------------------------------------------------

def cmd_simulate(args):
    params = NetParams(args.p, args.sigma_m, args.pi3, args.pi4, args.z_max)
    if args.per_range < 1:
        raise UsageError(f"--per-range must be >= 1, got {args.per_range}")
    ds = sample_dataset(args.z_star, params, args.per_range, args.seed,
                        with_cause=not args.no_cause)
    out = Path(args.out)
    ds.to_csv(out)
    write_provenance(out.with_name(out.name + ".provenance.json"), "simulate", args)
    return EXIT_OK


# -- learn ----------------------------------------------------------------

def _trace_rows(trace):
    return [{"iteration": i, "loglik": ll, "params": p.to_json()}
            for i, (ll, p) in enumerate(zip(trace.loglik, trace.params))]


def _fit(ds, args):
    """Fit one estimator; returns ``(model, report)``."""
    z_max = args.z_max
    report = {"estimator": args.estimator, "samples": len(ds), "iterations": args.iters}
    if args.estimator == "ml":
        init = BeamParams(args.sigma_m, args.p_prime, args.pi3, args.pi4, z_max)
        model, trace = ml_em_fit(ds, init, iters=args.iters)
        report.update(init=init.to_json(), params=model.to_json(),
                      weights=model.weights.as_array().tolist(),
                      trace=_trace_rows(trace), monotone=trace.is_monotone())
    elif args.estimator == "thrun":
        init = default_thrun_init(z_max)
        model, trace = thrun_ml_fit(ds, init, iters=args.iters)
        report.update(init=init.to_json(), params=model.to_json(), trace=_trace_rows(trace),
                      monotone=trace.is_monotone())
    else:
        if np.unique(ds.z_star).size != 1:
            raise UsageError("the vb estimator needs data from a single expected range; "
                             "use --per-bucket")
        priors = default_priors(ds, z_max, args.bins)
        if args.prior_mean is not None:
            priors = VBPriors(priors.alpha0, priors.beta0, args.prior_mean, priors.W0,
                              priors.nu0)
        init = default_vb_init(ds, z_max, args.bins)
        model, history = vb_em_fit(ds, priors, init, iters=args.iters, z_max=z_max,
                                   return_history=True)
        report.update(init={"posterior": init.posterior.to_json(), "p_prime": init.p_prime},
                      priors=dict(vars(priors)), posterior=model.to_json(),
                      params=vb_point_estimates(model, z_max).to_json(),
                      trace=[{"iteration": i + 1, "posterior": h.to_json()}
                             for i, h in enumerate(history)])
    d1, d2 = fit_distances(model, ds, default_edges(z_max, args.bins), z_max)
    report.update(d1_kl=d1, d2_hellinger=d2, bins=args.bins)
    return model, report


def cmd_learn(args):
    ds = load_dataset(args.data, z_max=args.z_max)
    if args.per_bucket:
        parts = list(ds.buckets(args.bucket_width))
    else:
        parts = [(None, ds)]
    grid = np.linspace(0.0, args.z_max, CURVE_POINTS)
    reports, curves = [], []
    for centre, part in parts:
        model, rep = _fit(part, args)
        if centre is not None:
            rep["z_star"] = centre
        reports.append(rep)
        curves.append(density_curve(model, part, grid, args.z_max))
    out = _out_dir(args.out_dir)
    _json_dump(reports[0] if not args.per_bucket else {"buckets": reports},
               out / "report.json")
    header = "z," + ",".join(f"density_{i}" for i in range(len(curves)))
    if not args.per_bucket:
        header = "z,density"
    rows = np.column_stack([grid] + curves).tolist()
    lines = [header] + [",".join(repr(v) for v in row) for row in rows]
    (out / "curve.csv").write_text("\n".join(lines) + "\n")
    write_provenance(out / "provenance.json", "learn", args, inputs=[args.data])
    return EXIT_OK


# -- validate -------------------------------------------------------------

IDENTITY_E = tuple(round(0.1 * i, 1) for i in range(1, 10))
COUNT_U = (0.1, 0.25, 0.5, 0.9)
COUNT_P = (0.1, 0.65, 0.9)


def _check(name, value, threshold, **extra):
    return {"name": name, "value": value, "threshold": threshold,
            "passed": bool(value < threshold), **extra}


def cmd_validate(args):
    if args.seed is None:
        raise UsageError("validate requires --seed")
    net = NetParams(args.p, args.sigma_m, args.pi3, args.pi4, args.z_max)
    bp = net.beam_params(args.z_star)
    out = _out_dir(args.out_dir)
    checks = []

    # normalisation of the occlusion density
    worst = 0.0
    for pp in [round(0.1 * i, 1) for i in range(10)]:
        val, _ = integrate.quad(lambda z: float(p_occl(z, args.z_star, pp)), 0.0,
                                args.z_star, epsabs=1e-13, epsrel=1e-12)
        worst = max(worst, abs(val - 1.0))
    checks.append(_check("occlusion_normalization", worst, 1e-9))

    # series identity and occluded-count pmf
    rows, worst = ["k,e,partial_sum,closed_form,rel_error"], 0.0
    for k in range(11):
        for e in IDENTITY_E:
            s, closed = verify_sum_identity(k, e, 500)
            rel = abs(s - closed) / closed
            worst = max(worst, rel)
            rows.append(f"{k},{e!r},{s!r},{closed!r},{rel!r}")
    (out / "identity_sweep.csv").write_text("\n".join(rows) + "\n")
    checks.append(_check("series_identity", worst, 1e-10))
    worst = 0.0
    for u in COUNT_U:
        for p in COUNT_P:
            env = OcclusionEnvironment(p, u)
            for k in range(11):
                worst = max(worst, abs(occluded_count_pmf(k, env)
                                       - occluded_count_partial_sum(k, env, 200)))
    checks.append(_check("occluded_count_pmf", worst, 1e-10))

    # closed form vs numeric marginalisation, away from both boundaries
    lo, hi = 6 * args.sigma_m, args.z_star - 6 * args.sigma_m
    if hi > lo:
        z = np.linspace(lo, hi, 200)
        exact = rbbm_exact_numeric(z, args.z_star, bp, step=1e-4)
        rel = float(np.max(np.abs(rbbm_density(z, args.z_star, bp) - exact) / exact))
        checks.append(_check("closed_form_vs_numeric", rel, 0.01, z_range=[lo, hi]))

    # Monte Carlo against the exact clipped marginal
    edges = default_edges(args.z_max, args.bins)
    reference = clipped_histogram(args.z_star, net, edges)
    z = sample_beams(np.full(args.draws, float(args.z_star)), net, args.seed).z
    hist = build_histogram(z, edges)
    threshold = bootstrap_self_distance(reference.mass, args.draws, reps=args.bootstrap,
                                        seed=args.seed + 1)
    checks.append(_check("monte_carlo_vs_exact", hellinger_distance(hist, reference),
                         threshold, draws=args.draws, bins=args.bins))
    report = {
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        "diagnostics": {
            "monte_carlo_vs_closed_form": hellinger_distance(
                hist, analytic_histogram(args.z_star, net, edges)),
        },
    }
    _json_dump(report, out / "validation.json")
    write_provenance(out / "provenance.json", "validate", args)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: "
              f"{c['value']:.3e} (threshold {c['threshold']:.3e})")
    return EXIT_OK if report["passed"] else EXIT_FAILED


# -- scanmap --------------------------------------------------------------

def _load_scan(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["angle", "z"]:
            raise DatasetFormatError(f"{path}:1: expected header 'angle,z'")
        for line, text in enumerate(fh, start=2):
            if not text.strip():
                continue
            try:
                a, z = (float(v) for v in text.split(","))
            except ValueError:
                raise DatasetFormatError(f"{path}:{line}: expected two numbers") from None
            rows.append((a, z))
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    arr = np.array(rows)
    return Scan(arr[:, 1], ScanGeometry(arr[:, 0]))


def _write_scan(scan, path):
    lines = ["angle,z"] + [f"{a!r},{z!r}" for a, z in
                           zip(scan.geometry.angles.tolist(), scan.z.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_scanmap(args):
    inputs = []
    if args.map:
        segmap = load_map(args.map)
        inputs.append(args.map)
        pose = Pose(*_floats(args.pose, 3, "--pose")) if args.pose else Pose(0.0, 0.0, 0.0)
        geometry, beams = ScanGeometry.fan(args.beams_count, math.radians(args.fov)), None
    else:
        sc = room_with_box()
        segmap, geometry = sc.segmap, sc.geometry
        pose = Pose(*_floats(args.pose, 3, "--pose")) if args.pose else sc.pose
        beams = [sc.grazing_beam, sc.smooth_beam]
    z_max = args.z_max if args.z_max is not None else segmap.z_max
    params = BeamParams(args.sigma_m, args.p_prime, args.pi3, args.pi4, z_max)
    if args.samples_L < 2:
        raise UsageError("--samples-L must be >= 2 (the Gaussian baseline needs two scans)")
    region = LocalRegion(args.region_trans, math.radians(args.region_rot))
    cfg = ScanModelConfig(args.samples_L, args.smooth_C, args.mode)
    root = np.random.SeedSequence(args.seed)
    scan_seed, model_seed, map_seed = root.spawn(3)

    if args.scan:
        scan = _load_scan(args.scan)
        inputs.append(args.scan)
        geometry = scan.geometry
    else:
        ideal = simulate_ideal_scan(segmap, pose, geometry)
        noise = np.random.default_rng(scan_seed).standard_normal(ideal.size)
        scan = Scan(np.clip(ideal + args.sigma_m * noise, 0.0, z_max), geometry)
    if args.beams:
        beams = [int(b) for b in args.beams.split(",")]
    beams = beams or [0]
    for b in beams:
        if not 0 <= b < geometry.count:
            raise UsageError(f"beam index {b} out of range for {geometry.count} beams")

    out = _out_dir(args.out_dir)
    _write_scan(scan, out / "scan.csv")
    if args.grid:
        x0, x1, nx, y0, y1, ny = _floats(args.grid, 6, "--grid")
    else:
        x0, x1, nx, y0, y1, ny = pose.x - 0.1, pose.x + 0.1, 11, pose.y - 0.1, pose.y + 0.1, 11
    spec = GridSpec(x0, x1, int(nx), y0, y1, int(ny), heading=pose.heading)
    pmap = probability_map(scan, segmap, params, region, cfg, spec, map_seed, n_jobs=args.n_jobs)
    pmap.to_csv(out / "probability_map.csv")
    pmap.to_csv(out / "log_probability_map.csv", log=True)
    grid = np.linspace(0.0, z_max, args.marginal_points)
    for b in beams:
        for model in ("sample", "gaussian"):
            m = beam_marginal(b, pose, segmap, params, region, cfg, grid, model_seed, geometry,
                              model=model)
            m.to_csv(out / f"marginal_beam{b}_{model}.csv")
    write_provenance(out / "provenance.json", "scanmap", args, inputs=inputs)
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="rbbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def net_flags(p, sigma=0.15):
        p.add_argument("--p", type=float, default=0.8,
                       help="probability that another unmodeled object exists")
        p.add_argument("--sigma-m", type=float, default=sigma)
        p.add_argument("--pi3", type=float, default=0.2)
        p.add_argument("--pi4", type=float, default=0.02)
        p.add_argument("--z-max", type=float, default=10.0)

    p = sub.add_parser("simulate", help="sample readings from the generative network")
    net_flags(p)
    p.add_argument("--z-star", type=float, action="append",
                   help="expected range; repeat for several (default 5)")
    p.add_argument("--per-range", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-cause", action="store_true", help="omit the cause column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", help="fit a beam model to a z,z_star CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--estimator", choices=("ml", "vb", "thrun"), default="ml")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--z-max", type=float, default=10.0)
    p.add_argument("--sigma-m", type=float, default=0.5, help="ml initial sigma_m")
    p.add_argument("--p-prime", type=float, default=0.4, help="ml initial p'")
    p.add_argument("--pi3", type=float, default=0.2, help="ml initial pi3")
    p.add_argument("--pi4", type=float, default=0.1, help="ml initial pi4")
    p.add_argument("--per-bucket", action="store_true",
                   help="fit each expected range separately instead of pooling")
    p.add_argument("--bucket-width", type=float, default=0.0,
                   help="z_star bucket width for --per-bucket (0 groups equal values)")
    p.add_argument("--prior-mean", type=float, default=None,
                   help="vb prior hit mean (default: most probable bin)")
    p.add_argument("--seed", type=int, default=None, help="recorded only; fitting is deterministic")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("validate", help="oracle checks of the closed forms and the sampler")
    net_flags(p)
    p.add_argument("--z-star", type=float, default=5.0)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scanmap", help="probability map and beam marginals of a full scan")
    p.add_argument("--map", help="segment map JSON (default: room with a central box)")
    p.add_argument("--scan", help="angle,z CSV (default: simulated at --pose)")
    p.add_argument("--pose", help="x,y,heading of the sensor")
    p.add_argument("--beams-count", type=int, default=9, help="beams of the simulated scan")
    p.add_argument("--fov", type=float, default=120.0, help="field of view in degrees")
    p.add_argument("--beams", help="comma-separated beam indices for marginals")
    p.add_argument("--sigma-m", type=float, default=0.01)
    p.add_argument("--p-prime", type=float, default=0.0)
    p.add_argument("--pi3", type=float, default=0.0)
    p.add_argument("--pi4", type=float, default=0.0)
    p.add_argument("--z-max", type=float, default=None)
    p.add_argument("--region-trans", type=float, default=0.01, help="meters")
    p.add_argument("--region-rot", type=float, default=5.0, help="degrees")
    p.add_argument("--samples-L", type=int, default=150)
    p.add_argument("--smooth-C", type=float, default=20.0)
    p.add_argument("--mode", choices=("static_hit_only", "dynamic_full_mixture"),
                   default="static_hit_only")
    p.add_argument("--grid", help="x0,x1,nx,y0,y1,ny")
    p.add_argument("--marginal-points", type=int, default=1001)
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_scanmap)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "z_star", "") is None:
        args.z_star = [5.0]
    try:
        return args.func(args)
    except (UsageError, ValueError) as err:
        if isinstance(err, DatasetFormatError):
            print(f"rbbm: error: {err}", file=sys.stderr)
            return EXIT_IO
        print(f"rbbm {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"rbbm {args.command}: error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
