"""Command-line interface: ``semsig {synth,build,inspect,query,eval,sweep}``.

Every command that writes files also writes a JSON manifest next to its
main output with the resolved parameters, seed, input digests and tool
version. Data goes to stdout or files; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .distortion import LEVEL_OPS, DistortionConfig
from .evaluation import (
    cdf_violations,
    default_workers,
    filter_unambiguous,
    run_benchmark,
    sample_query_set,
    sweep_quantization,
    sweep_visibility,
)
from .ingest import (
    PARIS_ANCHOR,
    DatabaseFormatError,
    SyntheticCityConfig,
    database_text,
    generate_synthetic_city,
    load_database,
    parse_intensity_profile,
    read_objects,
    save_database,
    write_objects_csv,
)
from .metrics import MetricKind
from .model import ANGLE_PART, TYPE_PART, BuildParams, GeoPoint, SignatureFormatError, signature_from_string
from .retrieval import FusionPolicy, Protocol, rank
from .siggen import BBox, build_database

log = logging.getLogger("semsig")


class CliError(Exception):
    pass


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, command: str, params: dict, seed, inputs: list[str], outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "master_seed": seed,
        "inputs": {p: _digest(p) for p in inputs},
        "outputs": {p: _digest(p) for p in outputs},
        "tool_version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _metric(text: str) -> MetricKind:
    try:
        return MetricKind.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown metric {text!r} (jaccard, histogram, edit)") from None


def _bbox(text: str) -> BBox:
    try:
        return BBox.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _point(text: str) -> GeoPoint:
    try:
        lon, lat = (float(v) for v in text.split(","))
        return GeoPoint(lon, lat)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected LON,LAT: {e}") from None


def _area(text: str) -> tuple[float, float]:
    try:
        w, h = (float(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected WIDTHxHEIGHT in meters, e.g. 1000x1000") from None
    return w, h


def _add_policy_args(p: argparse.ArgumentParser, default_t: int = 100) -> None:
    p.add_argument("--protocol", choices=["full", "two-stage", "single"], default="full",
                   help="ranking protocol (default: full)")
    p.add_argument("--first-part", choices=[TYPE_PART, ANGLE_PART], default=TYPE_PART,
                   help="part ranked first by two-stage fusion (default: type)")
    p.add_argument("--part", choices=[TYPE_PART, ANGLE_PART], default=TYPE_PART,
                   help="signature part used by the single protocol (default: type)")
    p.add_argument("--alpha", type=float, default=0.5, help="type-part weight; angle weight is 1-alpha (default: 0.5)")
    p.add_argument("--k", type=float, default=5.0, help="two-stage survivor percentage (default: 5)")
    p.add_argument("--t", type=int, default=default_t, help=f"number of results (default: {default_t})")
    p.add_argument("--metric-type", type=_metric, default=MetricKind.EDIT, help="metric for the type part (default: edit)")
    p.add_argument("--metric-angle", type=_metric, default=MetricKind.EDIT, help="metric for the angle part (default: edit)")


def _policy(args) -> tuple[FusionPolicy, Protocol]:
    policy = FusionPolicy(args.metric_type, args.metric_angle, args.alpha, args.k, args.t)
    if args.protocol == "full":
        protocol = Protocol.FULL
    elif args.protocol == "single":
        protocol = Protocol.SINGLE
    elif args.first_part == TYPE_PART:
        protocol = Protocol.TWO_STAGE_TYPE_FIRST
    else:
        protocol = Protocol.TWO_STAGE_ANGLE_FIRST
    return policy, protocol


def _policy_params(args, policy, protocol) -> dict:
    d = policy.describe()
    d["protocol"] = protocol.value
    if protocol is Protocol.SINGLE:
        d["part"] = args.part
    return d


def _load_objects(path):
    result = read_objects(path)
    for err in result.errors:
        print(f"{path}: {err}", file=sys.stderr)
    if result.errors:
        print(f"{path}: skipped {len(result.errors)} malformed rows", file=sys.stderr)
    return result.objects


def cmd_synth(args) -> int:
    w, h = args.area
    cfg = SyntheticCityConfig(w, h, parse_intensity_profile(args.intensity_profile), args.seed, args.anchor)
    objects = generate_synthetic_city(cfg)
    write_objects_csv(objects, args.out)
    bbox = cfg.bbox()
    print(f"wrote {len(objects)} objects to {args.out}", file=sys.stderr)
    print(f"bbox: {bbox}", file=sys.stderr)
    _write_manifest(
        f"{args.out}.manifest.json", "synth",
        {"area_m": [w, h], "intensity_profile": args.intensity_profile, "intensities": cfg.intensities,
         "anchor": [cfg.anchor.lon, cfg.anchor.lat], "bbox": str(bbox)},
        args.seed, [], [args.out],
    )
    return 0


def cmd_build(args) -> int:
    objects = _load_objects(args.objects)
    params = BuildParams(args.range, args.step, args.qlevels)
    db = build_database(objects, params, args.bbox)
    size = save_database(db, args.out)
    n = len(db)
    mean_len = sum(r.signature.n for r in db.records) / n if n else 0.0
    print(f"visibility_range_m,{params.visibility_range_m!r}")
    print(f"grid_step_m,{params.grid_step_m!r}")
    print(f"quantization_levels,{params.quantization_levels}")
    print(f"signatures,{n}")
    print(f"mean_signature_length,{mean_len:.2f}")
    print(f"covered_area_km2,{n * params.grid_step_m ** 2 / 1e6:.4f}")
    print(f"file_bytes,{size}")
    print(f"bytes_per_record,{size / n if n else 0.0:.2f}")
    _write_manifest(
        f"{args.out}.manifest.json", "build",
        {"bbox": str(args.bbox), "range": params.visibility_range_m, "step": params.grid_step_m,
         "qlevels": params.quantization_levels, "origin": [db.origin.lon, db.origin.lat],
         "empty_cells": "dropped"},
        None, [args.objects], [args.out],
    )
    return 0


def cmd_inspect(args) -> int:
    db = load_database(args.db)
    if args.cell is None:
        sys.stdout.write(database_text(db))
        return 0
    try:
        r = db.record(args.cell)
    except KeyError as e:
        raise CliError(str(e.args[0])) from None
    print(f"cell_id,{r.cell_id}")
    print(f"lon,{r.lon_e7 / 1e7:.7f}")
    print(f"lat,{r.lat_e7 / 1e7:.7f}")
    print(f"n,{r.signature.n}")
    print(f"signature,{r.signature}")
    return 0


def _print_candidates(cands, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rank", "cell_id", "lon", "lat", "score"])
    for c in cands:
        w.writerow([c.rank, c.cell_id, f"{c.cell_center.lon:.7f}", f"{c.cell_center.lat:.7f}", repr(c.score)])


def cmd_query(args) -> int:
    try:
        sig = signature_from_string(args.signature)
    except SignatureFormatError as e:
        raise CliError(f"bad signature {args.signature!r}: {e}") from None
    db = load_database(args.db)
    sig.check(db.alphabet, db.params.quantization_levels)
    policy, protocol = _policy(args)
    _print_candidates(rank(db, sig, policy, protocol, part=args.part), sys.stdout)
    return 0


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def cmd_eval(args) -> int:
    db = load_database(args.db)
    policy, protocol = _policy(args)
    if args.queries > len(db):
        raise CliError(f"--queries {args.queries} exceeds the {len(db)} database records")
    sampled = queries = sample_query_set(db, args.queries, args.seed)
    kept_fraction = 1.0
    if args.unambiguous:
        queries, kept_fraction = filter_unambiguous(sampled, db)
        print(f"unambiguous queries: {len(queries)} ({100 * kept_fraction:.1f}%)", file=sys.stderr)
    dist = DistortionConfig(args.distortion, angle_noise_sigma=args.angle_sigma, angle_noise_clip=args.angle_clip)
    report = run_benchmark(db, queries, policy, dist, protocol, part=args.part,
                           master_seed=args.seed, workers=args.workers)
    violations = []
    if args.unambiguous and len(queries) < len(sampled):
        # filtering should never lower the CDF; check it against the unfiltered run
        baseline = run_benchmark(db, sampled, policy, dist, protocol, part=args.part,
                                 master_seed=args.seed, workers=args.workers)
        violations = cdf_violations(report.cdf, baseline.cdf)
        if violations:
            print("warning: the unambiguous CDF falls below the unfiltered one at "
                  + ", ".join(f"{e:g} m" for e in violations), file=sys.stderr)
    prefix = args.out_prefix
    files = [f"{prefix}.cdf.csv", f"{prefix}.recall.csv", f"{prefix}.summary.csv"]
    _write_rows(files[0], ["error_m", "cum_prob"], [(f"{e:g}", _fmt(p)) for e, p in report.cdf.points])
    _write_rows(files[1], ["rank_pct", "recall"], [(f"{r:g}", _fmt(f)) for r, f in report.recall.points])
    _write_rows(files[2], ["queries", "p_error_le_50m", "recall_at_10pct", "unambiguous_fraction"],
                [(report.n_queries, _fmt(report.p_error_50), _fmt(report.recall_at_10), _fmt(kept_fraction))])
    # wall-clock numbers vary run to run; they live outside the reproducible files
    t = report.timing()
    _write_rows(f"{prefix}.timing.csv", ["mean_query_ms", "median_query_ms", "p95_query_ms"],
                [(f"{t['mean_ms']:.3f}", f"{t['median_ms']:.3f}", f"{t['p95_ms']:.3f}")])
    params = _policy_params(args, policy, protocol)
    params.update({"queries": args.queries, "distortion": dist.describe(), "unambiguous_only": args.unambiguous,
                   "cdf_violations_m": violations})
    _write_manifest(f"{prefix}.manifest.json", "eval", params, args.seed, [args.db], files)
    print(f"P(error<=50m)={report.p_error_50:.4f} recall@10%={report.recall_at_10:.4f} "
          f"mean_query_ms={t['mean_ms']:.2f}", file=sys.stderr)
    return 0


def _sweep_spec(text: str) -> tuple[str, list]:
    key, _, values = text.partition(":")
    key = key.strip().lower()
    if key not in ("range", "qlevels") or not values:
        raise argparse.ArgumentTypeError(f"unknown sweep {text!r}; use range:V1,V2,... or qlevels:V1,V2,...")
    try:
        vals = [float(v) if key == "range" else int(v) for v in values.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sweep values in {text!r}") from None
    return key, vals


def cmd_sweep(args) -> int:
    objects = _load_objects(args.objects)
    policy, protocol = _policy(args)
    key, values = args.sweep
    base = BuildParams(args.range, args.step, args.qlevels)
    dist = DistortionConfig(args.distortion)
    fn = sweep_visibility if key == "range" else sweep_quantization
    rows = fn(objects, args.bbox, base, values, policy, dist, protocol,
              n_queries=args.queries, seed=args.seed, workers=args.workers)
    header = [key, "records", "mean_length", "p_error_le_50m", "recall_at_10pct"]
    out_rows = [(f"{r.value:g}", r.records, f"{r.mean_length:.3f}", _fmt(r.p_error_50), _fmt(r.recall_at_10))
                for r in rows]
    if args.out:
        _write_rows(args.out, header, out_rows)
        params = _policy_params(args, policy, protocol)
        params.update({"sweep": [key, values], "bbox": str(args.bbox), "queries": args.queries,
                       "distortion": dist.describe(), "range": args.range, "step": args.step,
                       "qlevels": args.qlevels})
        _write_manifest(f"{args.out}.manifest.json", "sweep", params, args.seed, [args.objects], [args.out])
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(out_rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semsig",
        description="Semantic-signature localization: build signature databases, query them and benchmark retrieval.",
        epilog="Set SEMSIG_WORKERS to change the default evaluation worker count; "
               "SEMSIG_PURE_PYTHON=1 forces the numpy kernels.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic object CSV")
    p.add_argument("--area", type=_area, default=(1000.0, 1000.0), help="WIDTHxHEIGHT in meters (default: 1000x1000)")
    p.add_argument("--intensity-profile", default="street",
                   help="paris[:SCALE], street (paris scaled to ~14 objects per signature) or uniform:N (default: street)")
    p.add_argument("--anchor", type=_point, default=PARIS_ANCHOR, help="south-west corner LON,LAT (default: 2.35,48.85)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="build a signature database from objects")
    p.add_argument("--objects", required=True, help="object CSV (id,class,lon,lat) or GeoJSON")
    p.add_argument("--bbox", type=_bbox, required=True, help="LONMIN,LATMIN,LONMAX,LATMAX")
    p.add_argument("--range", type=float, default=30.0, help="visibility range in meters (default: 30)")
    p.add_argument("--step", type=float, default=10.0, help="grid step in meters (default: 10)")
    p.add_argument("--qlevels", type=int, default=16, help="angle quantization levels (default: 16)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("inspect", help="print a database header or one record")
    p.add_argument("--db", required=True)
    p.add_argument("--cell", type=int)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("query", help="rank database cells for one signature")
    p.add_argument("--db", required=True)
    p.add_argument("--signature", required=True, help='signature text, e.g. "BD|0;4"')
    _add_policy_args(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="run the localization benchmark")
    p.add_argument("--db", required=True)
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distortion", choices=list(LEVEL_OPS), default="none",
                   help="none/light/medium/strong = 0/1/7/13 operations plus angle noise (default: none)")
    p.add_argument("--angle-sigma", type=float, default=5.0, help="angle noise std in degrees (default: 5)")
    p.add_argument("--angle-clip", type=float, default=30.0, help="angle noise clip in degrees (default: 30)")
    p.add_argument("--unambiguous", action="store_true", help="only use queries with a unique signature")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: $SEMSIG_WORKERS or 1)")
    p.add_argument("--out-prefix", required=True)
    _add_policy_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="rebuild databases over a parameter range and benchmark each")
    p.add_argument("--objects", required=True)
    p.add_argument("--bbox", type=_bbox, required=True)
    p.add_argument("--range", type=float, default=30.0)
    p.add_argument("--step", type=float, default=10.0)
    p.add_argument("--qlevels", type=int, default=16)
    p.add_argument("--sweep", type=_sweep_spec, required=True, help="range:20,30,40 or qlevels:8,16,24,32")
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distortion", choices=list(LEVEL_OPS), default="medium")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    _add_policy_args(p, default_t=1)
    p.set_defaults(protocol="two-stage")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = default_workers()
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError, DatabaseFormatError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"semsig {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
