"""Compare the compiled and pure-Python scan backends on a synthetic city.

    python3 benchmarks/bench_kernels.py --size 1000 --queries 20

Prints the median per-query time of every metric/part scan and of full
versus two-stage fusion, for each available backend.
"""

import argparse
import statistics
import sys
import time

from semsig.evaluation import sample_query_set
from semsig.ingest import STREET_SCALE, SyntheticCityConfig, generate_synthetic_city, paris_intensities
from semsig.kernels import available_backends, scan_part
from semsig.metrics import MetricKind
from semsig.model import ANGLE_PART, TYPE_PART, BuildParams
from semsig.retrieval import FusionPolicy, Protocol, score_protocol
from semsig.siggen import build_database


def median_ms(fn, queries):
    times = []
    for q in queries:
        t0 = time.perf_counter()
        fn(q)
        times.append(1000.0 * (time.perf_counter() - t0))
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=float, default=1000.0, help="city side length in metres")
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    cfg = SyntheticCityConfig(args.size, args.size, paris_intensities(STREET_SCALE), args.seed)
    t0 = time.perf_counter()
    db = build_database(generate_synthetic_city(cfg), BuildParams(), cfg.bbox())
    db.packed
    print(f"{len(db)} records built in {time.perf_counter() - t0:.1f} s")
    queries = [s for _, s in sample_query_set(db, min(args.queries, len(db)), args.seed)]

    rows = []
    for backend in available_backends():
        for kind in MetricKind:
            for part in (TYPE_PART, ANGLE_PART):
                ms = median_ms(lambda q: scan_part(db.packed, q, kind, part, backend=backend), queries)
                rows.append((backend, f"scan {kind.value}/{part}", ms))
        policy = FusionPolicy(k_percent=5.0)
        for proto in (Protocol.FULL, Protocol.TWO_STAGE_TYPE_FIRST):
            ms = median_ms(lambda q: score_protocol(db, q, policy, proto, backend=backend, full_order=False), queries)
            rows.append((backend, proto.value, ms))

    width = max(len(r[1]) for r in rows)
    print(f"{'backend':<8}  {'operation':<{width}}  median ms")
    for backend, op, ms in rows:
        print(f"{backend:<8}  {op:<{width}}  {ms:9.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
